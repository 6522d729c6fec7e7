"""Encoder-decoder LSTM assembled over the flat-parameter kernels.

Parameters live in one float64 vector; named tensors are views into it,
so the optimizer and the serializer never copy.  All randomness
(initialization, item sampling, dropout masks, teacher-forcing coins)
comes from one generator per call, which makes training bit-reproducible
for a fixed seed on either kernel backend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import grammar
from ..grammar import ColorSymbol
from . import kernels


class ModelError(Exception):
    pass


class InvalidConfigError(ModelError):
    pass


class UnknownTokenError(ModelError):
    pass


class DivergenceError(ModelError):
    """Loss became non-finite during training."""


EOS = "<EOS>"
SOS = "<SOS>"

_EMPTY_M = np.zeros((0, 0))
_EMPTY_V = np.zeros(0)


@dataclass(frozen=True)
class Vocab:
    """Token tables for one experiment's lexicon.

    Decoder embedding rows cover colors plus both markers; the
    projection covers colors plus the end marker only, so a model with
    uniform logits scores ln(n_colors + 1) per position.
    """

    input_tokens: tuple[str, ...]
    colors: tuple[ColorSymbol, ...]

    def __post_init__(self):
        if len(set(self.input_tokens)) != len(self.input_tokens):
            raise InvalidConfigError("duplicate input tokens")
        if EOS in self.input_tokens:
            raise InvalidConfigError("end marker is implicit")

    @property
    def n_input(self) -> int:
        return len(self.input_tokens) + 1  # + EOS

    @property
    def n_colors(self) -> int:
        return len(self.colors)

    @property
    def input_eos(self) -> int:
        return len(self.input_tokens)

    @property
    def output_eos(self) -> int:
        return self.n_colors

    @property
    def output_sos(self) -> int:
        return self.n_colors + 1

    def encode_input(self, words: Sequence[str]) -> np.ndarray:
        idx = []
        for w in words:
            try:
                idx.append(self.input_tokens.index(w))
            except ValueError:
                raise UnknownTokenError(w) from None
        idx.append(self.input_eos)
        return np.asarray(idx, dtype=np.int64)

    def encode_output(self, colors: Sequence[ColorSymbol]) -> np.ndarray:
        idx = []
        for c in colors:
            try:
                idx.append(self.colors.index(c))
            except ValueError:
                raise UnknownTokenError(c.id) from None
        idx.append(self.output_eos)
        return np.asarray(idx, dtype=np.int64)

    def decode_output(self, ids: Sequence[int]) -> tuple[ColorSymbol, ...]:
        return tuple(self.colors[i] for i in ids)

    def to_json(self) -> dict:
        return {
            "input_tokens": list(self.input_tokens),
            "colors": [grammar.color_to_json(c) for c in self.colors],
        }

    @staticmethod
    def from_json(obj: dict) -> "Vocab":
        return Vocab(
            input_tokens=tuple(obj["input_tokens"]),
            colors=tuple(grammar.color_from_json(c) for c in obj["colors"]),
        )


def vocab_for_spec(spec) -> Vocab:
    if spec.lexicon is None:
        raise InvalidConfigError("spec has no lexicon to build a vocab from")
    return Vocab(
        input_tokens=tuple(spec.lexicon.entries),
        colors=tuple(spec.lexicon.color_pool),
    )


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    hidden: int = 200
    dropout: float = 0.5
    attention: bool = False
    embedding_dim: int | None = None

    def __post_init__(self):
        if self.layers not in (1, 2):
            raise InvalidConfigError(f"layers must be 1 or 2, got {self.layers}")
        if self.hidden < 3:
            raise InvalidConfigError(f"hidden must be >= 3, got {self.hidden}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.embedding_dim is None:
            object.__setattr__(self, "embedding_dim", self.hidden)
        elif self.embedding_dim != self.hidden:
            raise InvalidConfigError("embedding_dim must equal hidden")

    def to_json(self) -> dict:
        return {
            "layers": self.layers,
            "hidden": self.hidden,
            "dropout": self.dropout,
            "attention": self.attention,
            "embedding_dim": self.embedding_dim,
        }

    @staticmethod
    def from_json(obj: dict) -> "ModelConfig":
        return ModelConfig(**obj)


# architecture presets from the study being reproduced
ARCH_NO_ATTENTION = ModelConfig(layers=2, hidden=200, dropout=0.5, attention=False)
ARCH_ATTENTION = ModelConfig(layers=1, hidden=100, dropout=0.1, attention=True)


def _tensor_shapes(cfg: ModelConfig, vocab: Vocab) -> list[tuple[str, tuple[int, ...]]]:
    H, L = cfg.hidden, cfg.layers
    C = vocab.n_colors
    shapes = [
        ("Ein", (vocab.n_input, H)),
        ("enc_Wx", (L, 4 * H, H)),
        ("enc_Wh", (L, 4 * H, H)),
        ("enc_b", (L, 4 * H)),
        ("Eout", (C + 2, H)),
        ("dec_Wx", (L, 4 * H, H)),
        ("dec_Wh", (L, 4 * H, H)),
        ("dec_b", (L, 4 * H)),
    ]
    if cfg.attention:
        shapes += [("Wa", (H, H)), ("Wc", (H, 2 * H)), ("bc", (H,))]
    shapes += [("Wo", (C + 1, H)), ("bo", (C + 1,))]
    return shapes


def param_count(cfg: ModelConfig, vocab: Vocab) -> int:
    """Closed form; must agree with the layout (tested)."""
    H, L, C = cfg.hidden, cfg.layers, vocab.n_colors
    lstm = 2 * L * (4 * H * H + 4 * H * H + 4 * H)  # encoder + decoder stacks
    emb = vocab.n_input * H + (C + 2) * H
    proj = (C + 1) * H + (C + 1)
    attn = (H * H + H * 2 * H + H) if cfg.attention else 0
    return lstm + emb + proj + attn


def _build_views(cfg: ModelConfig, vocab: Vocab, flat: np.ndarray) -> dict:
    views = {}
    offset = 0
    for name, shape in _tensor_shapes(cfg, vocab):
        size = int(np.prod(shape))
        views[name] = flat[offset : offset + size].reshape(shape)
        offset += size
    if offset != flat.shape[0]:
        raise ModelError("flat buffer does not match the layout")
    return views


def _arg_tuple(cfg: ModelConfig, views: dict):
    if cfg.attention:
        wa, wc, bc = views["Wa"], views["Wc"], views["bc"]
    else:
        wa, wc, bc = _EMPTY_M, _EMPTY_M, _EMPTY_V
    return (
        views["Ein"],
        views["enc_Wx"],
        views["enc_Wh"],
        views["enc_b"],
        views["Eout"],
        views["dec_Wx"],
        views["dec_Wh"],
        views["dec_b"],
        wa,
        wc,
        bc,
        views["Wo"],
        views["bo"],
    )


INIT_SCALE = 0.08


@dataclass
class ModelParams:
    config: ModelConfig
    vocab: Vocab
    flat: np.ndarray
    views: dict = field(repr=False, default=None)

    def __post_init__(self):
        if self.views is None:
            self.views = _build_views(self.config, self.vocab, self.flat)

    def _weight_args(self):
        return _arg_tuple(self.config, self.views)


def init_model(cfg: ModelConfig, vocab: Vocab, seed: int) -> ModelParams:
    n = param_count(cfg, vocab)
    rng = np.random.default_rng(seed)
    flat = rng.uniform(-INIT_SCALE, INIT_SCALE, size=n)
    return ModelParams(config=cfg, vocab=vocab, flat=flat)


def _ones_masks(cfg: ModelConfig, tin: int, tout: int):
    return (
        np.ones((cfg.layers, tin, cfg.hidden)),
        np.ones((cfg.layers, tout, cfg.hidden)),
    )


def sample_masks(cfg: ModelConfig, tin: int, tout: int, rng: np.random.Generator):
    """Inverted-dropout masks for one presentation.

    Slot ``[0]`` masks the embedded token fed to layer 0 and slot ``[l]``
    masks the input of layer ``l``; the top layer's output is never
    dropped (standard stacked-LSTM placement).
    """
    if cfg.dropout == 0.0:
        return _ones_masks(cfg, tin, tout)
    keep = 1.0 - cfg.dropout
    enc = (rng.random((cfg.layers, tin, cfg.hidden)) < keep) / keep
    dec = (rng.random((cfg.layers, tout, cfg.hidden)) < keep) / keep
    return enc, dec


def example_loss(
    params: ModelParams,
    x_tokens: np.ndarray,
    y_tokens: np.ndarray,
    enc_mask: np.ndarray = None,
    dec_mask: np.ndarray = None,
    teacher_force: bool = True,
    grad_out: np.ndarray = None,
    return_probs: bool = False,
    return_attention: bool = False,
):
    """Loss of one example; fills ``grad_out`` (a flat buffer) when given.

    Masks default to ones (evaluation mode).  Explicit masks let a
    finite-difference check hold the dropout pattern fixed.
    """
    cfg, vocab = params.config, params.vocab
    tin, tout = len(x_tokens), len(y_tokens)
    if enc_mask is None or dec_mask is None:
        enc_mask, dec_mask = _ones_masks(cfg, tin, tout)
    probs = np.zeros((tout, vocab.n_colors + 1))
    att = np.zeros((tout, tin))
    compute_grads = grad_out is not None
    gflat = grad_out if compute_grads else np.zeros(params.flat.shape[0])
    gargs = _arg_tuple(cfg, _build_views(cfg, vocab, gflat))
    loss = kernels.seq_step(
        np.asarray(x_tokens, dtype=np.int64),
        np.asarray(y_tokens, dtype=np.int64),
        *params._weight_args(),
        cfg.attention,
        enc_mask,
        dec_mask,
        teacher_force,
        vocab.output_sos,
        compute_grads,
        *gargs,
        probs,
        att,
    )
    extras = []
    if return_probs:
        extras.append(probs)
    if return_attention:
        extras.append(att)
    if extras:
        return (loss, *extras)
    return loss


def forward(
    params: ModelParams,
    x_tokens: np.ndarray,
    y_tokens: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator = None,
):
    """Per-step output distributions and loss for one example.

    ``train`` samples fresh dropout masks (an rng is required); ``eval``
    runs with ones.  Teacher forcing is on in both modes, matching how
    the loss is defined.
    """
    cfg = params.config
    tin, tout = len(x_tokens), len(y_tokens)
    if mode == "train":
        if rng is None:
            raise InvalidConfigError("train mode needs an rng for dropout")
        enc_mask, dec_mask = sample_masks(cfg, tin, tout, rng)
    elif mode == "eval":
        enc_mask, dec_mask = _ones_masks(cfg, tin, tout)
    else:
        raise InvalidConfigError(f"mode must be train or eval, got {mode!r}")
    loss, probs = example_loss(
        params, x_tokens, y_tokens, enc_mask, dec_mask, return_probs=True
    )
    return probs, loss


def backward(
    params: ModelParams,
    x_tokens: np.ndarray,
    y_tokens: np.ndarray,
    enc_mask: np.ndarray = None,
    dec_mask: np.ndarray = None,
) -> np.ndarray:
    """Gradient of the example loss over the flat parameter buffer.

    Pass explicit masks to hold a dropout pattern fixed (that is what
    the finite-difference check does); defaults are evaluation masks.
    """
    grad = np.zeros(params.flat.shape[0])
    example_loss(
        params, x_tokens, y_tokens, enc_mask, dec_mask, grad_out=grad
    )
    return grad


@dataclass(frozen=True)
class TrainConfig:
    presentations: int = 10_000
    batch_size: int = 1
    learning_rate: float = 1e-3
    clip_norm: float = 5.0
    teacher_forcing: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.presentations < 0:
            raise InvalidConfigError("presentations must be >= 0")
        if self.batch_size != 1:
            raise InvalidConfigError("only single-example updates are supported")
        if not 0.0 <= self.teacher_forcing <= 1.0:
            raise InvalidConfigError("teacher_forcing must be in [0, 1]")

    def to_json(self) -> dict:
        return {
            "presentations": self.presentations,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "clip_norm": self.clip_norm,
            "teacher_forcing": self.teacher_forcing,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(obj: dict) -> "TrainConfig":
        return TrainConfig(**obj)


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def train(
    params: ModelParams,
    items: Sequence[tuple[Sequence[str], Sequence[ColorSymbol]]],
    tcfg: TrainConfig,
) -> list[float]:
    """Single-example presentations sampled uniformly; params update in
    place; returns the per-presentation loss trace."""
    if not items:
        raise ModelError("need at least one training item")
    vocab = params.vocab
    encoded = [
        (vocab.encode_input(words), vocab.encode_output(colors))
        for words, colors in items
    ]
    rng = np.random.default_rng(tcfg.seed)
    grad = np.zeros_like(params.flat)
    m = np.zeros_like(params.flat)
    v = np.zeros_like(params.flat)
    trace = []
    for step in range(1, tcfg.presentations + 1):
        x, y = encoded[rng.integers(len(encoded))]
        teacher = rng.random() < tcfg.teacher_forcing
        enc_mask, dec_mask = sample_masks(params.config, len(x), len(y), rng)
        grad[:] = 0.0
        loss = example_loss(
            params,
            x,
            y,
            enc_mask,
            dec_mask,
            teacher_force=teacher,
            grad_out=grad,
        )
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at presentation {step}")
        kernels.adam_update(
            params.flat,
            grad,
            m,
            v,
            tcfg.learning_rate,
            ADAM_BETA1,
            ADAM_BETA2,
            ADAM_EPS,
            step,
            tcfg.clip_norm,
        )
        trace.append(float(loss))
    return trace


def decode_greedy(
    params: ModelParams,
    words: Sequence[str],
    max_len: int = 20,
) -> tuple[ColorSymbol, ...]:
    x = params.vocab.encode_input(grammar.as_words(words))
    out, n = kernels.greedy_decode(
        x,
        *params._weight_args(),
        params.config.attention,
        params.vocab.output_sos,
        params.vocab.output_eos,
        max_len,
    )
    return params.vocab.decode_output(out[:n])


# ---------------------------------------------------------------------------
# On-disk format: one JSON header line, then raw little-endian float64


FORMAT_VERSION = 1


def save_params(params: ModelParams, path) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "config": params.config.to_json(),
        "vocab": params.vocab.to_json(),
        "dtype": "<f8",
        "count": int(params.flat.shape[0]),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(params.flat.astype("<f8", copy=False).tobytes())


def load_params(path) -> ModelParams:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        body = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"unsupported format version: {header.get('format_version')}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if flat.shape[0] != header["count"]:
        raise ModelError("parameter payload truncated")
    return ModelParams(
        config=ModelConfig.from_json(header["config"]),
        vocab=Vocab.from_json(header["vocab"]),
        flat=flat,
    )
