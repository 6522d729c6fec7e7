"""Synthetic participants with configurable bias profiles.

The simulator closes the loop with the analysis module: populations are
generated from known parameters, run through the same session engine as
live participants, and the resulting reports must recover the
configuration.  Response sampling is hierarchical so the marginals stay
interpretable:

* test items with a grammar target: correct with ``p_correct``;
  otherwise an error mode is drawn from the weights ``p_one_to_one``,
  ``p_forward_concat`` (only on reverse-concat instructions where the
  forward variant differs), and ``p_lapse``, renormalized over the
  applicable modes.  Expected accuracy is exactly ``p_correct``; the
  expected one-to-one share of errors on an item is its renormalized
  weight.
* familiar/novel word trials: the novel word keeps a new meaning with
  probability ``sigmoid(me_intercept + me_slope_contradictory*k +
  me_slope_pool*pool)``, else it takes the demonstrated color.
* order trials succeed with ``p_iconic``; conflict trials produce a
  multi-symbol answer with ``p_conflict_multi``; catch trials are
  answered from memory except with ``catch_miss_rate``.
* free-form sessions draw one persona per participant from the
  ``p_full_bias`` / ``p_iconic_only`` / ``p_incoherent`` weights; the
  first two answer from a fixed per-word table (with distinct or
  colliding sequences respectively), the third answers at random.

Everything is deterministic per seed and serializes byte-identically.
"""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, fields
from typing import Sequence

from . import grammar, protocol
from .grammar import ColorSymbol, Lexicon, OutputSeq
from .protocol import EXP1_CONFIG, ExperimentSpec, Item, Session


class SimulationError(Exception):
    pass


LAPSE_MAX_LEN = 4


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


@dataclass(frozen=True)
class BiasProfile:
    """Parameters of one simulated participant type.

    Error-mode fields are mixture weights, not probabilities; they are
    normalized over the modes applicable to each item.
    """

    p_correct: float = 1.0
    p_one_to_one: float = 1.0
    p_forward_concat: float = 1.0
    p_lapse: float = 1.0
    p_study_correct: float = 1.0
    catch_miss_rate: float = 0.0
    me_intercept: float = 3.0
    me_slope_contradictory: float = -1.2
    me_slope_pool: float = -0.25
    p_iconic: float = 1.0
    p_conflict_multi: float = 1.0
    p_full_bias: float = 1.0
    p_iconic_only: float = 0.0
    p_incoherent: float = 0.0

    def __post_init__(self):
        for name in (
            "p_correct",
            "p_study_correct",
            "catch_miss_rate",
            "p_iconic",
            "p_conflict_multi",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SimulationError(f"{name} must be in [0, 1], got {v}")
        for name in (
            "p_one_to_one",
            "p_forward_concat",
            "p_lapse",
            "p_full_bias",
            "p_iconic_only",
            "p_incoherent",
        ):
            if getattr(self, name) < 0:
                raise SimulationError(f"{name} must be nonnegative")
        if self.p_full_bias + self.p_iconic_only + self.p_incoherent <= 0:
            raise SimulationError("persona weights sum to zero")

    def me_follow_probability(self, n_contradictory: int, pool_size: int) -> float:
        return _sigmoid(
            self.me_intercept
            + self.me_slope_contradictory * n_contradictory
            + self.me_slope_pool * pool_size
        )


def profile_to_json(profile: BiasProfile) -> dict:
    return asdict(profile)


def profile_from_json(obj: dict) -> BiasProfile:
    known = {f.name for f in fields(BiasProfile)}
    unknown = set(obj) - known
    if unknown:
        raise SimulationError(f"unknown profile fields: {sorted(unknown)}")
    return BiasProfile(**obj)


# ---------------------------------------------------------------------------
# Response construction


def _lapse(pool: Sequence[ColorSymbol], rng: random.Random) -> OutputSeq:
    return tuple(
        rng.choice(pool) for _ in range(rng.randint(1, LAPSE_MAX_LEN))
    )


def _one_to_one_response(item: Item, lex: Lexicon, rng: random.Random) -> OutputSeq:
    return tuple(
        lex.color_of(w) if lex.is_primitive(w) else rng.choice(item.pool)
        for w in item.instruction
    )


def _forward_variant(item: Item, lex: Lexicon) -> OutputSeq | None:
    words = item.instruction
    rev = lex.word_for(grammar.Functor.REV_CONCAT)
    if rev is None or rev not in words:
        return None
    try:
        tree = grammar.parse(words, lex, EXP1_CONFIG)
        forward = grammar.evaluate(tree, lex, EXP1_CONFIG, kiki_reverses=False)
    except grammar.GrammarError:
        return None
    return forward if forward != item.target else None


def _missed_catch(item: Item, rng: random.Random) -> OutputSeq:
    resp = _lapse(item.pool, rng)
    if resp == item.target:
        resp = resp + (item.pool[0],)
    return resp


def simulate_response(
    item: Item,
    profile: BiasProfile,
    lex: Lexicon | None,
    rng: random.Random,
) -> OutputSeq:
    """One test-phase response.  Free-form persona behavior lives in
    ``make_responder`` because it needs per-session state."""
    if item.is_catch:
        if rng.random() < profile.catch_miss_rate:
            return _missed_catch(item, rng)
        return item.target

    kind = item.meta.get("kind")
    if kind == "me":
        demo_id = item.meta["familiar_demo"]
        demo = next(c for c in item.pool if c.id == demo_id)
        follow = profile.me_follow_probability(
            item.meta["n_contradictory"], item.meta["pool_size"]
        )
        if rng.random() < follow:
            return (rng.choice([c for c in item.pool if c != demo]),)
        return (demo,)
    if kind == "conflict":
        if rng.random() < profile.p_conflict_multi:
            order = list(item.pool)
            rng.shuffle(order)
            return tuple(order)
        return (rng.choice(item.pool),)
    if kind == "iconic":
        if rng.random() < profile.p_iconic:
            return item.target
        return _lapse(item.pool, rng)

    if item.target is None or lex is None:
        return _lapse(item.pool, rng)

    if rng.random() < profile.p_correct:
        return item.target

    forward = _forward_variant(item, lex)
    modes: list[tuple[str, float]] = [("one_to_one", profile.p_one_to_one)]
    if forward is not None:
        modes.append(("forward", profile.p_forward_concat))
    modes.append(("lapse", profile.p_lapse))
    modes = [(m, w) for m, w in modes if w > 0]
    if not modes:
        modes = [("lapse", 1.0)]
    total = sum(w for _, w in modes)
    pick = rng.random() * total
    acc = 0.0
    mode = modes[-1][0]
    for m, w in modes:
        acc += w
        if pick < acc:
            mode = m
            break
    if mode == "one_to_one":
        return _one_to_one_response(item, lex, rng)
    if mode == "forward":
        return forward
    return _lapse(item.pool, rng)


def _exp3_table(
    spec: ExperimentSpec, persona: str, rng: random.Random
) -> dict[str, OutputSeq] | None:
    words = sorted({w for it in spec.items for w in it.instruction})
    pool = spec.items[0].pool
    if persona == "full":
        colors = rng.sample(pool, len(words))
        return {w: (c,) for w, c in zip(words, colors)}
    if persona == "iconic_only":
        shared = rng.choice(pool)
        return {w: (shared,) for w in words}
    return None


def make_responder(
    spec: ExperimentSpec, profile: BiasProfile, seed: int
) -> protocol.Responder:
    """A Responder closure with its own RNG and per-session persona."""
    rng = random.Random(seed)
    table: dict[str, OutputSeq] | None = None
    if spec.kind == "exp3":
        weights = [
            ("full", profile.p_full_bias),
            ("iconic_only", profile.p_iconic_only),
            ("incoherent", profile.p_incoherent),
        ]
        persona = rng.choices(
            [w[0] for w in weights], weights=[w[1] for w in weights]
        )[0]
        table = _exp3_table(spec, persona, rng)

    def responder(item: Item, phase: str) -> OutputSeq:
        if spec.kind == "exp3":
            if table is None:
                return _lapse(item.pool, rng)
            return tuple(c for w in item.instruction for c in table[w])
        if phase == "study-quiz":
            if rng.random() < profile.p_study_correct:
                return item.target
            return _lapse(item.pool, rng)
        return simulate_response(item, profile, spec.lexicon, rng)

    return responder


# ---------------------------------------------------------------------------
# Populations


@dataclass(frozen=True)
class PopulationSpec:
    groups: tuple[tuple[BiasProfile, int], ...]
    seed: int = 0

    def __post_init__(self):
        if not self.groups or any(count < 1 for _, count in self.groups):
            raise SimulationError("population counts must be >= 1")


def simulate_population(
    spec: ExperimentSpec,
    profile: BiasProfile,
    n: int,
    seed: int,
    id_prefix: str = "sim",
    fresh_specs: bool = False,
) -> list[Session]:
    """Run ``n`` simulated participants through an experiment.

    With ``fresh_specs`` each participant gets a re-randomized spec of
    the same kind (their session records the seed, so graders rebuild
    the right one); otherwise all share ``spec``.
    """
    if n < 1:
        raise SimulationError("population size must be >= 1")
    base = random.Random(seed)
    sessions = []
    for i in range(n):
        child = base.randrange(2**62)
        this_spec = spec
        if fresh_specs:
            this_spec = protocol.generate(spec.kind, base.randrange(2**31))
        responder = make_responder(this_spec, profile, child)
        sessions.append(
            protocol.drive_session(this_spec, responder, f"{id_prefix}{i}")
        )
    return sessions


def simulate_mixed_population(
    spec: ExperimentSpec,
    population: PopulationSpec,
    id_prefix: str = "sim",
    fresh_specs: bool = False,
) -> list[Session]:
    """One session per participant across every profile group."""
    sessions = []
    base = random.Random(population.seed)
    for gi, (profile, count) in enumerate(population.groups):
        group_seed = base.randrange(2**62)
        group = simulate_population(
            spec,
            profile,
            count,
            group_seed,
            id_prefix=f"{id_prefix}g{gi}_",
            fresh_specs=fresh_specs,
        )
        for s in group:
            s.meta["profile_group"] = gi
        sessions.extend(group)
    return sessions
