"""Architecture sweep: train on the 14 study instructions, measure
exact-match generalization on the held-out test instructions.

Two base architectures are swept by repeatedly halving the hidden size
down to three units per layer.  Scoring reuses the protocol module's
exact-match rule, so humans and models are graded identically.
"""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

from .. import protocol
from ..protocol import ExperimentSpec, Item
from . import model as m


def halving_sweep(start: int, floor: int = 3) -> tuple[int, ...]:
    sizes = []
    h = start
    while h >= floor:
        sizes.append(h)
        h //= 2
    return tuple(sizes)


def architecture_grid(
    start: int | None = None, floor: int = 3
) -> list[tuple[str, m.ModelConfig]]:
    """Both reference architectures at every halved hidden size.

    By default each family starts from its published width; pass
    ``start`` to cap both families at the same size (handy for smoke
    runs).
    """
    grid = []
    for h in halving_sweep(start or m.ARCH_NO_ATTENTION.hidden, floor):
        grid.append(
            ("no_attention", m.ModelConfig(layers=2, hidden=h, dropout=0.5))
        )
    for h in halving_sweep(start or m.ARCH_ATTENTION.hidden, floor):
        grid.append(
            (
                "attention",
                m.ModelConfig(layers=1, hidden=h, dropout=0.1, attention=True),
            )
        )
    return grid


def training_items(spec: ExperimentSpec) -> list[Item]:
    """The final stage's study set (every primitive and function demo)."""
    final = spec.stages[-1]
    return list(final.study)


def test_items(spec: ExperimentSpec) -> list[Item]:
    return [
        item
        for stage in spec.stages
        for item in stage.test
        if not item.is_catch
    ]


def exact_match(params: m.ModelParams, items: Sequence[Item]) -> float:
    hits = 0
    for item in items:
        decoded = m.decode_greedy(params, item.instruction)
        hits += protocol.score_response(item, decoded)
    return hits / len(items)


@dataclass(frozen=True)
class SweepRow:
    architecture: str
    layers: int
    hidden: int
    dropout: float
    attention: bool
    seed: int
    train_acc: float
    test_acc: float
    final_loss: float
    seconds: float


def run_one(
    spec: ExperimentSpec,
    cfg: m.ModelConfig,
    seed: int,
    presentations: int = 10_000,
    architecture: str = "",
) -> SweepRow:
    started = time.perf_counter()
    vocab = m.vocab_for_spec(spec)
    params = m.init_model(cfg, vocab, seed)
    tcfg = m.TrainConfig(presentations=presentations, seed=seed)
    pairs = [(it.instruction, it.target) for it in training_items(spec)]
    trace = m.train(params, pairs, tcfg)
    return SweepRow(
        architecture=architecture or ("attention" if cfg.attention else "no_attention"),
        layers=cfg.layers,
        hidden=cfg.hidden,
        dropout=cfg.dropout,
        attention=cfg.attention,
        seed=seed,
        train_acc=exact_match(params, training_items(spec)),
        test_acc=exact_match(params, test_items(spec)),
        final_loss=trace[-1] if trace else float("nan"),
        seconds=time.perf_counter() - started,
    )


def _sweep_task(task) -> SweepRow:
    spec, name, cfg, seed, presentations = task
    return run_one(spec, cfg, seed, presentations, architecture=name)


def run_generalization_experiment(
    spec: ExperimentSpec,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    presentations: int = 10_000,
    grid: Sequence[tuple[str, m.ModelConfig]] | None = None,
    progress: Callable[[SweepRow], None] | None = None,
    workers: int = 1,
) -> list[SweepRow]:
    """Train every (architecture, seed) cell and collect one row each.

    Rows always come back in grid-by-seed order regardless of worker
    count, so repeated runs produce identical CSVs apart from timings.
    """
    tasks = [
        (spec, name, cfg, seed, presentations)
        for name, cfg in (grid if grid is not None else architecture_grid())
        for seed in seeds
    ]
    rows = []
    if workers <= 1:
        for task in tasks:
            rows.append(_sweep_task(task))
            if progress is not None:
                progress(rows[-1])
        return rows
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        for row in pool.map(_sweep_task, tasks):
            rows.append(row)
            if progress is not None:
                progress(row)
    return rows


def summarize(rows: Sequence[SweepRow]) -> list[dict]:
    """Mean train/test accuracy per architecture size across seeds."""
    buckets: dict[tuple[str, int], list[SweepRow]] = {}
    for row in rows:
        buckets.setdefault((row.architecture, row.hidden), []).append(row)
    out = []
    for (arch, hidden), group in sorted(buckets.items()):
        out.append(
            {
                "architecture": arch,
                "hidden": hidden,
                "n_seeds": len(group),
                "mean_train_acc": sum(r.train_acc for r in group) / len(group),
                "mean_test_acc": sum(r.test_acc for r in group) / len(group),
            }
        )
    return out


def write_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "architecture",
                "layers",
                "hidden",
                "dropout",
                "attention",
                "seed",
                "train_acc",
                "test_acc",
                "final_loss",
                "seconds",
            ],
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))
