"""Command-line front end.

One subcommand per pipeline step: generate experiment specs, interpret
instructions against a lexicon, simulate or grade sessions, fit the
bias analyses, train and sweep the seq2seq baseline, benchmark the
kernels, and serve the browser experiment.

Every file the CLI writes goes through the canonical JSON encoder, so
re-running a command with the same inputs yields byte-identical output
(timing columns in sweep CSVs excepted).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
import time
from pathlib import Path

from . import analysis, grammar, jsonio, protocol, simulate

# seq2seq (numba) and service (fastapi) are imported inside their
# subcommands so `interpret` and friends stay snappy.

_LIGHT_ERRORS = (
    grammar.GrammarError,
    protocol.ProtocolError,
    analysis.AnalysisError,
    simulate.SimulationError,
    OSError,
    ValueError,  # covers json.JSONDecodeError and bad numeric args
    KeyError,
)


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 1


def _write_json(path: str, obj) -> None:
    if path == "-":
        print(jsonio.dumps(obj))
    else:
        jsonio.write(path, obj)


def _load_sessions(path: str) -> list[protocol.Session]:
    return [protocol.session_from_json(obj) for obj in jsonio.read_lines(path)]


def _specs_for(sessions, spec_path: str | None) -> dict[str, protocol.ExperimentSpec]:
    """Spec lookup keyed by "<kind>-<seed>".

    Sessions carry their kind and seed, so missing entries are
    regenerated; an explicit --spec file takes precedence for its key.
    """
    specs: dict[str, protocol.ExperimentSpec] = {}
    if spec_path:
        spec = protocol.spec_from_json(jsonio.read(spec_path))
        specs[spec.spec_id] = spec
    for session in sessions:
        key = f"{session.experiment}-{session.seed}"
        if key not in specs:
            specs[key] = protocol.spec_for_session(session)
    return specs


# ---------------------------------------------------------------------------
# interpret


def _cmd_interpret(args) -> int:
    lex = grammar.lexicon_from_json(jsonio.read(args.lexicon))
    words = grammar.as_words(args.instruction)
    cfg = grammar.DEFAULT_CONFIG
    if args.no_concat:
        cfg = grammar.GrammarConfig(allow_concat=False)
    try:
        out = grammar.interpret(words, lex, cfg)
    except grammar.MalformedInstructionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(" ".join(c.id for c in out))
    return 0


# ---------------------------------------------------------------------------
# gen-exp / grade / analyze


def _cmd_gen_exp(args) -> int:
    spec = protocol.generate(f"exp{args.exp}", args.seed)
    _write_json(args.out, protocol.spec_to_json(spec))
    return 0


def _cmd_grade(args) -> int:
    sessions = _load_sessions(args.sessions)
    if not sessions:
        return _fail("no sessions in input")
    specs = _specs_for(sessions, args.spec)
    results = []
    by_kind: dict[str, list[protocol.ParticipantResult]] = {}
    for session in sessions:
        spec = specs[f"{session.experiment}-{session.seed}"]
        result = protocol.grade_session(session, spec)
        results.append(result)
        by_kind.setdefault(session.experiment, []).append(result)
    report = {
        "format_version": 1,
        "participants": [
            {
                "participant_id": r.participant_id,
                "experiment": r.experiment,
                "per_stage_accuracy": r.per_stage_accuracy,
                "stage_passed": r.stage_passed,
                "catch_missed": r.catch_missed,
                "excluded": r.excluded,
                "exclusion_reason": r.exclusion_reason,
            }
            for r in results
        ],
        "aggregate": {
            kind: protocol.aggregate(rs) for kind, rs in sorted(by_kind.items())
        },
    }
    _write_json(args.out, report)
    return 0


def _cmd_analyze(args) -> int:
    sessions = _load_sessions(args.sessions)
    if not sessions:
        return _fail("no sessions in input")
    specs = _specs_for(sessions, args.spec)
    report = analysis.bias_report(sessions, specs)
    report["format_version"] = 1
    _write_json(args.out, report)
    if args.csv:
        rows = analysis.regression_rows(sessions, specs)
        fields = [
            "participant_id",
            "trial",
            "n_contradictory",
            "pool_size",
            "me_consistent",
            "me_violated",
        ]
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
    return 0


# ---------------------------------------------------------------------------
# simulate


def _cmd_simulate(args) -> int:
    spec = protocol.spec_from_json(jsonio.read(args.spec))
    profile = simulate.profile_from_json(jsonio.read(args.profile))
    sessions = simulate.simulate_population(spec, profile, args.n, args.seed)
    jsonio.write_lines(args.out, (protocol.session_to_json(s) for s in sessions))
    return 0


# ---------------------------------------------------------------------------
# train / sweep / bench


def _model_config(obj: dict):
    from .seq2seq import model as m

    known = {"layers", "hidden", "dropout", "attention", "embedding_dim"}
    extra = set(obj) - known
    if extra:
        raise ValueError(f"unknown model config keys: {sorted(extra)}")
    return m.ModelConfig(**obj)


def _train_config(obj: dict):
    from .seq2seq import model as m

    known = {
        "presentations",
        "batch_size",
        "learning_rate",
        "clip_norm",
        "teacher_forcing",
        "seed",
    }
    extra = set(obj) - known
    if extra:
        raise ValueError(f"unknown train config keys: {sorted(extra)}")
    return m.TrainConfig(**obj)


def _cmd_train(args) -> int:
    from .seq2seq import model as m
    from .seq2seq import sweep

    spec = protocol.spec_from_json(jsonio.read(args.spec))
    cfg_doc = jsonio.read(args.config)
    if not isinstance(cfg_doc, dict):
        return _fail("config file must hold a JSON object")
    try:
        mcfg = _model_config(cfg_doc.get("model", {}))
        tcfg = _train_config(cfg_doc.get("train", {}))
    except (TypeError, m.InvalidConfigError, ValueError) as exc:
        return _fail(str(exc))
    vocab = m.vocab_for_spec(spec)
    params = m.init_model(mcfg, vocab, tcfg.seed)
    items = [(it.instruction, it.target) for it in sweep.training_items(spec)]
    try:
        trace = m.train(params, items, tcfg)
    except m.ModelError as exc:
        return _fail(str(exc))
    m.save_params(params, args.out)
    final = trace[-1] if trace else None
    print(
        jsonio.dumps(
            {
                "out": args.out,
                "presentations": tcfg.presentations,
                "parameters": params.flat.size,
                "final_loss": final,
            }
        )
    )
    return 0


def _cmd_sweep(args) -> int:
    from .seq2seq import sweep

    spec = protocol.generate("exp1", args.spec_seed)
    grid = None
    if args.start is not None or args.floor != 3:
        grid = sweep.architecture_grid(args.start, args.floor)
    rows = sweep.run_generalization_experiment(
        spec,
        seeds=tuple(range(args.seeds)),
        presentations=args.presentations,
        grid=grid,
        progress=(lambda r: print(
            f"{r.architecture:<22} h={r.hidden:<4} seed={r.seed} "
            f"train={r.train_acc:.3f} test={r.test_acc:.3f} "
            f"({r.seconds:.1f}s)",
            file=sys.stderr,
        )) if args.verbose else None,
        workers=args.workers,
    )
    sweep.write_csv(rows, args.out)
    summary = sweep.summarize(rows)
    if args.summary:
        _write_json(args.summary, summary)
    for entry in summary:
        print(
            f"{entry['architecture']:<22} h={entry['hidden']:<4} "
            f"train={entry['mean_train_acc']:.3f} test={entry['mean_test_acc']:.3f}"
        )
    return 0


_BENCH_FLAG = "DAXLAB_DISABLE_NUMBA"


def _bench_once(hidden: int, presentations: int, seed: int) -> dict:
    from .seq2seq import kernels
    from .seq2seq import model as m

    spec = protocol.generate("exp1", seed)
    vocab = m.vocab_for_spec(spec)
    from .seq2seq import sweep

    items = [(it.instruction, it.target) for it in sweep.training_items(spec)]
    mcfg = m.ModelConfig(layers=1, hidden=hidden, dropout=0.1, attention=True)
    tcfg = m.TrainConfig(presentations=presentations, seed=seed)

    # First call hits JIT compilation under numba; time it separately.
    warm = m.init_model(mcfg, vocab, seed)
    t0 = time.perf_counter()
    m.train(warm, items, m.TrainConfig(presentations=1, seed=seed))
    compile_seconds = time.perf_counter() - t0

    params = m.init_model(mcfg, vocab, seed)
    t0 = time.perf_counter()
    m.train(params, items, tcfg)
    train_seconds = time.perf_counter() - t0
    return {
        "backend": "numba" if kernels.NUMBA_ENABLED else "numpy",
        "hidden": hidden,
        "presentations": presentations,
        "compile_seconds": round(compile_seconds, 4),
        "train_seconds": round(train_seconds, 4),
        "per_presentation_ms": round(1000.0 * train_seconds / presentations, 4),
    }


def _cmd_bench(args) -> int:
    if args.backend != "both":
        live = _bench_once(args.hidden, args.presentations, args.seed)
        if live["backend"] != args.backend:
            return _fail(
                f"requested backend {args.backend!r} but {live['backend']!r} "
                f"is active (set {_BENCH_FLAG}=1 to force the numpy fallback)"
            )
        print(jsonio.dumps(live))
        return 0

    results = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ)
        if backend == "numpy":
            env[_BENCH_FLAG] = "1"
        else:
            env.pop(_BENCH_FLAG, None)
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "daxlab",
                "bench",
                "--backend",
                backend,
                "--hidden",
                str(args.hidden),
                "--presentations",
                str(args.presentations),
                "--seed",
                str(args.seed),
            ],
            env=env,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return _fail(f"{backend} benchmark run failed")
        results.append(json.loads(proc.stdout))
    print(f"{'backend':<8} {'compile_s':>10} {'train_s':>9} {'ms/pres':>9}")
    for r in results:
        print(
            f"{r['backend']:<8} {r['compile_seconds']:>10.3f} "
            f"{r['train_seconds']:>9.3f} {r['per_presentation_ms']:>9.3f}"
        )
    numba_ms = results[0]["per_presentation_ms"]
    numpy_ms = results[1]["per_presentation_ms"]
    if numba_ms > 0:
        print(f"speedup: {numpy_ms / numba_ms:.2f}x")
    return 0


# ---------------------------------------------------------------------------
# serve


def _cmd_serve(args) -> int:
    from . import service

    try:
        config = service.load_config(args.config)
    except service.ServiceError as exc:
        return _fail(str(exc))
    if args.check:
        print(jsonio.dumps(config.to_json()))
        return 0
    service.run_server(config)  # pragma: no cover - blocks on uvicorn
    return 0  # pragma: no cover


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daxlab",
        description="Few-shot instruction-learning experiments and analyses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "interpret", help="evaluate an instruction against a lexicon"
    )
    p.add_argument("instruction", help="space-separated words")
    p.add_argument("--lexicon", required=True, help="lexicon JSON file")
    p.add_argument(
        "--no-concat",
        action="store_true",
        help="reject bare word-word concatenation",
    )
    p.set_defaults(func=_cmd_interpret)

    p = sub.add_parser("gen-exp", help="generate an experiment spec")
    p.add_argument("--exp", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output file, - for stdout")
    p.set_defaults(func=_cmd_gen_exp)

    p = sub.add_parser("grade", help="grade recorded sessions")
    p.add_argument("--sessions", required=True, help="JSONL session file")
    p.add_argument("--spec", help="spec JSON (default: regenerate from seeds)")
    p.add_argument("--out", default="-", help="report file, - for stdout")
    p.set_defaults(func=_cmd_grade)

    p = sub.add_parser("analyze", help="bias-consistency report")
    p.add_argument("--sessions", required=True, help="JSONL session file")
    p.add_argument("--spec", help="spec JSON (default: regenerate from seeds)")
    p.add_argument("--out", default="-", help="report file, - for stdout")
    p.add_argument("--csv", help="also dump the regression design matrix")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="run simulated participants")
    p.add_argument("--spec", required=True, help="spec JSON file")
    p.add_argument("--profile", required=True, help="bias profile JSON file")
    p.add_argument("--n", type=int, required=True, help="population size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="JSONL output path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train one seq2seq model")
    p.add_argument("--spec", required=True, help="spec JSON file")
    p.add_argument("--config", required=True, help='{"model": {...}, "train": {...}}')
    p.add_argument("--out", required=True, help="parameter file to write")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser(
        "sweep", help="architecture-by-size generalization sweep"
    )
    p.add_argument("--out", required=True, help="CSV results path")
    p.add_argument("--spec-seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=5, help="seeds per cell")
    p.add_argument("--presentations", type=int, default=10_000)
    p.add_argument("--start", type=int, default=None, help="largest hidden size")
    p.add_argument("--floor", type=int, default=3, help="smallest hidden size")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--summary", help="also write a JSON summary")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("bench", help="time the training kernels")
    p.add_argument("--backend", choices=("numba", "numpy", "both"), default="both")
    p.add_argument("--hidden", type=int, default=50)
    p.add_argument("--presentations", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", help="run the experiment HTTP server")
    p.add_argument("--config", help="server config JSON file")
    p.add_argument(
        "--check", action="store_true", help="validate config and exit"
    )
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyError as exc:
        return _fail(f"missing field {exc}")
    except _LIGHT_ERRORS as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
