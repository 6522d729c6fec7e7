"""Acceptance gate: one check per shipped guarantee, each printing a
PASS/FAIL line with its measured numbers (replayed in the terminal
summary by conftest).

The generalization sweep needs the compiled kernels to stay inside its
time budget, so it is skipped when DAXLAB_DISABLE_NUMBA=1 forces the
numpy fallback.
"""

import math
import os
import time

import numpy as np
import pytest

from _acceptance_log import LINES, record
from oracles import oracle_enumerate

from daxlab import analysis, grammar, jsonio, protocol, simulate
from daxlab.cli import main as cli_main
from daxlab.grammar import ColorSymbol, Functor
from daxlab.protocol import EXP1_CONFIG

NUMPY_FALLBACK = os.environ.get("DAXLAB_DISABLE_NUMBA") == "1"


# ---------------------------------------------------------------------------
# 1. Golden mappings


GOLDEN = [
    ("dax fep", "RED RED RED"),
    ("wif blicket dax", "GREEN RED GREEN"),
    ("dax kiki lug", "BLUE RED"),
    ("wif blicket dax kiki lug", "BLUE GREEN RED GREEN"),
    ("lug blicket wif", "BLUE GREEN BLUE"),
]


def test_golden_mappings():
    t0 = time.perf_counter()
    lex = grammar.canonical_lexicon()
    failures = []
    for text, want in GOLDEN:
        out = grammar.interpret(text, lex)
        got = " ".join(c.display_name.upper() for c in out)
        if got != want:
            failures.append(f"{text!r} -> {got!r}, want {want!r}")
    dt = time.perf_counter() - t0
    ok = not failures and dt < 1.0
    record(
        "grammar golden mappings",
        ok,
        f"{len(GOLDEN) - len(failures)}/{len(GOLDEN)} exact in {dt:.3f}s"
        + ("" if not failures else "; " + "; ".join(failures)),
    )
    assert not failures
    assert dt < 1.0


# ---------------------------------------------------------------------------
# 2. Interpreter vs brute-force tree enumeration


def test_interpreter_matches_tree_oracle():
    t0 = time.perf_counter()
    lex = grammar.canonical_lexicon()
    table = oracle_enumerate(lex, 6)
    mismatches = 0
    for words, ids in table.items():
        got = tuple(c.id for c in grammar.interpret(words, lex))
        mismatches += got != ids
    enumerated = dict(grammar.enumerate_instructions(lex, max_words=6))
    extra = set(enumerated) ^ set(table)
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and not extra and dt < 10.0
    record(
        "interpreter equals tree oracle",
        ok,
        f"{len(table)} instructions of <= 6 words, {mismatches} mismatches, "
        f"{len(extra)} coverage gaps, {dt:.2f}s",
    )
    assert mismatches == 0
    assert not extra
    assert dt < 10.0


# ---------------------------------------------------------------------------
# 3. Gradient check


_FD_EPS = 1e-4
_DEAD = 1e-6  # below central-difference resolution at this epsilon


def _max_rel_grad_error(attention: bool) -> tuple[float, int]:
    from daxlab.seq2seq.model import (
        ModelConfig,
        Vocab,
        example_loss,
        init_model,
        sample_masks,
    )

    red = ColorSymbol("COLOR1", "red")
    green = ColorSymbol("COLOR2", "green")
    blue = ColorSymbol("COLOR3", "blue")
    vocab = Vocab(("dax", "wif", "lug", "fep", "kiki"), (red, green, blue))
    cfg = ModelConfig(
        layers=1 if attention else 2, hidden=4, dropout=0.3, attention=attention
    )
    params = init_model(cfg, vocab, seed=5)
    x = vocab.encode_input(("dax", "fep", "kiki", "lug"))
    y = vocab.encode_output((red, red, blue, green))
    enc, dec = sample_masks(cfg, len(x), len(y), np.random.default_rng(11))
    grad = np.zeros_like(params.flat)
    example_loss(params, x, y, enc, dec, teacher_force=True, grad_out=grad)

    def loss_at() -> float:
        return example_loss(params, x, y, enc, dec, teacher_force=True)

    rng = np.random.default_rng(3)
    idx = rng.choice(params.flat.size, size=min(200, params.flat.size), replace=False)
    worst = 0.0
    checked = 0
    for i in idx:
        orig = params.flat[i]
        params.flat[i] = orig + _FD_EPS
        up = loss_at()
        params.flat[i] = orig - _FD_EPS
        down = loss_at()
        params.flat[i] = orig
        fd = (up - down) / (2 * _FD_EPS)
        if max(abs(fd), abs(grad[i])) < _DEAD:
            assert abs(fd - grad[i]) < 1e-8
            continue
        checked += 1
        worst = max(worst, abs(fd - grad[i]) / max(abs(fd), abs(grad[i])))
    return worst, checked


def test_gradients_match_finite_differences():
    t0 = time.perf_counter()
    worst_plain, n_plain = _max_rel_grad_error(attention=False)
    worst_attn, n_attn = _max_rel_grad_error(attention=True)
    dt = time.perf_counter() - t0
    worst = max(worst_plain, worst_attn)
    ok = worst < 1e-4 and dt < 60.0
    record(
        "gradient check",
        ok,
        f"200 coords per model, max rel err {worst:.2e} on the "
        f"{n_plain}+{n_attn} coords above finite-difference resolution "
        f"(rest agree within 1e-8), {dt:.1f}s",
    )
    assert worst < 1e-4
    assert dt < 60.0


# ---------------------------------------------------------------------------
# 4. Pipeline closure: simulation -> sessions -> bias report


CLOSURE_PROFILE = simulate.BiasProfile(
    p_correct=0.7,
    p_one_to_one=1.0,
    p_forward_concat=1.0,
    p_lapse=1.0,
    p_study_correct=1.0,
    catch_miss_rate=0.0,
)

# Lapse responses draw a length uniformly from 1..LAPSE_MAX_LEN and each
# symbol uniformly from the pool; the expectations below integrate the
# classifiers over that distribution by hand.


def _p_lapse_equals(seq, k: int) -> float:
    n = len(seq)
    if not 1 <= n <= simulate.LAPSE_MAX_LEN:
        return 0.0
    return (1.0 / simulate.LAPSE_MAX_LEN) * (1.0 / k) ** n


def _p_lapse_one_to_one(words, lex, k: int) -> float:
    if not 1 <= len(words) <= simulate.LAPSE_MAX_LEN:
        return 0.0
    n_prims = sum(1 for w in words if lex.is_primitive(w))
    return (1.0 / simulate.LAPSE_MAX_LEN) * (1.0 / k) ** n_prims


def _p_one_mode_equals(words, seq, lex, k: int) -> float:
    """Chance a one-symbol-per-word draw comes out as ``seq``."""
    if len(seq) != len(words):
        return 0.0
    p = 1.0
    for w, s in zip(words, seq):
        if lex.is_primitive(w):
            if s != lex.color_of(w):
                return 0.0
        else:
            p /= k
    return p


def _classifies_one_to_one(words, seq, lex) -> bool:
    if len(seq) != len(words):
        return False
    return all(
        not lex.is_primitive(w) or s == lex.color_of(w)
        for w, s in zip(words, seq)
    )


def _expected_exp1_shares(spec, profile) -> tuple[float, float]:
    lex = spec.lexicon
    rev = lex.word_for(Functor.REV_CONCAT)
    one_num = one_den = 0.0
    kiki_num = kiki_den = 0.0
    for stage in spec.stages:
        for item in stage.test:
            if item.is_catch:
                continue
            words = item.instruction
            k = len(item.pool)
            forward = None
            if rev in words:
                tree = grammar.parse(words, lex, EXP1_CONFIG)
                fwd = grammar.evaluate(tree, lex, EXP1_CONFIG, kiki_reverses=False)
                if fwd != item.target:
                    forward = fwd
            weights = [("one", profile.p_one_to_one)]
            if forward is not None:
                weights.append(("fwd", profile.p_forward_concat))
            weights.append(("lapse", profile.p_lapse))
            total = sum(w for _, w in weights)
            p = {m: w / total for m, w in weights}
            p_fwd = p.get("fwd", 0.0)

            # chance an error draw coincides with the target (not an error)
            p_one_eq_t = _p_one_mode_equals(words, item.target, lex, k)
            p_lapse_eq_t = _p_lapse_equals(item.target, k)
            counted = 1.0 - p["one"] * p_one_eq_t - p["lapse"] * p_lapse_eq_t

            target_cls = _classifies_one_to_one(words, item.target, lex)
            cls_fwd = forward is not None and _classifies_one_to_one(
                words, forward, lex
            )
            num = (
                p["one"] * (1.0 - p_one_eq_t)
                + p_fwd * cls_fwd
                + p["lapse"]
                * (
                    _p_lapse_one_to_one(words, lex, k)
                    - (p_lapse_eq_t if target_cls else 0.0)
                )
            )
            one_num += num
            one_den += counted
            if forward is not None:
                kiki_num += (
                    p_fwd
                    + p["one"] * _p_one_mode_equals(words, forward, lex, k)
                    + p["lapse"] * _p_lapse_equals(forward, k)
                )
                kiki_den += counted
    return one_num / one_den, kiki_num / kiki_den


@pytest.fixture(scope="module")
def closure_population():
    t0 = time.perf_counter()
    spec1 = protocol.generate("exp1", 101)
    spec2 = protocol.generate("exp2", 202)
    pop = simulate.simulate_population(
        spec1, CLOSURE_PROFILE, 1000, seed=5
    ) + simulate.simulate_population(spec2, CLOSURE_PROFILE, 1000, seed=6)
    report = analysis.bias_report(
        pop, {spec1.spec_id: spec1, spec2.spec_id: spec2}
    )
    return spec1, spec2, report, time.perf_counter() - t0


def test_population_report_matches_profile(closure_population):
    spec1, spec2, report, dt = closure_population
    want_one, want_kiki = _expected_exp1_shares(spec1, CLOSURE_PROFILE)
    got_one = report["exp1"]["one_to_one_error_share"]
    got_kiki = report["exp1"]["no_reverse_share_of_kiki_errors"]
    devs = [
        ("one-to-one share", got_one, want_one),
        ("kiki no-reverse share", got_kiki, want_kiki),
    ]
    for cell, stats in report["exp2"]["me_consistency_by_cell"].items():
        k = int(cell.split(",")[0].split("=")[1])
        pool = int(cell.split("pool=")[1])
        want = CLOSURE_PROFILE.me_follow_probability(k, pool)
        devs.append((f"ME {cell}", stats["rate"], want))
    worst = max(abs(got - want) for _, got, want in devs)
    ok = worst <= 0.03 and dt < 120.0
    record(
        "pipeline closure (n=1000 per experiment)",
        ok,
        f"max deviation {100 * worst:.2f}pp across {len(devs)} proportions, "
        f"{dt:.1f}s",
    )
    for name, got, want in devs:
        assert abs(got - want) <= 0.03, (name, got, want)
    assert dt < 120.0


# ---------------------------------------------------------------------------
# 5. Regression recovery


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def test_regression_recovers_coefficients(closure_population):
    _, _, report, _ = closure_population
    rng = np.random.default_rng(42)
    true_beta = (-1.0, 0.9, 0.2)
    n = 5000
    contradict = rng.integers(0, 3, size=n)
    pool = rng.choice([2, 6], size=n)
    logits = true_beta[0] + true_beta[1] * contradict + true_beta[2] * pool
    y = rng.random(n) < _sigmoid(logits)
    fit = analysis.fit_logistic(
        np.column_stack([contradict, pool]), [bool(v) for v in y]
    )
    recovery_off = [
        abs(b - t) / se for b, t, se in zip(fit.beta, true_beta, fit.se)
    ]
    synth_ok = all(off < 2.0 for off in recovery_off)

    me = report["exp2"]["me_regression"]
    pop_ok = (
        "error" not in me
        and me["z"][1] > 2.0
        and me["z"][2] > 2.0
        and me["beta"][1] > 0
        and me["beta"][2] > 0
    )

    with pytest.raises(analysis.AnalysisError):
        analysis.fit_logistic([[0, 2], [1, 6], [2, 2]], [True, True, True])

    ok = synth_ok and pop_ok
    record(
        "logistic regression recovery",
        ok,
        f"synthetic n=5000 max |beta-true|/SE {max(recovery_off):.2f} (< 2); "
        f"population Z=({me.get('z', ['-', '-', '-'])[1]:.1f}, "
        f"{me.get('z', ['-', '-', '-'])[2]:.1f}) both positive; "
        "constant outcomes raise",
    )
    assert synth_ok, recovery_off
    assert pop_ok, me


# ---------------------------------------------------------------------------
# 6. Byte determinism


def _drive_service_session(svc) -> None:
    created = svc.create_session()
    sid, nonce = created["session_id"], created["nonce"]
    payload = created["next"]
    for _ in range(600):
        if payload["status"] == "done":
            break
        item = payload["item"]
        if payload["phase"] == "instructions":
            symbols = [c["id"] for c in payload["practice_target"]]
        else:
            symbols = [item["pool"][0]["id"]]
        svc.submit_response(sid, item["item_id"], symbols, nonce)
        payload = svc.next_item(sid, nonce)
    else:
        raise AssertionError("session did not finish")
    if payload.get("survey_pending"):
        svc.submit_survey(sid, False, nonce)


def _export_bytes(tmp_path, name: str) -> bytes:
    from daxlab import service

    config = service.ServerConfig(
        experiment="exp1",
        seed_policy="fixed",
        seed=7,
        data_dir=str(tmp_path / name),
    )
    svc = service.ExperimentService(config)
    _drive_service_session(svc)
    return jsonio.dumps(svc.export()).encode()


def test_byte_determinism(tmp_path):
    t0 = time.perf_counter()
    checks = []

    for exp in ("1", "2", "3"):
        a = tmp_path / f"spec{exp}a.json"
        b = tmp_path / f"spec{exp}b.json"
        assert cli_main(["gen-exp", "--exp", exp, "--seed", "9", "--out", str(a)]) == 0
        assert cli_main(["gen-exp", "--exp", exp, "--seed", "9", "--out", str(b)]) == 0
        checks.append((f"gen-exp exp{exp}", a.read_bytes() == b.read_bytes()))

    prof = tmp_path / "profile.json"
    jsonio.write(prof, simulate.profile_to_json(simulate.BiasProfile(p_correct=0.5)))
    sims = []
    for run in "ab":
        out = tmp_path / f"sessions_{run}.jsonl"
        assert cli_main([
            "simulate",
            "--spec", str(tmp_path / "spec1a.json"),
            "--profile", str(prof),
            "--n", "3",
            "--seed", "4",
            "--out", str(out),
        ]) == 0
        sims.append(out.read_bytes())
    checks.append(("simulate", sims[0] == sims[1]))

    cfg = tmp_path / "train.json"
    jsonio.write(
        cfg,
        {
            "model": {"layers": 1, "hidden": 8, "dropout": 0.1, "attention": True},
            "train": {"presentations": 40, "seed": 3},
        },
    )
    trained = []
    for run in "ab":
        out = tmp_path / f"params_{run}.bin"
        assert cli_main([
            "train",
            "--spec", str(tmp_path / "spec1a.json"),
            "--config", str(cfg),
            "--out", str(out),
        ]) == 0
        trained.append(out.read_bytes())
    checks.append(("train", trained[0] == trained[1]))

    checks.append(
        ("export", _export_bytes(tmp_path, "sa") == _export_bytes(tmp_path, "sb"))
    )

    dt = time.perf_counter() - t0
    bad = [name for name, same in checks if not same]
    ok = not bad
    record(
        "byte determinism",
        ok,
        f"{len(checks)} artifact pairs identical ({dt:.1f}s)"
        + ("" if ok else f"; differing: {bad}"),
    )
    assert not bad


# ---------------------------------------------------------------------------
# 7. Exclusion rules


def _wrong(item):
    # appending a symbol guarantees a length mismatch with the target
    return tuple(item.target) + (item.pool[0],)


def test_exclusion_rules():
    spec = protocol.generate("exp1", 11)
    catch_total = sum(
        1 for st in spec.stages for it in st.test if it.is_catch
    )
    assert catch_total >= 2

    outcomes = []
    for miss_n, want in [(0, False), (1, False), (2, True)]:
        base = simulate.make_responder(spec, simulate.BiasProfile(), seed=3)
        missed: set = set()

        def responder(item, phase, missed=missed, miss_n=miss_n, base=base):
            if phase == "test" and item.is_catch and len(missed) < miss_n:
                missed.add(item.item_id)
                return _wrong(item)
            return base(item, phase)

        session = protocol.drive_session(spec, responder, f"p{miss_n}")
        result = protocol.grade_session(session, spec)
        outcomes.append((miss_n, result))
        assert result.catch_missed == miss_n
        assert result.excluded is want
    assert "catch" in (outcomes[2][1].exclusion_reason or "")

    # quiz failure removes exactly that stage's test phase from the means
    target_stage = spec.stages[1].name
    base = simulate.make_responder(spec, simulate.BiasProfile(), seed=4)

    def quiz_flunker(item, phase):
        if phase == "study-quiz" and item.item_id.startswith(f"{target_stage}:"):
            return _wrong(item)
        return base(item, phase)

    session = protocol.drive_session(spec, quiz_flunker, "flunk")
    result = protocol.grade_session(session, spec)
    assert result.excluded is False
    for stage in spec.stages:
        assert result.stage_passed[stage.name] is (stage.name != target_stage)
    agg = protocol.aggregate([result])
    assert agg["per_stage"][target_stage]["n"] == 0
    others_ok = all(
        agg["per_stage"][st.name]["n"] == 1
        for st in spec.stages
        if st.name != target_stage
    )
    assert others_ok

    record(
        "exclusion rules",
        True,
        "0/1/2 missed catches -> kept/kept/excluded; failed quiz drops "
        "only its own stage from the aggregate",
    )


# ---------------------------------------------------------------------------
# 8. Seq2seq memorization without generalization (slow)


@pytest.mark.skipif(
    NUMPY_FALLBACK,
    reason="generalization sweep needs the compiled kernels for its time budget",
)
def test_models_memorize_but_fail_generalization():
    from daxlab.seq2seq import sweep

    t0 = time.perf_counter()
    spec = protocol.generate("exp1", 0)
    rows = sweep.run_generalization_experiment(spec)
    dt = time.perf_counter() - t0

    summary = sweep.summarize(rows)
    train_misses = [
        (e["architecture"], e["hidden"], e["mean_train_acc"])
        for e in summary
        if e["hidden"] >= 25 and e["mean_train_acc"] < 0.95
    ]
    test_misses = [
        (e["architecture"], e["hidden"], e["mean_test_acc"])
        for e in summary
        if e["mean_test_acc"] > 0.10
    ]
    n_seeds = len({r.seed for r in rows})
    big = [e["mean_train_acc"] for e in summary if e["hidden"] >= 25]
    ok = not train_misses and not test_misses and dt <= 1800.0
    record(
        "seq2seq memorizes but fails to generalize",
        ok,
        f"{len(summary)} architecture cells x {n_seeds} seeds: "
        f"min train acc (>=25 units) {min(big):.3f}, "
        f"max test acc {max(e['mean_test_acc'] for e in summary):.3f}, "
        f"{dt / 60:.1f} min",
    )
    assert not train_misses, train_misses
    assert not test_misses, test_misses
    assert dt <= 1800.0
