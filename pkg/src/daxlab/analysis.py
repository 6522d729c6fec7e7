"""Response classifiers for the three inductive biases, plus the
logistic model relating mutual-exclusivity consistency to the amount of
counter-evidence and the size of the response pool.

Bias checks implemented here:

* one-to-one: response has one symbol per instruction word, with every
  primitive slot carrying that primitive's color (function slots are
  free, and repeated function words may differ).
* iconic concatenation without reversal: on instructions containing the
  reverse-concat word, the response matches a variant grammar where the
  two arguments are concatenated in surface order.
* mutual exclusivity: a novel word's response differs, as an exact
  sequence, from the familiar word's demonstrated output.

Free-form sessions are explained by a segmentation model: each word
gets a nonempty color subsequence and in-order concatenation must
reproduce every response.  The regression is a plain fixed-effects logistic fit
by iteratively reweighted least squares; participant-level random
effects are out of scope, so coefficients for real populations would
differ slightly from a mixed model's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import grammar, protocol
from .grammar import ColorSymbol, GrammarConfig, Lexicon, OutputSeq
from .protocol import EXP1_CONFIG, ExperimentSpec, Item, Session


class AnalysisError(Exception):
    pass


class SeparationError(AnalysisError):
    """Likelihood is unbounded; a coefficient ran away."""


class DegenerateDesignError(AnalysisError):
    """Design matrix is singular or outcomes carry no information."""


# ---------------------------------------------------------------------------
# Per-response classifiers


def classify_one_to_one(
    instruction: Sequence[str],
    response: Sequence[ColorSymbol],
    lex: Lexicon,
) -> bool:
    """True iff the response replaces each word with exactly one symbol
    and every primitive slot carries its own color."""
    words = grammar.as_words(instruction)
    if len(response) != len(words):
        return False
    for word, symbol in zip(words, response):
        if lex.is_primitive(word) and symbol != lex.color_of(word):
            return False
    return True


def classify_kiki_no_reverse(
    instruction: Sequence[str],
    response: Sequence[ColorSymbol],
    lex: Lexicon,
    cfg: GrammarConfig = EXP1_CONFIG,
) -> bool | None:
    """True iff the response matches the forward-concatenation variant.

    None when the instruction has no reverse-concat word, so the
    variant cannot be distinguished from the grammar itself.
    """
    words = grammar.as_words(instruction)
    rev_word = lex.word_for(grammar.Functor.REV_CONCAT)
    if rev_word is None or rev_word not in words:
        return None
    try:
        tree = grammar.parse(words, lex, cfg)
    except grammar.GrammarError:
        return None
    forward = grammar.evaluate(tree, lex, cfg, kiki_reverses=False)
    return tuple(response) == forward


def classify_me(item: Item, response: Sequence[ColorSymbol]) -> bool | None:
    """True iff the response differs from the familiar demonstration as
    an exact sequence.  None for items without one."""
    demo_id = item.meta.get("familiar_demo")
    if demo_id is None:
        return None
    return [c.id for c in response] != [demo_id]


# ---------------------------------------------------------------------------
# Segmentation models for free-form responses

SegmentationModel = dict[str, OutputSeq]


def infer_segmentation(
    responses: Mapping[Sequence[str], Sequence[ColorSymbol]],
) -> SegmentationModel | None:
    """Search for per-word nonempty subsequences whose concatenation
    reproduces every response.

    Exhaustive recursive splitting with a memo on dead states.  When
    several models fit, the one with the smallest total assigned length
    wins; remaining ties go to the model whose length vector, read in
    word first-appearance order, is lexicographically least.
    """
    items = [
        (tuple(grammar.as_words(instr)), tuple(resp))
        for instr, resp in responses.items()
    ]
    if not items:
        raise AnalysisError("no responses to segment")

    word_order: list[str] = []
    for words, _ in items:
        for w in words:
            if w not in word_order:
                word_order.append(w)

    dead: set[tuple] = set()
    solutions: list[SegmentationModel] = []

    def state_key(idx: int, bound: dict[str, OutputSeq]) -> tuple:
        return idx, tuple(sorted((w, s) for w, s in bound.items()))

    def match(words, resp, pos, i, bound):
        # split resp[pos:] across words[i:], honoring bindings
        if i == len(words):
            return [dict(bound)] if pos == len(resp) else []
        word = words[i]
        out = []
        if word in bound:
            seg = bound[word]
            if resp[pos : pos + len(seg)] == seg:
                out.extend(match(words, resp, pos + len(seg), i + 1, bound))
            return out
        remaining = len(words) - i - 1
        max_len = len(resp) - pos - remaining
        for length in range(1, max_len + 1):
            bound[word] = resp[pos : pos + length]
            out.extend(match(words, resp, pos + length, i + 1, bound))
            del bound[word]
        return out

    def search(idx: int, bound: dict[str, OutputSeq]):
        if idx == len(items):
            solutions.append(dict(bound))
            return
        key = state_key(idx, bound)
        if key in dead:
            return
        words, resp = items[idx]
        found = False
        for extended in match(words, resp, 0, 0, dict(bound)):
            found = True
            search(idx + 1, extended)
        if not found:
            dead.add(key)

    search(0, {})
    if not solutions:
        return None

    def rank(model: SegmentationModel):
        total = sum(len(s) for s in model.values())
        vector = tuple(len(model[w]) for w in word_order)
        return (total, vector)

    best = min(solutions, key=rank)
    for words, resp in items:
        joined = tuple(c for w in words for c in best[w])
        assert joined == resp, "segmentation model failed re-concatenation"
    return best


def check_me_on_model(model: SegmentationModel) -> bool:
    """True iff no two words share an assigned subsequence."""
    seqs = list(model.values())
    return len(seqs) == len(set(seqs))


# ---------------------------------------------------------------------------
# Logistic regression (IRLS)

MAX_ITERATIONS = 100
STEP_TOLERANCE = 1e-8
SEPARATION_BOUND = 30.0


@dataclass(frozen=True)
class LogisticFit:
    names: tuple[str, ...]
    beta: tuple[float, ...]
    se: tuple[float, ...]
    z: tuple[float, ...]
    p: tuple[float, ...]
    converged: bool
    iterations: int
    n: int

    def to_json(self) -> dict:
        return {
            "predictors": list(self.names),
            "beta": list(self.beta),
            "se": list(self.se),
            "z": list(self.z),
            "p": list(self.p),
            "converged": self.converged,
            "iterations": self.iterations,
            "n": self.n,
        }


def _normal_sf2(z: float) -> float:
    """Two-sided p-value for a standard normal statistic."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def fit_logistic(
    X: Sequence[Sequence[float]],
    y: Sequence[bool],
    names: Sequence[str] = ("n_contradictory", "pool_size"),
) -> LogisticFit:
    """Maximum-likelihood logistic fit with intercept via IRLS.

    Standard errors come from the inverse observed information at the
    optimum.  Raises Separation when any coefficient escapes a fixed
    bound and DegenerateDesign when the outcomes are constant or the
    design is singular.
    """
    Xmat = np.asarray(X, dtype=np.float64)
    if Xmat.ndim != 2 or Xmat.shape[0] == 0:
        raise DegenerateDesignError("empty design")
    yvec = np.asarray([1.0 if v else 0.0 for v in y], dtype=np.float64)
    if yvec.shape[0] != Xmat.shape[0]:
        raise DegenerateDesignError("X and y length mismatch")
    if np.all(yvec == yvec[0]):
        raise DegenerateDesignError("all outcomes identical")
    if len(names) != Xmat.shape[1]:
        raise DegenerateDesignError("predictor name count mismatch")
    design = np.column_stack([np.ones(Xmat.shape[0]), Xmat])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise DegenerateDesignError("design matrix is rank deficient")

    beta = np.zeros(design.shape[1])
    converged = False
    iterations = 0
    info = None
    for iterations in range(1, MAX_ITERATIONS + 1):
        eta = design @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = mu * (1.0 - mu)
        grad = design.T @ (yvec - mu)
        info = design.T @ (design * w[:, None])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            raise SeparationError(
                "information matrix became singular (separated data)"
            ) from None
        beta = beta + step
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise SeparationError(
                f"coefficient exceeded {SEPARATION_BOUND}; data are separable"
            )
        if np.max(np.abs(step)) < STEP_TOLERANCE:
            converged = True
            break

    eta = design @ beta
    mu = 1.0 / (1.0 + np.exp(-eta))
    w = mu * (1.0 - mu)
    info = design.T @ (design * w[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise SeparationError("information matrix singular at optimum") from None
    se = np.sqrt(np.diag(cov))
    z = beta / se
    p = np.array([_normal_sf2(v) for v in z])
    all_names = ("intercept",) + tuple(names)
    return LogisticFit(
        names=all_names,
        beta=tuple(float(b) for b in beta),
        se=tuple(float(s) for s in se),
        z=tuple(float(v) for v in z),
        p=tuple(float(v) for v in p),
        converged=converged,
        iterations=iterations,
        n=int(yvec.shape[0]),
    )


# ---------------------------------------------------------------------------
# Report assembly


def _spec_for(session: Session, specs: Mapping[str, ExperimentSpec]) -> ExperimentSpec:
    key = f"{session.experiment}-{session.seed}"
    if key not in specs:
        raise AnalysisError(f"no spec provided for session {key}")
    return specs[key]


def _test_responses(session: Session) -> dict[str, OutputSeq]:
    return {
        r.item_id: tuple(r.response)
        for r in session.records
        if r.phase == "test"
    }


def regression_rows(
    sessions: Iterable[Session],
    specs: Mapping[str, ExperimentSpec],
) -> list[dict]:
    """One row per ME-trial response: predictors plus both outcome codings."""
    rows = []
    for session in sessions:
        spec = _spec_for(session, specs)
        if spec.kind != "exp2":
            continue
        responses = _test_responses(session)
        for trial in spec.trials:
            if trial.kind != "me":
                continue
            resp = responses.get(trial.test.item_id)
            if resp is None:
                continue
            consistent = classify_me(trial.test, resp)
            rows.append(
                {
                    "participant_id": session.participant_id,
                    "trial": trial.test.item_id,
                    "n_contradictory": trial.meta["n_contradictory"],
                    "pool_size": trial.meta["pool_size"],
                    "me_consistent": bool(consistent),
                    "me_violated": not consistent,
                }
            )
    return rows


def _exp1_report(pairs: list[tuple[Session, ExperimentSpec]]) -> dict:
    results = [protocol.grade_session(s, spec) for s, spec in pairs]
    n_errors = 0
    n_one_to_one = 0
    n_kiki_errors = 0
    n_no_reverse = 0
    for (session, spec), result in zip(pairs, results):
        if result.excluded:
            continue
        responses = _test_responses(session)
        for stage in spec.stages:
            if not result.stage_passed.get(stage.name, False):
                continue
            for item in stage.test:
                if item.is_catch:
                    continue
                resp = responses.get(item.item_id)
                if resp is None or resp == item.target:
                    continue
                n_errors += 1
                if classify_one_to_one(item.instruction, resp, spec.lexicon):
                    n_one_to_one += 1
                verdict = classify_kiki_no_reverse(
                    item.instruction, resp, spec.lexicon
                )
                if verdict is not None:
                    n_kiki_errors += 1
                    if verdict:
                        n_no_reverse += 1
    report = {
        "n_sessions": len(pairs),
        "n_excluded": sum(1 for r in results if r.excluded),
        "accuracy": protocol.aggregate(results) if results else None,
        "n_errors": n_errors,
        "one_to_one_error_share": (
            n_one_to_one / n_errors if n_errors else None
        ),
        "kiki_errors": n_kiki_errors,
        "no_reverse_share_of_kiki_errors": (
            n_no_reverse / n_kiki_errors if n_kiki_errors else None
        ),
    }
    return report


def _exp2_report(pairs: list[tuple[Session, ExperimentSpec]]) -> dict:
    cell_counts: dict[tuple[int, int], list[int]] = {
        cell: [0, 0] for cell in protocol.ME_CELLS
    }
    iconic: dict[str, list[int]] = {}
    conflict_multi = [0, 0]
    catch_ok = [0, 0]
    sessions = [s for s, _ in pairs]
    specs = {spec.spec_id: spec for _, spec in pairs}
    for session, spec in pairs:
        responses = _test_responses(session)
        for trial in spec.trials:
            resp = responses.get(trial.test.item_id)
            if resp is None:
                continue
            if trial.kind == "me":
                cell = (trial.meta["n_contradictory"], trial.meta["pool_size"])
                cell_counts[cell][1] += 1
                if classify_me(trial.test, resp):
                    cell_counts[cell][0] += 1
            elif trial.kind == "iconic":
                bucket = iconic.setdefault(trial.meta["form"], [0, 0])
                bucket[1] += 1
                bucket[0] += resp == trial.test.target
            elif trial.kind == "conflict":
                conflict_multi[1] += 1
                conflict_multi[0] += len(resp) > 1
            elif trial.kind == "catch":
                catch_ok[1] += 1
                catch_ok[0] += resp == trial.test.target
    rows = regression_rows(sessions, specs)
    fit_doc: dict | None
    try:
        fit = fit_logistic(
            [[r["n_contradictory"], r["pool_size"]] for r in rows],
            [r["me_violated"] for r in rows],
        )
        fit_doc = fit.to_json()
    except AnalysisError as exc:
        fit_doc = {"error": type(exc).__name__, "detail": str(exc)}
    return {
        "n_sessions": len(pairs),
        "me_consistency_by_cell": {
            f"contradictory={k},pool={p}": {
                "consistent": c[0],
                "n": c[1],
                "rate": c[0] / c[1] if c[1] else None,
            }
            for (k, p), c in sorted(cell_counts.items())
        },
        "iconic_accuracy_by_form": {
            form: {"correct": b[0], "n": b[1], "rate": b[0] / b[1] if b[1] else None}
            for form, b in sorted(iconic.items())
        },
        "conflict_multi_element_rate": (
            conflict_multi[0] / conflict_multi[1] if conflict_multi[1] else None
        ),
        "catch_accuracy": catch_ok[0] / catch_ok[1] if catch_ok[1] else None,
        "me_regression": fit_doc,
    }


def _exp3_report(pairs: list[tuple[Session, ExperimentSpec]]) -> dict:
    n_model = n_me = n_none = 0
    for session, spec in pairs:
        responses = _test_responses(session)
        table = {}
        for item in spec.items:
            resp = responses.get(item.item_id)
            if resp:
                table[item.instruction] = resp
        model = infer_segmentation(table) if table else None
        if model is None:
            n_none += 1
        else:
            n_model += 1
            n_me += check_me_on_model(model)
    n = len(pairs)
    return {
        "n_sessions": n,
        "segmentation_model_found": n_model,
        "iconic_rate": n_model / n if n else None,
        "me_given_model": n_me / n_model if n_model else None,
        "full_bias": n_me,
        "iconic_only": n_model - n_me,
        "no_model": n_none,
    }


def bias_report(
    sessions: Iterable[Session],
    specs: Mapping[str, ExperimentSpec] | None = None,
) -> dict:
    """Bias-consistency summary across any mix of session kinds."""
    sessions = list(sessions)
    if specs is None:
        specs = {}
        for s in sessions:
            key = f"{s.experiment}-{s.seed}"
            if key not in specs:
                specs[key] = protocol.spec_for_session(s)
    grouped: dict[str, list[tuple[Session, ExperimentSpec]]] = {}
    for s in sessions:
        grouped.setdefault(s.experiment, []).append((s, _spec_for(s, specs)))
    report: dict = {"n_sessions": len(sessions)}
    if "exp1" in grouped:
        report["exp1"] = _exp1_report(grouped["exp1"])
    if "exp2" in grouped:
        report["exp2"] = _exp2_report(grouped["exp2"])
    if "exp3" in grouped:
        report["exp3"] = _exp3_report(grouped["exp3"])
    return report
