"""Experiment protocols: trial generation, quiz cycling, scoring, exclusion.

Three designs are generated from a seed:

* exp1 -- a four-stage curriculum.  Each of the first three stages
  teaches one function from two demonstrations (study phase with a
  cycling quiz), then tests generalization; the final stage combines
  functions.  One primitive plays the held-out role: it is studied only
  in isolation but appears in every test instruction.
* exp2 -- 14 independent judgment trials probing inductive biases:
  six mutual-exclusivity cells (0/1/2 contradictory examples x pool of
  2/6), three order-preservation trials with no concatenation
  demonstrations, three trials forcing a choice between mutual
  exclusivity and one-to-one, and two catch trials.  Words and colors
  are re-randomized for every trial.
* exp3 -- seven free-form instructions over a five-word roster, no
  study items, answered on a single page.

The exact stimulus strings of the original figures are not recoverable;
the templates here are reconstructions satisfying every stated
constraint and are marked as such in the README.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import grammar
from .grammar import (
    ColorSymbol,
    Functor,
    GrammarConfig,
    Instruction,
    Lexicon,
    OutputSeq,
    PALETTE,
)


class ProtocolError(Exception):
    pass


class NoTargetError(ProtocolError):
    """The item is free-form; exact-match scoring is undefined."""


class EmptyInputError(ProtocolError):
    pass


EXP1_CONFIG = GrammarConfig(allow_concat=False)

STAGE_NAMES = ("F1", "F2", "F3", "Composition")


@dataclass(frozen=True)
class Item:
    """A single study or test item."""

    item_id: str
    instruction: Instruction
    target: OutputSeq | None
    pool: tuple[ColorSymbol, ...]
    is_catch: bool = False
    meta: dict = field(default_factory=dict)

    def target_ids(self) -> list[str] | None:
        return None if self.target is None else [c.id for c in self.target]


@dataclass(frozen=True)
class StageSpec:
    name: str
    study: tuple[Item, ...]
    test: tuple[Item, ...]

    def quiz_items(self) -> tuple[Item, ...]:
        """Study items covered by the memory quiz (the non-primitives)."""
        return tuple(it for it in self.study if len(it.instruction) > 1)


@dataclass(frozen=True)
class Trial:
    index: int
    kind: str  # me | iconic | conflict | catch
    study: tuple[Item, ...]
    test: Item
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str  # exp1 | exp2 | exp3
    seed: int
    lexicon: Lexicon | None = None
    stages: tuple[StageSpec, ...] = ()
    trials: tuple[Trial, ...] = ()
    items: tuple[Item, ...] = ()
    word_roster: tuple[str, ...] = ()

    @property
    def spec_id(self) -> str:
        return f"{self.kind}-{self.seed}"

    def all_items(self) -> list[Item]:
        out: list[Item] = []
        for stage in self.stages:
            out.extend(stage.study)
            out.extend(stage.test)
        for trial in self.trials:
            out.extend(trial.study)
            out.append(trial.test)
        out.extend(self.items)
        return out

    def find_item(self, item_id: str) -> Item:
        for item in self.all_items():
            if item.item_id == item_id:
                return item
        raise KeyError(item_id)


@dataclass(frozen=True)
class ResponseRecord:
    item_id: str
    phase: str  # "study-quiz" | "test"
    response: OutputSeq
    cycle: int = 0
    timestamp: float = 0.0


@dataclass
class Session:
    participant_id: str
    experiment: str
    seed: int
    records: list[ResponseRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, record: ResponseRecord) -> None:
        if self.records and record.timestamp < self.records[-1].timestamp:
            raise ProtocolError("timestamps must be non-decreasing")
        self.records.append(record)


@dataclass
class ParticipantResult:
    participant_id: str
    experiment: str
    per_stage_accuracy: dict[str, float | None]
    stage_passed: dict[str, bool]
    catch_missed: int
    excluded: bool
    exclusion_reason: str | None = None


# ---------------------------------------------------------------------------
# Canonical item templates (reconstructions, not figure data).
#
# P1..P4 are primitive roles; P4 is the held-out primitive studied only
# in isolation.  F1/F2/F3 are the repeat-three, alternate, and
# reverse-concat words.  Study complexity tops out at five words / two
# compositions / four outputs; tests reach six words / three
# compositions / six outputs, and every test instruction contains P4.

_PRIM_STUDY = (("P1",), ("P2",), ("P3",), ("P4",))
_F1_DEMOS = (("P1", "F1"), ("P2", "F1"))
_F2_DEMOS = (("P1", "F2", "P2"), ("P3", "F2", "P1"))
_F3_DEMOS = (("P1", "F3", "P3"), ("P2", "F3", "P1"))
_COMPOSITION_DEMOS = (
    ("P1", "F1", "F3", "P2"),
    ("P3", "F3", "P1", "F2", "P2"),
    ("P2", "F2", "P3", "F3", "P1"),
    ("P2", "F3", "P3", "F1"),
)

_STAGE_STUDY = {
    "F1": _PRIM_STUDY + _F1_DEMOS,
    "F2": _PRIM_STUDY + _F2_DEMOS,
    "F3": _PRIM_STUDY + _F3_DEMOS,
    "Composition": _PRIM_STUDY + _F1_DEMOS + _F2_DEMOS + _F3_DEMOS + _COMPOSITION_DEMOS,
}

_STAGE_TESTS = {
    "F1": (("P4", "F1"),),
    "F2": (("P4", "F2", "P3"), ("P2", "F2", "P4")),
    "F3": (("P4", "F3", "P2"), ("P3", "F3", "P4")),
    "Composition": (
        ("P4", "F2", "P1", "F3", "P2", "F1"),
        ("P1", "F2", "P4", "F3", "P3"),
        ("P4", "F3", "P2", "F1"),
        ("P3", "F1", "F3", "P4"),
        ("P4", "F1", "F3", "P1", "F2", "P3"),
    ),
}


def generate_exp1(seed: int) -> ExperimentSpec:
    """Four-stage curriculum over a freshly randomized lexicon."""
    rng = random.Random(seed)
    lex = grammar.sample_lexicon(
        grammar.EXP1_WORD_POOL,
        grammar.palette_colors(6),
        n_primitives=4,
        seed=rng.randrange(2**32),
    )
    prims = list(lex.primitive_words)
    held_out = rng.choice(prims)
    prims.remove(held_out)
    role_words = {
        "P1": prims[0],
        "P2": prims[1],
        "P3": prims[2],
        "P4": held_out,
        "F1": lex.word_for(Functor.REPEAT3),
        "F2": lex.word_for(Functor.ALTERNATE),
        "F3": lex.word_for(Functor.REV_CONCAT),
    }
    pool = lex.color_pool

    def build(stage: str, phase: str, idx: int, template, is_catch=False) -> Item:
        words = tuple(role_words[r] for r in template)
        return Item(
            item_id=f"{stage}:{phase}:{idx}",
            instruction=words,
            target=grammar.interpret(words, lex, EXP1_CONFIG),
            pool=pool,
            is_catch=is_catch,
        )

    order = list(STAGE_NAMES[:3])
    rng.shuffle(order)
    order.append("Composition")

    stages = []
    for name in order:
        study = tuple(
            build(name, "study", i, t) for i, t in enumerate(_STAGE_STUDY[name])
        )
        tests = [
            build(name, "test", i, t) for i, t in enumerate(_STAGE_TESTS[name])
        ]
        n_catch = 2 if name == "Composition" else 1
        quizzable = [it for it in study if len(it.instruction) > 1]
        for c in range(n_catch):
            src = rng.choice(quizzable)
            tests.append(
                Item(
                    item_id=f"{name}:catch:{c}",
                    instruction=src.instruction,
                    target=src.target,
                    pool=pool,
                    is_catch=True,
                )
            )
        rng.shuffle(tests)
        stages.append(StageSpec(name=name, study=study, test=tuple(tests)))
    return ExperimentSpec(kind="exp1", seed=seed, lexicon=lex, stages=tuple(stages))


# ---------------------------------------------------------------------------
# Independent bias trials


class _WordDeck:
    """Deals pseudowords without cross-trial reuse until the pool runs out.

    Fourteen trials need more words than the pool holds, so the deck
    refills once exhausted; within a trial words are always distinct.
    """

    def __init__(self, pool: Sequence[str], rng: random.Random):
        self._pool = list(pool)
        self._rng = rng
        self._deck = list(pool)
        rng.shuffle(self._deck)

    def draw(self, n: int) -> list[str]:
        picked: list[str] = []
        for _ in range(n):
            if not self._deck:
                self._deck = [w for w in self._pool if w not in picked]
                self._rng.shuffle(self._deck)
            picked.append(self._deck.pop())
        return picked


ME_CELLS = tuple((k, p) for k in (0, 1, 2) for p in (2, 6))


def generate_exp2(seed: int) -> ExperimentSpec:
    """Fourteen independent trials with per-trial word/color randomization."""
    rng = random.Random(seed)
    deck = _WordDeck(grammar.FULL_WORD_POOL, rng)

    builders: list[Callable[[int], Trial]] = []
    for k, p in ME_CELLS:
        builders.append(lambda idx, k=k, p=p: _me_trial(idx, k, p, deck, rng))
    for form in ("pair", "triple", "swapped"):
        builders.append(lambda idx, form=form: _iconic_trial(idx, form, deck, rng))
    for _ in range(3):
        builders.append(lambda idx: _conflict_trial(idx, deck, rng))
    for _ in range(2):
        builders.append(lambda idx: _catch_trial(idx, deck, rng))
    rng.shuffle(builders)

    trials = tuple(make(idx) for idx, make in enumerate(builders))
    return ExperimentSpec(kind="exp2", seed=seed, trials=trials)


def _study_line(idx: int, i: int, word_seq, colors, pool) -> Item:
    return Item(
        item_id=f"T{idx}:study:{i}",
        instruction=tuple(word_seq),
        target=tuple(colors),
        pool=pool,
    )


def _me_trial(idx: int, n_contradictory: int, pool_size: int, deck, rng) -> Trial:
    familiar, novel = deck.draw(2)
    colors = tuple(rng.sample(PALETTE, pool_size))
    demo_color = colors[0]
    pool = list(colors)
    rng.shuffle(pool)
    pool = tuple(pool)
    study = [_study_line(idx, 0, [familiar], [demo_color], pool)]
    for i in range(n_contradictory):
        study.append(_study_line(idx, i + 1, [novel], [demo_color], pool))
    meta = {
        "kind": "me",
        "n_contradictory": n_contradictory,
        "pool_size": pool_size,
        "familiar_demo": demo_color.id,
        "novel_word": novel,
    }
    test = Item(
        item_id=f"T{idx}:test",
        instruction=(novel,),
        target=None,
        pool=pool,
        meta=meta,
    )
    return Trial(index=idx, kind="me", study=tuple(study), test=test, meta=meta)


def _iconic_trial(idx: int, form: str, deck, rng) -> Trial:
    n_words = 3 if form == "triple" else 2
    words = deck.draw(n_words)
    colors = tuple(rng.sample(PALETTE, 6))
    demo_colors = colors[:n_words]
    pool = list(colors)
    rng.shuffle(pool)
    pool = tuple(pool)
    study = [
        _study_line(idx, i, [w], [c], pool)
        for i, (w, c) in enumerate(zip(words, demo_colors))
    ]
    if form == "swapped":
        test_words = (words[1], words[0])
    else:
        test_words = tuple(words)
    demo_map = {w: c for w, c in zip(words, demo_colors)}
    target = tuple(demo_map[w] for w in test_words)
    meta = {
        "kind": "iconic",
        "form": form,
        "demos": {w: [demo_map[w].id] for w in words},
    }
    test = Item(
        item_id=f"T{idx}:test",
        instruction=test_words,
        target=target,
        pool=pool,
        meta=meta,
    )
    return Trial(index=idx, kind="iconic", study=tuple(study), test=test, meta=meta)


def _conflict_trial(idx: int, deck, rng) -> Trial:
    w1, w2, novel = deck.draw(3)
    colors = tuple(rng.sample(PALETTE, 2))
    pool = list(colors)
    rng.shuffle(pool)
    pool = tuple(pool)
    study = [
        _study_line(idx, 0, [w1], [colors[0]], pool),
        _study_line(idx, 1, [w2], [colors[1]], pool),
    ]
    meta = {
        "kind": "conflict",
        "assigned": [c.id for c in colors],
        "pool_size": 2,
        "novel_word": novel,
    }
    test = Item(
        item_id=f"T{idx}:test",
        instruction=(novel,),
        target=None,
        pool=pool,
        meta=meta,
    )
    return Trial(index=idx, kind="conflict", study=tuple(study), test=test, meta=meta)


def _catch_trial(idx: int, deck, rng) -> Trial:
    w1, w2 = deck.draw(2)
    colors = tuple(rng.sample(PALETTE, 6))
    pool = list(colors)
    rng.shuffle(pool)
    pool = tuple(pool)
    study = [
        _study_line(idx, 0, [w1], [colors[0]], pool),
        _study_line(idx, 1, [w2], [colors[1]], pool),
    ]
    meta = {"kind": "catch"}
    test = Item(
        item_id=f"T{idx}:test",
        instruction=(w1,),
        target=(colors[0],),
        pool=pool,
        is_catch=True,
        meta=meta,
    )
    return Trial(index=idx, kind="catch", study=tuple(study), test=test, meta=meta)


# ---------------------------------------------------------------------------
# Free-form responses

_EXP3_TEMPLATE = (
    ("W1",),
    ("W2",),
    ("W1", "W1"),
    ("W1", "W2"),
    ("W2", "W1"),
    ("W3",),
    ("W1", "W3"),
)


def generate_exp3(seed: int) -> ExperimentSpec:
    """Seven free-form instructions over a five-word roster."""
    rng = random.Random(seed)
    roster = tuple(rng.sample(grammar.FULL_WORD_POOL, 5))
    role_words = {"W1": roster[0], "W2": roster[1], "W3": roster[2]}
    pool = list(rng.sample(PALETTE, 6))
    rng.shuffle(pool)
    pool = tuple(pool)
    templates = list(_EXP3_TEMPLATE)
    rng.shuffle(templates)
    items = tuple(
        Item(
            item_id=f"item:{i}",
            instruction=tuple(role_words[r] for r in t),
            target=None,
            pool=pool,
        )
        for i, t in enumerate(templates)
    )
    return ExperimentSpec(
        kind="exp3", seed=seed, items=items, word_roster=roster
    )


def generate(kind: str, seed: int) -> ExperimentSpec:
    try:
        fn = {"exp1": generate_exp1, "exp2": generate_exp2, "exp3": generate_exp3}[kind]
    except KeyError:
        raise ProtocolError(f"unknown experiment kind: {kind!r}") from None
    return fn(seed)


# ---------------------------------------------------------------------------
# Scoring, quiz cycling, grading


def score_response(item: Item, response: Sequence[ColorSymbol]) -> bool:
    """Exact match: correct only if every symbol and the length agree."""
    if item.target is None:
        raise NoTargetError(item.item_id)
    return tuple(response) == item.target


Responder = Callable[[Item, str], OutputSeq]

QUIZ_MAX_CYCLES = 3


@dataclass(frozen=True)
class QuizAttempt:
    item: Item
    cycle: int
    response: OutputSeq
    correct: bool


@dataclass(frozen=True)
class QuizTranscript:
    attempts: tuple[QuizAttempt, ...]
    cycles_run: int
    passed: bool


def run_quiz(stage: StageSpec, responder: Responder) -> QuizTranscript:
    """Cycle through the covered study items until an all-correct cycle
    or the cycle cap is hit.  Corrective feedback (the expected answer)
    is part of each attempt record."""
    covered = stage.quiz_items()
    if not covered:
        raise ProtocolError(f"stage {stage.name} has no quizzable study items")
    attempts: list[QuizAttempt] = []
    for cycle in range(1, QUIZ_MAX_CYCLES + 1):
        all_correct = True
        for item in covered:
            response = tuple(responder(item, "study-quiz"))
            correct = score_response(item, response)
            attempts.append(QuizAttempt(item, cycle, response, correct))
            all_correct = all_correct and correct
        if all_correct:
            return QuizTranscript(tuple(attempts), cycle, True)
    return QuizTranscript(tuple(attempts), QUIZ_MAX_CYCLES, False)


def drive_session(
    spec: ExperimentSpec,
    responder: Responder,
    participant_id: str,
) -> Session:
    """Run a responder through a whole experiment, producing the same
    record stream a live session would."""
    session = Session(participant_id=participant_id, experiment=spec.kind, seed=spec.seed)
    clock = 0

    def record(item: Item, phase: str, response: OutputSeq, cycle: int = 0):
        nonlocal clock
        session.append(
            ResponseRecord(
                item_id=item.item_id,
                phase=phase,
                response=tuple(response),
                cycle=cycle,
                timestamp=clock,
            )
        )
        clock += 1

    if spec.kind == "exp1":
        for stage in spec.stages:
            transcript = run_quiz(stage, responder)
            for attempt in transcript.attempts:
                record(attempt.item, "study-quiz", attempt.response, attempt.cycle)
            for item in stage.test:
                record(item, "test", tuple(responder(item, "test")))
    else:
        for trial in spec.trials:
            record(trial.test, "test", tuple(responder(trial.test, "test")))
        for item in spec.items:
            record(item, "test", tuple(responder(item, "test")))
    return session


def _quiz_passed_from_records(stage: StageSpec, records: list[ResponseRecord]) -> bool:
    covered = {it.item_id: it for it in stage.quiz_items()}
    by_cycle: dict[int, dict[str, bool]] = {}
    for rec in records:
        if rec.phase != "study-quiz" or rec.item_id not in covered:
            continue
        ok = tuple(rec.response) == covered[rec.item_id].target
        by_cycle.setdefault(rec.cycle, {})[rec.item_id] = ok
    for cycle, results in by_cycle.items():
        if len(results) == len(covered) and all(results.values()):
            return True
    return False


def grade_session(session: Session, spec: ExperimentSpec) -> ParticipantResult:
    """Exact-match accuracies plus the two exclusion rules: two or more
    missed catch trials excludes the whole session; a failed study quiz
    excludes only that stage's test phase."""
    responses: dict[str, OutputSeq] = {}
    for rec in session.records:
        if rec.phase == "test":
            responses[rec.item_id] = tuple(rec.response)

    per_stage: dict[str, float | None] = {}
    stage_passed: dict[str, bool] = {}
    catch_missed = 0

    def check_catch(item: Item):
        nonlocal catch_missed
        resp = responses.get(item.item_id)
        if resp is None or resp != item.target:
            catch_missed += 1

    if spec.kind == "exp1":
        for stage in spec.stages:
            stage_passed[stage.name] = _quiz_passed_from_records(
                stage, session.records
            )
            scored = []
            for item in stage.test:
                if item.is_catch:
                    check_catch(item)
                    continue
                resp = responses.get(item.item_id, ())
                scored.append(1.0 if resp == item.target else 0.0)
            per_stage[stage.name] = sum(scored) / len(scored) if scored else None
    elif spec.kind == "exp2":
        scored = []
        for trial in spec.trials:
            item = trial.test
            if item.is_catch:
                check_catch(item)
            elif item.target is not None:
                resp = responses.get(item.item_id, ())
                scored.append(1.0 if resp == item.target else 0.0)
        per_stage["targeted"] = sum(scored) / len(scored) if scored else None

    excluded = False
    reason = None
    if catch_missed >= 2:
        excluded = True
        reason = f"missed {catch_missed} catch trials"
    elif session.meta.get("external_aid"):
        excluded = True
        reason = "reported using an external aid"
    return ParticipantResult(
        participant_id=session.participant_id,
        experiment=spec.kind,
        per_stage_accuracy=per_stage,
        stage_passed=stage_passed,
        catch_missed=catch_missed,
        excluded=excluded,
        exclusion_reason=reason,
    )


def aggregate(results: Sequence[ParticipantResult]) -> dict:
    """Mean accuracies after exclusions, plus a no-exclusions figure.

    Per-stage means use participants who are not session-excluded and
    passed that stage's quiz; the no-exclusions overall pools every
    stage accuracy of every participant.
    """
    if not results:
        raise EmptyInputError("no participant results")
    stage_names = sorted({s for r in results for s in r.per_stage_accuracy})
    per_stage = {}
    for name in stage_names:
        values = [
            r.per_stage_accuracy[name]
            for r in results
            if not r.excluded
            and r.per_stage_accuracy.get(name) is not None
            and r.stage_passed.get(name, True)
        ]
        per_stage[name] = {
            "mean_accuracy": sum(values) / len(values) if values else None,
            "n": len(values),
        }
    included = [v for v in (
        acc
        for r in results
        if not r.excluded
        for name, acc in r.per_stage_accuracy.items()
        if acc is not None and r.stage_passed.get(name, True)
    )]
    everything = [
        acc
        for r in results
        for acc in r.per_stage_accuracy.values()
        if acc is not None
    ]
    return {
        "n_participants": len(results),
        "n_excluded": sum(1 for r in results if r.excluded),
        "per_stage": per_stage,
        "overall_mean": sum(included) / len(included) if included else None,
        "overall_no_exclusions": (
            sum(everything) / len(everything) if everything else None
        ),
    }


# ---------------------------------------------------------------------------
# JSON wire formats


def item_to_json(item: Item) -> dict:
    return {
        "id": item.item_id,
        "instruction": list(item.instruction),
        "target": item.target_ids(),
        "pool": [grammar.color_to_json(c) for c in item.pool],
        "is_catch": item.is_catch,
        "meta": item.meta,
    }


def item_from_json(obj: dict) -> Item:
    pool = tuple(grammar.color_from_json(c) for c in obj["pool"])
    target = obj["target"]
    return Item(
        item_id=obj["id"],
        instruction=tuple(obj["instruction"]),
        target=None if target is None else grammar.output_from_json(target, pool),
        pool=pool,
        is_catch=obj["is_catch"],
        meta=obj.get("meta", {}),
    )


def spec_to_json(spec: ExperimentSpec) -> dict:
    doc: dict = {
        "format_version": 1,
        "kind": spec.kind,
        "seed": spec.seed,
    }
    if spec.lexicon is not None:
        doc["lexicon"] = grammar.lexicon_to_json(spec.lexicon)
    if spec.stages:
        doc["stages"] = [
            {
                "name": s.name,
                "study": [item_to_json(i) for i in s.study],
                "test": [item_to_json(i) for i in s.test],
            }
            for s in spec.stages
        ]
    if spec.trials:
        doc["trials"] = [
            {
                "index": t.index,
                "kind": t.kind,
                "study": [item_to_json(i) for i in t.study],
                "test": item_to_json(t.test),
                "meta": t.meta,
            }
            for t in spec.trials
        ]
    if spec.items:
        doc["items"] = [item_to_json(i) for i in spec.items]
    if spec.word_roster:
        doc["word_roster"] = list(spec.word_roster)
    return doc


def spec_from_json(obj: dict) -> ExperimentSpec:
    return ExperimentSpec(
        kind=obj["kind"],
        seed=obj["seed"],
        lexicon=(
            grammar.lexicon_from_json(obj["lexicon"]) if "lexicon" in obj else None
        ),
        stages=tuple(
            StageSpec(
                name=s["name"],
                study=tuple(item_from_json(i) for i in s["study"]),
                test=tuple(item_from_json(i) for i in s["test"]),
            )
            for s in obj.get("stages", [])
        ),
        trials=tuple(
            Trial(
                index=t["index"],
                kind=t["kind"],
                study=tuple(item_from_json(i) for i in t["study"]),
                test=item_from_json(t["test"]),
                meta=t.get("meta", {}),
            )
            for t in obj.get("trials", [])
        ),
        items=tuple(item_from_json(i) for i in obj.get("items", [])),
        word_roster=tuple(obj.get("word_roster", [])),
    )


def session_to_json(session: Session) -> dict:
    return {
        "format_version": 1,
        "participant_id": session.participant_id,
        "experiment": session.experiment,
        "seed": session.seed,
        "meta": session.meta,
        "records": [
            {
                "item_id": r.item_id,
                "phase": r.phase,
                "cycle": r.cycle,
                "response": grammar.output_to_json(r.response),
                "timestamp": r.timestamp,
            }
            for r in session.records
        ],
    }


def session_from_json(obj: dict) -> Session:
    session = Session(
        participant_id=obj["participant_id"],
        experiment=obj["experiment"],
        seed=obj["seed"],
        meta=obj.get("meta", {}),
    )
    for r in obj["records"]:
        session.records.append(
            ResponseRecord(
                item_id=r["item_id"],
                phase=r["phase"],
                cycle=r.get("cycle", 0),
                response=grammar.output_from_json(r["response"], PALETTE),
                timestamp=r["timestamp"],
            )
        )
    return session


def spec_for_session(session: Session) -> ExperimentSpec:
    return generate(session.experiment, session.seed)
