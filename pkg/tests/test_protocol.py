"""Tests for experiment generation, quiz cycling, scoring, and exclusion."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daxlab import grammar, protocol
from daxlab.grammar import Functor
from daxlab.jsonio import dumps
from daxlab.protocol import (
    EXP1_CONFIG,
    EmptyInputError,
    Item,
    NoTargetError,
    QUIZ_MAX_CYCLES,
    aggregate,
    drive_session,
    generate,
    generate_exp1,
    generate_exp2,
    generate_exp3,
    grade_session,
    run_quiz,
    score_response,
    session_from_json,
    session_to_json,
    spec_for_session,
    spec_from_json,
    spec_to_json,
)

SEEDS = [0, 1, 7, 42]


def held_out_primitive(spec):
    """The primitive studied only in isolation."""
    lex = spec.lexicon
    in_demos = set()
    for stage in spec.stages:
        for item in stage.study:
            if len(item.instruction) > 1:
                in_demos.update(w for w in item.instruction if lex.is_primitive(w))
    rest = set(lex.primitive_words) - in_demos
    assert len(rest) == 1
    return rest.pop()


# ---------------------------------------------------------------------------
# Curriculum structure


@pytest.mark.parametrize("seed", SEEDS)
def test_exp1_stage_layout(seed):
    spec = generate_exp1(seed)
    names = [s.name for s in spec.stages]
    assert sorted(names[:3]) == ["F1", "F2", "F3"]
    assert names[3] == "Composition"
    by_name = {s.name: s for s in spec.stages}
    for name in ("F1", "F2", "F3"):
        assert len(by_name[name].study) == 6
    assert len(by_name["Composition"].study) == 14


@pytest.mark.parametrize("seed", SEEDS)
def test_exp1_held_out_in_every_test(seed):
    spec = generate_exp1(seed)
    held = held_out_primitive(spec)
    for stage in spec.stages:
        for item in stage.test:
            if not item.is_catch:
                assert held in item.instruction


@pytest.mark.parametrize("seed", SEEDS)
def test_exp1_tests_need_more_than_held_out_swap(seed):
    # beyond the held-out primitive, each test still differs from every
    # study item in at least one more word (F1 tests excepted: only one
    # argument slot exists)
    spec = generate_exp1(seed)
    held = held_out_primitive(spec)
    study_all = {
        item.instruction for stage in spec.stages for item in stage.study
    }
    wildcard = object()
    masked_study = {
        tuple(wildcard if w == held else w for w in instr) for instr in study_all
    }
    for stage in spec.stages:
        if stage.name == "F1":
            continue
        for item in stage.test:
            if item.is_catch:
                continue
            masked = tuple(
                wildcard if w == held else w for w in item.instruction
            )
            assert masked not in masked_study, item.instruction


@pytest.mark.parametrize("seed", SEEDS)
def test_exp1_targets_follow_grammar(seed):
    spec = generate_exp1(seed)
    for item in spec.all_items():
        assert item.target == grammar.interpret(
            item.instruction, spec.lexicon, EXP1_CONFIG
        )
        assert set(item.target) <= set(item.pool)
        assert len(item.pool) == 6


@pytest.mark.parametrize("seed", SEEDS)
def test_exp1_complexity_bounds(seed):
    spec = generate_exp1(seed)
    lex = spec.lexicon
    six_word = comp3 = six_out = 0
    for stage in spec.stages:
        for item in stage.study:
            tree = grammar.parse(item.instruction, lex, EXP1_CONFIG)
            assert len(item.instruction) <= 5
            assert grammar.count_compositions(tree) <= 2
            assert len(item.target) <= 4
        for item in stage.test:
            if item.is_catch:
                continue
            tree = grammar.parse(item.instruction, lex, EXP1_CONFIG)
            six_word += len(item.instruction) == 6
            comp3 += grammar.count_compositions(tree) == 3
            six_out += len(item.target) == 6
    assert six_word >= 1 and comp3 >= 1 and six_out >= 1


@pytest.mark.parametrize("seed", SEEDS)
def test_exp1_catch_items_duplicate_study(seed):
    spec = generate_exp1(seed)
    for stage in spec.stages:
        catches = [it for it in stage.test if it.is_catch]
        expected = 2 if stage.name == "Composition" else 1
        assert len(catches) == expected
        study_pairs = {(it.instruction, it.target) for it in stage.study}
        for c in catches:
            assert (c.instruction, c.target) in study_pairs
            assert len(c.instruction) > 1


def test_exp1_randomizes_across_seeds():
    docs = {dumps(spec_to_json(generate_exp1(s))) for s in range(12)}
    assert len(docs) == 12


# ---------------------------------------------------------------------------
# Independent bias trials


@pytest.mark.parametrize("seed", SEEDS)
def test_exp2_trial_census(seed):
    spec = generate_exp2(seed)
    kinds = [t.kind for t in spec.trials]
    assert len(spec.trials) == 14
    assert kinds.count("me") == 6
    assert kinds.count("iconic") == 3
    assert kinds.count("conflict") == 3
    assert kinds.count("catch") == 2
    cells = sorted(
        (t.meta["n_contradictory"], t.meta["pool_size"])
        for t in spec.trials
        if t.kind == "me"
    )
    assert cells == sorted(protocol.ME_CELLS)


@pytest.mark.parametrize("seed", SEEDS)
def test_exp2_me_trial_structure(seed):
    spec = generate_exp2(seed)
    for t in spec.trials:
        if t.kind != "me":
            continue
        k = t.meta["n_contradictory"]
        assert len(t.study) == 1 + k
        familiar = t.study[0]
        demo_color = familiar.target[0]
        assert t.meta["familiar_demo"] == demo_color.id
        novel = t.test.instruction[0]
        assert novel != familiar.instruction[0]
        for line in t.study[1:]:
            assert line.instruction == (novel,)
            assert line.target == (demo_color,)
        assert t.test.target is None
        assert len(t.test.pool) == t.meta["pool_size"]
        assert demo_color in t.test.pool


@pytest.mark.parametrize("seed", SEEDS)
def test_exp2_iconic_targets_concatenate_demos(seed):
    spec = generate_exp2(seed)
    forms = set()
    for t in spec.trials:
        if t.kind != "iconic":
            continue
        forms.add(t.meta["form"])
        demo = {it.instruction[0]: it.target[0] for it in t.study}
        assert t.test.target == tuple(demo[w] for w in t.test.instruction)
        assert len(t.test.pool) == 6
        if t.meta["form"] == "swapped":
            studied = [it.instruction[0] for it in t.study]
            assert list(t.test.instruction) == list(reversed(studied))
        if t.meta["form"] == "triple":
            assert len(t.test.instruction) == 3
    assert forms == {"pair", "triple", "swapped"}


@pytest.mark.parametrize("seed", SEEDS)
def test_exp2_conflict_and_catch(seed):
    spec = generate_exp2(seed)
    for t in spec.trials:
        if t.kind == "conflict":
            assert len(t.test.pool) == 2
            assigned = {it.target[0] for it in t.study}
            assert assigned == set(t.test.pool)
            assert t.test.instruction[0] not in {
                it.instruction[0] for it in t.study
            }
            assert t.test.target is None
        if t.kind == "catch":
            assert t.test.is_catch
            match = [
                it for it in t.study if it.instruction == t.test.instruction
            ]
            assert len(match) == 1
            assert t.test.target == match[0].target


@pytest.mark.parametrize("seed", SEEDS)
def test_exp2_words_fresh_until_pool_exhausted(seed):
    spec = generate_exp2(seed)
    seen: list[str] = []
    for t in spec.trials:
        trial_words = []
        for item in list(t.study) + [t.test]:
            for w in item.instruction:
                if w not in trial_words:
                    trial_words.append(w)
        assert len(set(trial_words)) == len(trial_words)
        seen.extend(trial_words)
    pool_size = len(grammar.FULL_WORD_POOL)
    assert len(set(seen[:pool_size])) == pool_size


def test_exp2_per_trial_color_randomization():
    # demo colors across trials should not all coincide
    spec = generate_exp2(seed=5)
    first_colors = {
        t.study[0].target[0].id for t in spec.trials if t.study
    }
    assert len(first_colors) > 1


# ---------------------------------------------------------------------------
# Free-form instructions


@pytest.mark.parametrize("seed", SEEDS)
def test_exp3_layout(seed):
    spec = generate_exp3(seed)
    assert len(spec.items) == 7
    assert len(set(spec.word_roster)) == 5
    used = {w for it in spec.items for w in it.instruction}
    assert len(used) == 3
    assert used <= set(spec.word_roster)
    w1, w2, w3 = spec.word_roster[:3]
    shapes = sorted(" ".join(it.instruction) for it in spec.items)
    expected = sorted(
        [w1, w2, w3, f"{w1} {w1}", f"{w1} {w2}", f"{w2} {w1}", f"{w1} {w3}"]
    )
    assert shapes == expected
    for it in spec.items:
        assert it.target is None
        assert len(it.pool) == 6


@pytest.mark.parametrize("kind", ["exp1", "exp2", "exp3"])
def test_generate_dispatch_and_determinism(kind):
    a = dumps(spec_to_json(generate(kind, 123)))
    b = dumps(spec_to_json(generate(kind, 123)))
    assert a == b


def test_generate_unknown_kind():
    with pytest.raises(protocol.ProtocolError):
        generate("exp9", 0)


@pytest.mark.parametrize("kind", ["exp1", "exp2", "exp3"])
def test_spec_json_round_trip(kind):
    spec = generate(kind, 99)
    doc = spec_to_json(spec)
    assert dumps(spec_to_json(spec_from_json(doc))) == dumps(doc)


# ---------------------------------------------------------------------------
# Scoring and the quiz


def _pool():
    return grammar.palette_colors(6)


def test_score_response_exact_match():
    pool = _pool()
    item = Item("x", ("dax",), (pool[0], pool[1]), pool)
    assert score_response(item, (pool[0], pool[1]))
    assert not score_response(item, (pool[1], pool[0]))
    assert not score_response(item, (pool[0],))
    assert not score_response(item, (pool[0], pool[1], pool[1]))


def test_score_response_without_target():
    item = Item("x", ("dax",), None, _pool())
    with pytest.raises(NoTargetError):
        score_response(item, ())


def test_quiz_passes_first_cycle():
    stage = generate_exp1(0).stages[0]
    transcript = run_quiz(stage, lambda item, phase: item.target)
    assert transcript.passed
    assert transcript.cycles_run == 1
    assert len(transcript.attempts) == len(stage.quiz_items())
    assert all(a.correct for a in transcript.attempts)


def test_quiz_recovers_on_second_cycle():
    stage = generate_exp1(0).stages[0]
    calls = {"n": 0}

    def responder(item, phase):
        calls["n"] += 1
        if calls["n"] == 1:
            return ()
        return item.target

    transcript = run_quiz(stage, responder)
    assert transcript.passed
    assert transcript.cycles_run == 2
    assert not transcript.attempts[0].correct


def test_quiz_gives_up_after_cap():
    stage = generate_exp1(0).stages[0]
    transcript = run_quiz(stage, lambda item, phase: ())
    assert not transcript.passed
    assert transcript.cycles_run == QUIZ_MAX_CYCLES
    assert len(transcript.attempts) == QUIZ_MAX_CYCLES * len(stage.quiz_items())


# ---------------------------------------------------------------------------
# End-to-end grading


def test_grade_perfect_session():
    spec = generate_exp1(3)
    session = drive_session(spec, lambda item, phase: item.target, "p0")
    result = grade_session(session, spec)
    assert all(v == 1.0 for v in result.per_stage_accuracy.values())
    assert all(result.stage_passed.values())
    assert result.catch_missed == 0
    assert not result.excluded


@pytest.mark.parametrize("n_missed,expect_excluded", [(0, False), (1, False), (2, True)])
def test_catch_exclusion_threshold(n_missed, expect_excluded):
    spec = generate_exp1(3)
    state = {"missed": 0}

    def responder(item, phase):
        if item.is_catch and state["missed"] < n_missed:
            state["missed"] += 1
            return ()
        return item.target

    session = drive_session(spec, responder, "p")
    result = grade_session(session, spec)
    assert result.catch_missed == n_missed
    assert result.excluded is expect_excluded


def test_quiz_failure_excludes_only_that_stage():
    spec = generate_exp1(3)
    failed_stage = spec.stages[1].name

    def responder(item, phase):
        if phase == "study-quiz" and item.item_id.startswith(failed_stage + ":"):
            return ()
        return item.target

    session = drive_session(spec, responder, "p")
    result = grade_session(session, spec)
    assert result.stage_passed[failed_stage] is False
    assert not result.excluded
    others = [n for n in result.stage_passed if n != failed_stage]
    assert all(result.stage_passed[n] for n in others)

    agg = aggregate([result])
    assert agg["per_stage"][failed_stage]["n"] == 0
    for name in others:
        assert agg["per_stage"][name]["n"] == 1


def test_external_aid_exclusion():
    spec = generate_exp3(1)
    session = drive_session(spec, lambda item, phase: (item.pool[0],), "p")
    session.meta["external_aid"] = True
    result = grade_session(session, spec)
    assert result.excluded
    assert "external aid" in result.exclusion_reason


def test_exp2_grading_counts_catches_and_targeted():
    spec = generate_exp2(4)

    def responder(item, phase):
        if item.target is not None:
            return item.target
        return (item.pool[0],)

    session = drive_session(spec, responder, "p")
    result = grade_session(session, spec)
    assert result.catch_missed == 0
    assert result.per_stage_accuracy["targeted"] == 1.0

    def flubber(item, phase):
        return ()

    bad = grade_session(drive_session(spec, flubber, "q"), spec)
    assert bad.catch_missed == 2
    assert bad.excluded
    assert bad.per_stage_accuracy["targeted"] == 0.0


def test_aggregate_requires_input():
    with pytest.raises(EmptyInputError):
        aggregate([])


def test_aggregate_no_exclusion_overall_pools_everyone():
    spec = generate_exp1(3)
    good = grade_session(
        drive_session(spec, lambda i, p: i.target, "a"), spec
    )
    bad = grade_session(
        drive_session(spec, lambda i, p: (), "b"), spec
    )
    agg = aggregate([good, bad])
    assert agg["n_excluded"] == 1
    assert agg["overall_mean"] == 1.0
    assert agg["overall_no_exclusions"] == 0.5


# ---------------------------------------------------------------------------
# Sessions as data


def test_session_json_round_trip():
    spec = generate_exp1(8)
    session = drive_session(spec, lambda i, p: i.target, "p9")
    doc = session_to_json(session)
    again = session_from_json(doc)
    assert dumps(session_to_json(again)) == dumps(doc)
    direct = grade_session(session, spec)
    via_json = grade_session(again, spec)
    assert direct == via_json


def test_spec_for_session_rebuilds_spec():
    spec = generate_exp2(21)
    session = drive_session(
        spec, lambda i, p: i.target or (i.pool[0],), "p"
    )
    rebuilt = spec_for_session(session)
    assert dumps(spec_to_json(rebuilt)) == dumps(spec_to_json(spec))


def test_session_rejects_time_travel():
    session = protocol.Session("p", "exp1", 0)
    session.append(
        protocol.ResponseRecord("a", "test", (), timestamp=5.0)
    )
    with pytest.raises(protocol.ProtocolError):
        session.append(
            protocol.ResponseRecord("b", "test", (), timestamp=4.0)
        )


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_exp1_invariants_hold_across_seeds(seed):
    spec = generate_exp1(seed)
    held = held_out_primitive(spec)
    n_catch = 0
    for stage in spec.stages:
        for item in stage.test:
            if item.is_catch:
                n_catch += 1
            else:
                assert held in item.instruction
    assert n_catch == 5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_exp2_cell_grid_holds_across_seeds(seed):
    spec = generate_exp2(seed)
    cells = sorted(
        (t.meta["n_contradictory"], t.meta["pool_size"])
        for t in spec.trials
        if t.kind == "me"
    )
    assert cells == sorted(protocol.ME_CELLS)
