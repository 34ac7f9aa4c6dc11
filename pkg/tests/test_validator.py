import itertools
import textwrap

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oopspec.model import (
    Attribute,
    ClassDecl,
    ExerciseAssignment,
    FunctionExample,
    Inheritance,
    MethodBehavior,
    ObjectSnapshot,
    Severity,
    State,
    StateTransitionRules,
    Transition,
)
from oopspec.parser import parse
from oopspec.validator import (
    RULE_CODES,
    Member,
    RuleConfig,
    UnknownStateError,
    check_transition_consistency,
    has_errors,
    infer_common_members,
    load_config,
    parse_config,
    validate,
)
from seeds import SEED_CONFIG, SEEDED, STATE_CHANGE, algorithmic, f06
from strategies import assignments, rule_sets, snapshots, valid_assignments


def codes(source: str, config: RuleConfig | None = None) -> set[str]:
    return {d.rule for d in validate(parse(source), config)}


def test_seeds_cover_every_rule():
    assert set(SEEDED) == set(RULE_CODES)


@pytest.mark.parametrize("code", RULE_CODES)
def test_seeded_violation_yields_exactly_its_code(code):
    assert codes(SEEDED[code], SEED_CONFIG.get(code)) == {code}


def test_clean_base_cases():
    assert codes(algorithmic(2)) == set()
    assert codes(STATE_CHANGE.format(after="Account")) == set()
    assert codes(f06("Planned", "Assigned")) == set()


@pytest.mark.parametrize("count,fires", [(0, True), (1, True), (2, False), (3, False)])
def test_v1_boundary(count, fires):
    source = algorithmic(count) if count else (
        'assignment "a" { algorithmic "x" { function f(int[], int[]) returns int[] } }')
    assert ("V1" in codes(source)) is fires


def test_withdraw_name_is_l1_warning():
    diags = validate(parse(algorithmic(2, name="withdraw")))
    l1 = [d for d in diags if d.rule == "L1"]
    assert len(l1) == 1 and l1[0].severity is Severity.WARNING


def test_empty_assignment_is_clean():
    assert validate(ExerciseAssignment("empty")) == []


def test_corpus_has_no_errors(corpus):
    diags = validate(corpus)
    assert not has_errors(diags)
    assert {(d.rule, d.diagram) for d in diags} == {("L1", "withdraw"), ("L3", "withdraw")}


def test_diagnostic_format():
    diag = validate(parse(algorithmic(1), "one.oops"))[0]
    assert diag.format() == f"one.oops:1:{diag.span.start_col}: [V1] error: function diagram needs at least 2 examples, has 1"


def test_rule_ref_to_wrong_kind_is_v5():
    source = """assignment "a" {
      algorithmic "x" { function f(int) returns int
        example { in: 1 out: 2 * } example { in: 2 out: 3 } rule_ref "c" }
      class "c" { class K {} } }"""
    diags = validate(parse(source))
    assert [d.rule for d in diags] == ["V5"]
    assert "class diagram" in diags[0].message


def test_state_tag_without_rule_ref_is_v10():
    source = f06("Planned", "Assigned").replace('rule_ref "life"', "")
    assert codes(source) == {"V10"}


def test_undeclared_state_tag_is_v10_not_v6():
    assert codes(f06("Planned", "Archived")) == {"V10"}


def test_unchanged_state_change_without_result_is_v3():
    source = """assignment "a" { state_change "m" { function f(Box)
      example { before: Box { n: 1 } in: Box { n: 1 } after: Box { n: 2 } }
      example { before: Box { n: 1 } in: Box { n: 1 } after: Box { n: 1 } } } }"""
    assert codes(source) == {"V3"}


def test_hidden_field_in_tagged_snapshot_warns():
    source = f06("Planned", "Assigned").replace('Task@Planned { description: "x" }',
                                                'Task@Planned { description: "x", employee: "Ana" }', 1)
    diags = validate(parse(source))
    assert [(d.rule, d.severity) for d in diags] == [("V10", Severity.WARNING)]


def test_off_and_overrides():
    src = algorithmic(2, name="withdraw")
    assert codes(src, RuleConfig(severity={"L1": "off", "L3": "off"})) == set()
    raised = validate(parse(src), RuleConfig(severity={"L1": "error"}))
    assert {d.rule: d.severity for d in raised}["L1"] is Severity.ERROR


def test_strict_promotes_warnings():
    diags = validate(parse(algorithmic(2, name="withdraw")), RuleConfig(strict=True))
    assert diags and all(d.severity is Severity.ERROR for d in diags)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(assignments())
def test_strictness_is_monotone(a):
    normal = validate(a)
    strict = validate(a, RuleConfig(strict=True))
    assert len(normal) == len(strict)
    for d, s in zip(normal, strict):
        assert (d.rule, d.message, d.span) == (s.rule, s.message, s.span)
        assert s.severity.rank >= d.severity.rank


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(assignments())
def test_validate_is_deterministic(a):
    assert [d.format() for d in validate(a)] == [d.format() for d in validate(a)]


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(valid_assignments())
def test_generated_valid_assignments_are_error_free(a):
    assert not has_errors(validate(a))


# -- configuration ------------------------------------------------------------


def test_parse_config_keys():
    cfg = parse_config(textwrap.dedent("""
        # course policy
        strict = true
        obfuscation_pattern = "q\\d+"
        max_note_words = 5
        L3 = off
        severity.V1 = warning
        descriptive_stems = get, put
    """))
    assert cfg.strict and cfg.obfuscation_pattern == r"q\d+" and cfg.max_note_words == 5
    assert cfg.severity == {"L3": "off", "V1": "warning"}
    assert cfg.descriptive_stems == ("get", "put")


@pytest.mark.parametrize("text", ["bogus = 1", "L1 = loud", "strict = maybe", "max_note_words = -1",
                                  "obfuscation_pattern = ''"])
def test_parse_config_rejects(text):
    with pytest.raises(ValueError):
        parse_config(text)


def test_load_config(tmp_path):
    assert load_config(tmp_path) == RuleConfig()
    (tmp_path / "oopspec.toml").write_text("max_note_words = 3\n", encoding="utf-8")
    assert load_config(tmp_path).max_note_words == 3


# -- transitions --------------------------------------------------------------


def _task(state: str) -> ObjectSnapshot:
    return ObjectSnapshot("Task", (), state)


@pytest.fixture
def lifecycle(corpus) -> StateTransitionRules:
    return corpus.diagram("task-lifecycle")


def test_planned_to_assigned_is_ok(lifecycle):
    assert check_transition_consistency(FunctionExample(before=(_task("Planned"),), after=(_task("Assigned"),)),
                                        lifecycle) is None


def test_identity_failure_case_is_ok(lifecycle):
    ex = FunctionExample(output=None, before=(_task("Planned"),), after=(_task("Planned"),))
    assert check_transition_consistency(ex, lifecycle) is None


def test_created_to_assigned_is_a_violation(lifecycle):
    v = check_transition_consistency(FunctionExample(before=(_task("Created"),), after=(_task("Assigned"),)),
                                     lifecycle)
    assert v is not None and (v.source, v.target) == ("Created", "Assigned")
    assert "Created" in v.description and "Assigned" in v.description


def test_unknown_state_raises(lifecycle):
    with pytest.raises(UnknownStateError):
        check_transition_consistency(FunctionExample(before=(_task("Lost"),), after=(_task("Created"),)), lifecycle)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_identity_pairs_always_pass(data):
    rules = data.draw(rule_sets())
    names = [s.name for s in rules.states]
    pairs = data.draw(st.lists(snapshots(tags=st.sampled_from(names)), min_size=1, max_size=4))
    assert check_transition_consistency(FunctionExample(before=tuple(pairs), after=tuple(pairs)), rules) is None


@settings(max_examples=200, deadline=None)
@given(rule_sets(), st.data())
def test_declared_transitions_pass(rules, data):
    if not rules.transitions:
        return
    t = data.draw(st.sampled_from(rules.transitions))
    ex = FunctionExample(before=(_task(t.source),), after=(_task(t.target),))
    assert check_transition_consistency(ex, rules) is None


# -- inheritance ----------------------------------------------------------------


def _cls(name, attrs, methods=()):
    return ClassDecl(name, tuple(Attribute(a, t) for a, t in attrs), (), tuple(MethodBehavior(m) for m in methods))


MANAGER = _cls("Manager", [("name", None), ("salary", "int"), ("bonus", "int")])
TECH = _cls("ITTechnician", [("name", None), ("salary", "int"), ("certifications", "int")])


def test_manager_technician_common_attributes():
    found = infer_common_members(Inheritance("h", (MANAGER, TECH)))
    assert found == {Member("name", "attribute"), Member("salary", "attribute")}


def test_disjoint_classes_share_nothing_and_warn():
    a, b = _cls("A", [("x", None)]), _cls("B", [("y", None)])
    assert infer_common_members([a, b]) == frozenset()
    diags = validate(ExerciseAssignment("a", None, (Inheritance("h", (a, b)),)))
    assert [(d.rule, d.severity) for d in diags] == [("V7", Severity.WARNING)]


def test_identical_classes_share_everything():
    make = lambda n: _cls(n, [("x", "int"), ("y", None)], ["run"])  # noqa: E731
    found = infer_common_members([make("A"), make("B"), make("C")])
    assert found == {Member("x", "attribute"), Member("y", "attribute"), Member("run", "method")}


def test_conflicting_types_are_not_common():
    a, b = _cls("A", [("x", "int")]), _cls("B", [("x", "String")])
    assert infer_common_members([a, b]) == frozenset()


def test_untyped_matches_any_type():
    a, b, c = _cls("A", [("x", None)]), _cls("B", [("x", "int")]), _cls("C", [("x", "int")])
    assert infer_common_members([a, b, c]) == {Member("x", "attribute")}


def test_fewer_than_two_classes_raises():
    with pytest.raises(ValueError):
        infer_common_members([MANAGER])


def test_corpus_inheritance(corpus):
    found = infer_common_members(corpus.diagram("manager-technician"))
    assert {m.name for m in found if m.kind == "attribute"} == {"name", "salary"}
    assert Member("f1", "method") in found


@pytest.mark.parametrize("order", list(itertools.permutations(range(3))))
def test_inference_is_permutation_invariant(order):
    extra = _cls("Intern", [("name", "String"), ("salary", None), ("school", None)])
    classes = [MANAGER, TECH, extra]
    assert infer_common_members([classes[i] for i in order]) == infer_common_members(classes)


def test_state_order_does_not_matter_for_rules():
    a = StateTransitionRules("s", (State("A"), State("B")), (Transition("A", "B", "go"),))
    b = StateTransitionRules("s", (State("B"), State("A")), (Transition("A", "B", "go"),))
    assert a.allows("A", "B") and b.allows("A", "B") and not a.allows("B", "A")
