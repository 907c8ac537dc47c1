from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_split, sized_split
from slmadapt.data_core import Provenance
from slmadapt.errors import ValidationError
from slmadapt.mixtures import (
    InitFrom,
    MissingAnswers,
    MixtureEntry,
    PlanValidationError,
    Role,
    SplitRef,
    Strategy,
    TrainingPlan,
    TrainingStage,
    load_plan,
    plan_m1,
    plan_m2,
    plan_m3,
    save_plan,
    stage_examples,
    validate_plan,
)


@pytest.fixture(scope="module")
def table_sizes():
    orig = sized_split("original", 13092)
    phi = sized_split("phi", 33000, provenance=Provenance.SYNTHETIC, generator_id="phi")
    llama = sized_split("llama", 4000, provenance=Provenance.SYNTHETIC, generator_id="llama")
    return orig, phi, llama


def test_m1(table_sizes):
    plan = plan_m1(table_sizes[0])
    assert plan.strategy is Strategy.M1_BASELINE
    assert [(s.instances, s.epochs, s.init_from) for s in plan.stages] == [(13092, 4, InitFrom.BASE_MODEL)]


def test_m2_chain(table_sizes):
    orig, phi, _ = table_sizes
    plan = plan_m2(orig, phi)
    assert [(s.instances, s.epochs) for s in plan.stages] == [(13092, 2), (33000, 2)]
    assert [s.init_from for s in plan.stages] == [InitFrom.BASE_MODEL, InitFrom.PREVIOUS_STAGE]
    assert validate_plan(plan).ok
    assert plan.total_epochs == 4


def test_m3_union(table_sizes):
    orig, phi, llama = table_sizes
    plan = plan_m3(orig, [phi, llama])
    assert len(plan.stages) == 1
    stage = plan.stages[0]
    assert (stage.instances, stage.epochs) == (50092, 4)
    # original first, synthetic sets by name
    assert [m.split.name for m in stage.mixture] == ["original", "llama", "phi"]
    assert plan_m3(orig, [llama, phi]) == plan


def test_m3_without_synthetic_is_custom(table_sizes):
    assert plan_m3(table_sizes[0], []).strategy is Strategy.CUSTOM


def test_m3_rejects_duplicate_names():
    orig = sized_split("o", 5)
    a = sized_split("s", 5, provenance=Provenance.SYNTHETIC, generator_id="x")
    with pytest.raises(ValidationError):
        plan_m3(orig, [a, a])


def test_m2_permuted_stages_fail(table_sizes):
    orig, phi, _ = table_sizes
    plan = plan_m2(orig, phi)
    s1, s2 = plan.stages
    swapped = replace(plan, stages=(replace(s2, stage_index=1, init_from=InitFrom.BASE_MODEL),
                                    replace(s1, stage_index=2, init_from=InitFrom.PREVIOUS_STAGE)))
    report = validate_plan(swapped)
    assert not report.ok
    assert any("stage 1 must train on original" in v for v in report.violations)


def test_broken_chain_is_reported(table_sizes):
    orig, phi, _ = table_sizes
    plan = plan_m2(orig, phi)
    broken = replace(plan, stages=(plan.stages[0], replace(plan.stages[1], init_from=InitFrom.BASE_MODEL)))
    assert any("broken stage chain" in v for v in validate_plan(broken).violations)


def test_m1_on_synthetic_rejected():
    synth = sized_split("s", 5, provenance=Provenance.SYNTHETIC, generator_id="x")
    with pytest.raises(PlanValidationError) as info:
        plan_m1(synth)
    assert info.value.exit_code == 1


def test_held_out_split_cannot_be_mixed():
    held = make_split("t2", {"c": ("पाठ", [("प्रश्न?", None)])}, answered=False)
    with pytest.raises(MissingAnswers):
        plan_m1(held)


def test_plan_serialization_round_trip(tmp_path, table_sizes):
    orig, phi, llama = table_sizes
    for plan in (plan_m1(orig, seed=3), plan_m2(orig, phi, resume_from="ckpt"), plan_m3(orig, [phi, llama])):
        again = load_plan(save_plan(plan, tmp_path / f"{plan.plan_id}.json"))
        assert again == plan
        assert again.digest() == plan.digest()


def test_stage_examples_checks_digest_and_shuffles_deterministically():
    orig = sized_split("original", 12)
    plan = plan_m1(orig, seed=5)
    ex1 = stage_examples(plan.stages[0], {"original": orig}, plan.seed)
    ex2 = stage_examples(plan.stages[0], {"original": orig}, plan.seed)
    assert ex1 == ex2
    assert sorted(p.pair_id for _, p in ex1) == sorted(p.pair_id for p in orig.pairs)
    assert [p.pair_id for _, p in ex1] != [p.pair_id for p in orig.pairs]
    with pytest.raises(ValidationError):
        stage_examples(plan.stages[0], {"original": sized_split("original", 11)}, 5)
    with pytest.raises(ValidationError):
        stage_examples(plan.stages[0], {}, 5)


# --- fuzzing against an independent checker ---------------------------------

_ROLES = list(Role)


@st.composite
def _plans(draw):
    stages = []
    for pos in range(1, draw(st.integers(0, 3)) + 1):
        entries = tuple(
            MixtureEntry(SplitRef(f"s{pos}{k}", "d", draw(st.sampled_from(_ROLES))), draw(st.integers(0, 3)))
            for k in range(draw(st.integers(0, 3)))
        )
        idx = pos if draw(st.booleans()) else draw(st.integers(0, 4))
        init = draw(st.sampled_from(list(InitFrom)))
        stages.append(TrainingStage(idx, entries, draw(st.integers(0, 3)), init))
    return TrainingPlan("p", draw(st.sampled_from(list(Strategy))), tuple(stages))


def _independent_ok(plan: TrainingPlan) -> bool:
    st_ = plan.stages
    if not st_:
        return False
    for i, s in enumerate(st_):
        if s.stage_index != i + 1 or s.epochs <= 0 or not s.mixture:
            return False
        if s.init_from != (InitFrom.BASE_MODEL if i == 0 else InitFrom.PREVIOUS_STAGE):
            return False
        if any(m.instances <= 0 for m in s.mixture):
            return False
    roles = [[m.split.role for m in s.mixture] for s in st_]
    if plan.strategy is Strategy.M1_BASELINE:
        return len(st_) == 1 and roles[0] == [Role.ORIGINAL]
    if plan.strategy is Strategy.M2_CONTINUED:
        return len(st_) == 2 and set(roles[0]) == {Role.ORIGINAL} and set(roles[1]) == {Role.SYNTHETIC}
    if plan.strategy is Strategy.M3_MULTISOURCE:
        r = roles[0]
        return len(st_) == 1 and r.count(Role.ORIGINAL) == 1 and Role.SYNTHETIC in r and Role.MIXED not in r
    return True


@settings(max_examples=500, deadline=None)
@given(_plans())
def test_validator_agrees_with_independent_checker(plan):
    report = validate_plan(plan)
    assert report.ok == _independent_ok(plan), report.violations
    if not report.ok:
        assert report.violations
