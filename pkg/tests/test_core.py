import pytest
from hypothesis import given, strategies as st

from qsaliency.core import (
    ActionDistribution,
    Combiner,
    DegenerateRemainderError,
    NoCommonActionsError,
    PolicyValueProfile,
    QProfile,
    Status,
    baseline_greydanus,
    baseline_iyer,
    combine,
    derive_policy_value,
    kl_divergence,
    rem_distribution,
    restrict_to_common_actions,
    sarfa_score,
    similarity,
    softmax_selected,
)

from reference_impl import ref_sarfa


def profile(state, **qs):
    return QProfile.from_mapping(state, qs)


def dist(**ps):
    return ActionDistribution(tuple(ps.items()))


# ---------------------------------------------------------------- QProfile

def test_qprofile_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        QProfile("s", (("a", 1.0), ("a", 2.0)))


def test_qprofile_rejects_empty():
    with pytest.raises(ValueError, match="at least one"):
        QProfile("s", ())


def test_qprofile_rejects_nonfinite():
    with pytest.raises(ValueError, match="non-finite"):
        QProfile("s", (("a", float("nan")),))
    with pytest.raises(ValueError, match="non-finite"):
        QProfile("s", (("a", float("inf")),))


def test_action_distribution_invariants():
    with pytest.raises(ValueError, match="sum"):
        ActionDistribution((("a", 0.5), ("b", 0.6)))
    with pytest.raises(ValueError, match="positive"):
        ActionDistribution((("a", 1.0), ("b", 0.0)))


# ------------------------------------------------ restrict_to_common_actions

def test_restrict_identical_sets():
    q1 = profile("s", a=1, b=0)
    q2 = profile("sp", a=2, b=1)
    r1, r2, removed = restrict_to_common_actions(q1, q2, "a")
    assert r1.entries == (("a", 1.0), ("b", 0.0))
    assert r2.entries == (("a", 2.0), ("b", 1.0))
    assert removed is False


def test_restrict_drops_missing_and_flags_selected():
    q1 = profile("s", a=1, b=0, c=5)
    q2 = profile("sp", a=2, b=1)
    r1, r2, removed = restrict_to_common_actions(q1, q2, "c")
    assert r1.actions == ("a", "b")
    assert r2.actions == ("a", "b")
    assert removed is True


def test_restrict_disjoint_errors():
    with pytest.raises(NoCommonActionsError):
        restrict_to_common_actions(profile("s", a=1), profile("sp", b=1), "a")


# --------------------------------------------------------- softmax_selected

def test_softmax_two_way_symmetry():
    assert softmax_selected(profile("s", a=0, b=0), "a") == pytest.approx(0.5)


def test_softmax_example_value():
    # e/(1+e), frozen from the independent scalar script.
    assert softmax_selected(profile("s", a=1, b=0), "a") == pytest.approx(
        0.7310585786300049, abs=1e-12
    )


@pytest.mark.parametrize("c", [-3.0, 0.0, 7.5])
def test_softmax_three_way_symmetry(c):
    assert softmax_selected(profile("s", a=c, b=c, d=c), "a") == pytest.approx(1 / 3)


def test_softmax_missing_action():
    with pytest.raises(ValueError, match="not in profile"):
        softmax_selected(profile("s", a=0.0), "z")


# --------------------------------------------------------- rem_distribution

def test_rem_equal_remainder():
    d = rem_distribution(profile("s", a=9, b=2, c=2), "a")
    assert d.p("b") == pytest.approx(0.5)
    assert d.p("c") == pytest.approx(0.5)


def test_rem_example_value():
    d = rem_distribution(profile("s", a=0, b=1, c=0), "a")
    assert d.p("b") == pytest.approx(0.7310585786300049, abs=1e-12)
    assert d.p("c") == pytest.approx(0.2689414213699951, abs=1e-12)


def test_rem_single_remaining():
    d = rem_distribution(profile("s", a=5, b=7), "a")
    assert d.probs == (("b", 1.0),)


def test_rem_degenerate():
    with pytest.raises(DegenerateRemainderError):
        rem_distribution(profile("s", a=5), "a")


# ------------------------------------------------------------ kl_divergence

def test_kl_identity():
    d = dist(b=0.5, c=0.5)
    assert kl_divergence(d, d) == 0.0


def test_kl_example_value():
    p_pert = dist(b=0.5, c=0.5)
    p_orig = dist(b=0.7310585786300049, c=0.2689414213699951)
    assert kl_divergence(p_pert, p_orig) == pytest.approx(0.12011450695827758, abs=1e-12)
    # The coarser documented rounding still holds at 1e-4.
    assert kl_divergence(p_pert, p_orig) == pytest.approx(0.12013, abs=1e-4)


def test_kl_degenerate_point():
    d = dist(b=1.0)
    assert kl_divergence(d, d) == 0.0


def test_kl_support_mismatch():
    with pytest.raises(ValueError, match="support"):
        kl_divergence(dist(b=1.0), dist(c=1.0))


# --------------------------------------------------------------- similarity

def test_similarity_values():
    assert similarity(0.0) == 1.0
    assert similarity(1.0) == 0.5
    assert similarity(0.12011450695827758) == pytest.approx(0.892765867942864, abs=1e-12)
    assert similarity(0.12013) == pytest.approx(0.89276, abs=1e-4)


def test_similarity_negative_rejected():
    with pytest.raises(ValueError, match="negative"):
        similarity(-0.1)


# -------------------------------------------------------------- sarfa_score

def test_sarfa_identity_perturbation_is_zero():
    q = profile("s", a=3, b=1, c=-2)
    b = sarfa_score(q, profile("sp", a=3, b=1, c=-2), "a")
    assert b.score == 0.0
    assert b.delta_p == 0.0
    assert b.kl == 0.0
    assert b.k_sim == 1.0


def test_sarfa_two_action_example():
    b = sarfa_score(profile("s", a=1, b=0), profile("sp", a=0, b=0), "a")
    assert b.status is Status.SCORED
    assert b.delta_p == pytest.approx(0.2310585786300049, abs=1e-12)
    assert b.kl == 0.0
    assert b.k_sim == 1.0
    # Frozen from the independent scalar script; documented rounding at 1e-4.
    assert b.score == pytest.approx(0.3753819398052376, abs=1e-12)
    assert b.score == pytest.approx(0.37543, abs=1e-4)


def test_sarfa_three_action_example():
    b = sarfa_score(profile("s", a=2, b=1, c=0), profile("sp", a=2, b=1, c=1), "a")
    assert b.delta_p == pytest.approx(0.08912407100899278, abs=1e-10)
    assert b.kl == pytest.approx(0.12011450695827758, abs=1e-10)
    assert b.k_sim == pytest.approx(0.892765867942864, abs=1e-10)
    assert b.score == pytest.approx(0.1620689355344258, abs=1e-10)
    assert b.score == pytest.approx(0.16208, abs=1e-4)


def test_sarfa_negative_delta_clamps_to_zero():
    b = sarfa_score(profile("s", a=0, b=0), profile("sp", a=1, b=0), "a")
    assert b.delta_p < 0
    assert b.score == 0.0


def test_sarfa_matches_reference_implementation():
    q_orig = {"a": 1.7, "b": -0.3, "c": 4.2, "d": 0.0}
    q_pert = {"a": 0.9, "b": 0.1, "c": 3.8, "d": -1.0}
    b = sarfa_score(QProfile.from_mapping("s", q_orig), QProfile.from_mapping("sp", q_pert), "c")
    dp, kl, k, score = ref_sarfa(q_orig, q_pert, "c")
    assert b.delta_p == pytest.approx(dp, abs=1e-12)
    assert b.kl == pytest.approx(kl, abs=1e-12)
    assert b.score == pytest.approx(score, abs=1e-12)


def test_sarfa_selected_removed():
    # Selected move vanished from the perturbed state: maximal disruption.
    q_orig = profile("s", a=1, b=0, c=0)
    q_pert = profile("sp", b=0, c=0)
    b = sarfa_score(q_orig, q_pert, "a")
    assert b.status is Status.ACTION_REMOVED
    assert b.delta_p == pytest.approx(softmax_selected(q_orig, "a"), abs=1e-12)
    assert b.kl == 0.0
    assert b.score > 0


def test_sarfa_degenerate_remainder():
    # Only the selected action survives the intersection.
    b = sarfa_score(profile("s", a=1, b=0), profile("sp", a=1, z=0), "a")
    assert b.status is Status.DEGENERATE_REM
    assert b.k_sim == 1.0
    assert b.kl is None
    assert b.score == 0.0


def test_sarfa_no_overlap_raises():
    with pytest.raises(NoCommonActionsError):
        sarfa_score(profile("s", a=1), profile("sp", b=1), "a")


# ------------------------------------------------------------------ combine

def test_combine_arithmetic():
    assert combine(0.5, 0.5, Combiner.ARITHMETIC_MEAN) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "mode",
    [
        Combiner.HARMONIC,
        Combiner.ARITHMETIC_MEAN,
        Combiner.GEOMETRIC_MEAN,
        Combiner.MINIMUM,
        Combiner.DP_ONLY,
    ],
)
def test_combine_zero_dp_gates_all_modes_except_k_only(mode):
    assert combine(0.0, 0.7, mode) == 0.0


def test_combine_k_only_ignores_dp():
    assert combine(0.0, 0.7, Combiner.K_ONLY) == 0.7


def test_combine_geometric_example():
    assert combine(0.2310585786300049, 1.0, Combiner.GEOMETRIC_MEAN) == pytest.approx(
        0.48068552987374696, abs=1e-12
    )
    assert combine(0.23106, 1.0, Combiner.GEOMETRIC_MEAN) == pytest.approx(0.48068, abs=1e-4)


def test_combine_harmonic_matches_sarfa_path():
    q_orig = profile("s", a=2, b=1, c=0)
    q_pert = profile("sp", a=2, b=1, c=1)
    b = sarfa_score(q_orig, q_pert, "a")
    assert combine(b.delta_p, b.k_sim, Combiner.HARMONIC) == pytest.approx(b.score, abs=1e-15)


# ---------------------------------------------------------------- baselines

def test_iyer_examples():
    assert baseline_iyer(profile("s", a=1, b=2), profile("sp", a=1, b=2), "a") == 0.0
    assert baseline_iyer(profile("s", a=3), profile("sp", a=1), "a") == 2.0
    assert baseline_iyer(profile("s", a=1), profile("sp", a=3), "a") == -2.0


def test_greydanus_examples():
    pv1 = derive_policy_value(profile("s", a=1, b=0))
    assert baseline_greydanus(pv1, pv1, "policy") == 0.0
    assert baseline_greydanus(pv1, pv1, "value") == 0.0

    opposite = PolicyValueProfile(
        policy=ActionDistribution((("a", 1.0 - 1e-12), ("b", 1e-12))), value=0.0
    )
    mirrored = PolicyValueProfile(
        policy=ActionDistribution((("a", 1e-12), ("b", 1.0 - 1e-12))), value=0.0
    )
    assert baseline_greydanus(opposite, mirrored, "policy") == pytest.approx(1.0)

    v1 = PolicyValueProfile(policy=ActionDistribution((("a", 1.0),)), value=2.0)
    v2 = PolicyValueProfile(policy=ActionDistribution((("a", 1.0),)), value=5.0)
    assert baseline_greydanus(v1, v2, "value") == 4.5


def test_greydanus_support_mismatch():
    pv1 = derive_policy_value(profile("s", a=1, b=0))
    pv2 = derive_policy_value(profile("sp", a=1, z=0))
    with pytest.raises(ValueError, match="support"):
        baseline_greydanus(pv1, pv2, "policy")


# ------------------------------------------------------- derive_policy_value

def test_derive_policy_value_examples():
    pv = derive_policy_value(profile("s", a=1, b=1), temperature=1.0)
    assert pv.policy.p("a") == pytest.approx(0.5)
    assert pv.value == 1.0

    pv = derive_policy_value(profile("s", a=1, b=0), temperature=1.0)
    assert pv.policy.p("a") == pytest.approx(0.7310585786300049, abs=1e-12)
    assert pv.policy.p("b") == pytest.approx(0.2689414213699951, abs=1e-12)
    assert pv.value == 1.0


def test_derive_policy_value_high_temperature_flattens():
    pv = derive_policy_value(profile("s", a=1, b=0), temperature=1e9)
    assert pv.policy.p("a") == pytest.approx(0.5, abs=1e-6)


def test_derive_policy_value_bad_temperature():
    with pytest.raises(ValueError, match="temperature"):
        derive_policy_value(profile("s", a=1), temperature=0.0)


# ----------------------------------------------------- light property checks

finite_q = st.floats(min_value=-10, max_value=10, allow_nan=False)


@given(
    qs=st.lists(finite_q, min_size=3, max_size=6),
    qs_pert=st.lists(finite_q, min_size=6, max_size=6),
    shift=st.floats(min_value=-5, max_value=5, allow_nan=False),
)
def test_sarfa_shift_invariance_quick(qs, qs_pert, shift):
    names = [f"m{i}" for i in range(len(qs))]
    q1 = QProfile.from_mapping("s", dict(zip(names, qs)))
    q2 = QProfile.from_mapping("sp", dict(zip(names, qs_pert)))
    b1 = sarfa_score(q1, q2, names[0])
    q1s = QProfile.from_mapping("s", {a: q + shift for a, q in q1.entries})
    q2s = QProfile.from_mapping("sp", {a: q + shift for a, q in q2.entries})
    b2 = sarfa_score(q1s, q2s, names[0])
    assert b2.score == pytest.approx(b1.score, abs=1e-9)
    assert b2.delta_p == pytest.approx(b1.delta_p, abs=1e-9)
    assert b2.kl == pytest.approx(b1.kl, abs=1e-9)


@given(
    qs=st.lists(finite_q, min_size=2, max_size=8),
    qs_pert=st.lists(finite_q, min_size=8, max_size=8),
)
def test_sarfa_bounds_quick(qs, qs_pert):
    names = [f"m{i}" for i in range(len(qs))]
    q1 = QProfile.from_mapping("s", dict(zip(names, qs)))
    q2 = QProfile.from_mapping("sp", dict(zip(names, qs_pert)))
    b = sarfa_score(q1, q2, names[-1])
    assert 0.0 <= b.score <= 1.0
    assert b.kl >= 0.0
    assert 0.0 < b.k_sim <= 1.0
