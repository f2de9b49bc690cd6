"""Action-focused saliency scores from Q-value profiles.

Everything in this module is pure arithmetic on small collections of
(action, Q-value) pairs: no I/O, no domain knowledge.  The central score
balances two quantities derived from a softmax over the agent's Q-values:

* ``delta_p`` -- how much the perturbation lowered the relative expected
  reward of the action being explained (specificity),
* ``k_sim``  -- how little the perturbation disturbed the relative expected
  rewards of every *other* action, measured as 1/(1 + KL divergence) of the
  remaining-action distributions (relevance).

The final score is the harmonic mean of the two, clamped to zero whenever
the perturbation made the explained action relatively *better*.  Two
published baseline scores (a raw Q-difference, and squared policy/value
differences) are provided for comparison, along with alternative ways of
combining ``delta_p`` and ``k_sim`` used by the evaluation ablation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple


class SaliencyError(Exception):
    """Base class for scoring errors."""


class NoCommonActionsError(SaliencyError):
    """Original and perturbed profiles share no actions at all."""


class DegenerateRemainderError(SaliencyError):
    """No actions other than the selected one: remainder distribution undefined."""


@dataclass(frozen=True)
class QProfile:
    """An agent's Q-value estimate per legal action at one state.

    ``entries`` is an ordered sequence of (action_id, q) pairs.  Action ids
    are opaque tokens, unique within a profile; all q values must be finite.
    """

    state_id: str
    entries: Tuple[Tuple[str, float], ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("QProfile requires at least one action")
        seen = set()
        for action, q in self.entries:
            if action in seen:
                raise ValueError(f"duplicate action id {action!r}")
            seen.add(action)
            if not math.isfinite(q):
                raise ValueError(f"non-finite q for action {action!r}: {q!r}")

    @classmethod
    def from_mapping(cls, state_id: str, qs: Mapping[str, float]) -> "QProfile":
        return cls(state_id, tuple((a, float(q)) for a, q in qs.items()))

    @property
    def actions(self) -> Tuple[str, ...]:
        return tuple(a for a, _ in self.entries)

    @property
    def values(self) -> Tuple[float, ...]:
        return tuple(q for _, q in self.entries)

    def q(self, action: str) -> float:
        for a, q in self.entries:
            if a == action:
                return q
        raise KeyError(action)

    def __contains__(self, action: str) -> bool:
        return any(a == action for a, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ActionDistribution:
    """Strictly positive probabilities over action ids, summing to one."""

    probs: Tuple[Tuple[str, float], ...]

    def __post_init__(self) -> None:
        total = sum(p for _, p in self.probs)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        if any(p <= 0.0 for _, p in self.probs):
            raise ValueError("probabilities must be strictly positive")

    @property
    def actions(self) -> Tuple[str, ...]:
        return tuple(a for a, _ in self.probs)

    def p(self, action: str) -> float:
        for a, p in self.probs:
            if a == action:
                return p
        raise KeyError(action)


@dataclass(frozen=True)
class PolicyValueProfile:
    """Softmax policy plus state value derived from a Q profile."""

    policy: ActionDistribution
    value: float


class Status(str, enum.Enum):
    """Outcome of scoring one feature."""

    SCORED = "scored"
    SKIPPED_NO_OVERLAP = "skipped_no_overlap"
    SKIPPED_INVALID_PERTURBATION = "skipped_invalid_perturbation"
    ACTION_REMOVED = "action_removed"
    DEGENERATE_REM = "degenerate_rem"


@dataclass(frozen=True)
class ScoreBreakdown:
    """Per-feature saliency with its diagnostic components.

    For the saliency method proper, ``score`` lies in [0, 1] and equals the
    configured combination of the clamped ``delta_p`` and ``k_sim``.  For
    baseline methods the breakdown only carries ``score`` (raw, possibly
    negative) and the diagnostic fields stay ``None``.
    """

    feature_id: str
    score: float
    status: Status
    delta_p: Optional[float] = None
    kl: Optional[float] = None
    k_sim: Optional[float] = None

    @classmethod
    def skipped(cls, feature_id: str, status: Status) -> "ScoreBreakdown":
        return cls(feature_id=feature_id, score=0.0, status=status)


class Combiner(str, enum.Enum):
    """Ways to merge specificity and relevance into one score."""

    HARMONIC = "harmonic"
    ARITHMETIC_MEAN = "arithmetic_mean"
    GEOMETRIC_MEAN = "geometric_mean"
    MINIMUM = "minimum"
    DP_ONLY = "dp_only"
    K_ONLY = "k_only"


def _softmax(values: Sequence[float]) -> Tuple[float, ...]:
    # Max-subtraction keeps exp() finite for any capped q range.
    m = max(values)
    exps = [math.exp(v - m) for v in values]
    total = sum(exps)
    return tuple(e / total for e in exps)


def _full_distribution(q: QProfile) -> ActionDistribution:
    return ActionDistribution(tuple(zip(q.actions, _softmax(q.values))))


def restrict_to_common_actions(
    q_orig: QProfile, q_pert: QProfile, selected: str
) -> Tuple[QProfile, QProfile, bool]:
    """Restrict both profiles to actions legal in both states.

    Returns the restricted profiles (in the original profile's order, with
    the original q values preserved) plus a flag set when ``selected`` is
    absent from the perturbed profile.

    Raises:
        NoCommonActionsError: the two profiles share no actions.
    """
    pert_qs = dict(q_pert.entries)
    common = [(a, q) for a, q in q_orig.entries if a in pert_qs]
    if not common:
        raise NoCommonActionsError(
            f"no common actions between {q_orig.state_id!r} and {q_pert.state_id!r}"
        )
    removed_selected = selected not in pert_qs
    restricted_orig = QProfile(q_orig.state_id, tuple(common))
    restricted_pert = QProfile(q_pert.state_id, tuple((a, pert_qs[a]) for a, _ in common))
    return restricted_orig, restricted_pert, removed_selected


def softmax_selected(q: QProfile, selected: str) -> float:
    """Relative expected reward of ``selected``: softmax over all Q-values."""
    if selected not in q:
        raise ValueError(f"action {selected!r} not in profile {q.state_id!r}")
    probs = _softmax(q.values)
    return probs[q.actions.index(selected)]


def rem_distribution(q: QProfile, selected: str) -> ActionDistribution:
    """Softmax over every action apart from the selected one.

    Raises:
        DegenerateRemainderError: the profile holds no other action.
    """
    if selected not in q:
        raise ValueError(f"action {selected!r} not in profile {q.state_id!r}")
    rest = [(a, v) for a, v in q.entries if a != selected]
    if not rest:
        raise DegenerateRemainderError(
            f"profile {q.state_id!r} has no actions besides {selected!r}"
        )
    probs = _softmax([v for _, v in rest])
    return ActionDistribution(tuple((a, p) for (a, _), p in zip(rest, probs)))


def kl_divergence(p_pert: ActionDistribution, p_orig: ActionDistribution) -> float:
    """KL divergence of the perturbed distribution from the original.

    Argument order matters: the perturbed distribution comes first and
    weights the log-ratios.  Natural log; both distributions must cover
    exactly the same actions.
    """
    if p_pert.actions != p_orig.actions:
        raise ValueError(
            f"support mismatch: {p_pert.actions!r} vs {p_orig.actions!r}"
        )
    total = 0.0
    for (_, p), (_, q) in zip(p_pert.probs, p_orig.probs):
        total += p * math.log(p / q)
    # Rounding can push a mathematically-zero divergence a hair negative.
    return max(total, 0.0)


def similarity(kl: float) -> float:
    """Map a divergence in [0, inf) to a similarity in (0, 1]."""
    if kl < 0.0:
        raise ValueError(f"negative KL divergence: {kl!r}")
    return 1.0 / (1.0 + kl)


def combine(delta_p: float, k_sim: float, mode: Combiner = Combiner.HARMONIC) -> float:
    """Combine clamped specificity and relevance per the chosen mode.

    ``delta_p`` must already be clamped to [0, 1].  A zero ``delta_p``
    yields zero under every mode except ``k_only``: a feature whose removal
    does not lower the explained action's relative reward is never salient,
    whichever combiner the ablation is exercising.
    """
    mode = Combiner(mode)
    if mode is Combiner.K_ONLY:
        return k_sim
    if delta_p <= 0.0:
        return 0.0
    if mode is Combiner.HARMONIC:
        return 2.0 * k_sim * delta_p / (k_sim + delta_p)
    if mode is Combiner.ARITHMETIC_MEAN:
        return (delta_p + k_sim) / 2.0
    if mode is Combiner.GEOMETRIC_MEAN:
        return math.sqrt(delta_p * k_sim)
    if mode is Combiner.MINIMUM:
        return min(delta_p, k_sim)
    if mode is Combiner.DP_ONLY:
        return delta_p
    raise ValueError(f"unknown combiner {mode!r}")


def sarfa_score(
    q_orig: QProfile,
    q_pert: QProfile,
    selected: str,
    combiner: Combiner = Combiner.HARMONIC,
) -> ScoreBreakdown:
    """Score one feature from the original and perturbed Q profiles.

    Handles the three shapes the action-set intersection can take:

    * selected action present, other actions survive: the standard path;
    * selected action present but alone: the remainder distribution is
      undefined, so relevance is vacuous (``k_sim`` = 1) and the breakdown
      is flagged ``degenerate_rem``;
    * selected action missing from the perturbed profile (the perturbation
      made it illegal): its relative expected reward there is taken as 0,
      which is maximal disruption, and the breakdown is flagged
      ``action_removed``.

    Raises:
        NoCommonActionsError: the profiles share no actions at all.
        ValueError: ``selected`` is missing from the original profile.
    """
    if selected not in q_orig:
        raise ValueError(f"action {selected!r} not in original profile")
    r_orig, r_pert, removed = restrict_to_common_actions(q_orig, q_pert, selected)

    if removed:
        # P(s, a-hat) over the surviving actions plus a-hat itself;
        # P(s', a-hat) = 0 since the action no longer exists there.  Every
        # surviving action is a non-selected action, so the remainder
        # distributions are plain softmaxes of the restricted profiles.
        support = tuple(r_orig.entries) + ((selected, q_orig.q(selected)),)
        delta_p = _softmax([v for _, v in support])[-1]
        kl = kl_divergence(_full_distribution(r_pert), _full_distribution(r_orig))
        k_sim = similarity(kl)
        status = Status.ACTION_REMOVED
    elif len(r_orig) == 1:
        # Only the selected action survives the intersection: the remainder
        # distribution is undefined and relevance is vacuously perfect.
        delta_p = 0.0
        kl = None
        k_sim = 1.0
        status = Status.DEGENERATE_REM
    else:
        delta_p = softmax_selected(r_orig, selected) - softmax_selected(r_pert, selected)
        kl = kl_divergence(
            rem_distribution(r_pert, selected), rem_distribution(r_orig, selected)
        )
        k_sim = similarity(kl)
        status = Status.SCORED

    clamped = min(max(delta_p, 0.0), 1.0)
    score = combine(clamped, k_sim, combiner)
    return ScoreBreakdown(
        feature_id="",
        score=score,
        status=status,
        delta_p=delta_p,
        kl=kl,
        k_sim=k_sim,
    )


def baseline_iyer(q_orig: QProfile, q_pert: QProfile, selected: str) -> float:
    """Raw Q-difference baseline: Q(s, a-hat) - Q(s', a-hat).

    May be negative; the evaluation harness rescales.  Raises KeyError when
    the selected action is missing from either profile (callers map that to
    a skipped status).
    """
    return q_orig.q(selected) - q_pert.q(selected)


def baseline_greydanus(
    pv_orig: PolicyValueProfile, pv_pert: PolicyValueProfile, which: str = "policy"
) -> float:
    """Squared policy-difference or value-difference baseline.

    ``policy`` mode: half the squared Euclidean norm of the probability
    difference; ``value`` mode: half the squared value difference.
    """
    if which == "value":
        d = pv_orig.value - pv_pert.value
        return 0.5 * d * d
    if which == "policy":
        if pv_orig.policy.actions != pv_pert.policy.actions:
            raise ValueError("policy distributions must share support")
        total = 0.0
        for (_, p), (_, q) in zip(pv_orig.policy.probs, pv_pert.policy.probs):
            total += (p - q) ** 2
        return 0.5 * total
    raise ValueError(f"unknown baseline variant {which!r}")


def derive_policy_value(q: QProfile, temperature: float = 1.0) -> PolicyValueProfile:
    """Softmax policy at the given temperature plus the max-Q state value."""
    if temperature <= 0.0:
        raise ValueError(f"temperature must be positive, got {temperature!r}")
    probs = _softmax([v / temperature for v in q.values])
    policy = ActionDistribution(tuple(zip(q.actions, probs)))
    return PolicyValueProfile(policy=policy, value=max(q.values))
