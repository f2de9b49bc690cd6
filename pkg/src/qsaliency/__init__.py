"""Perturbation-based saliency maps for black-box, Q-value-oracle agents.

The package splits into focused layers:

* :mod:`qsaliency.core`       -- the scoring math on Q profiles;
* :mod:`qsaliency.gateway`    -- oracle sessions (UCI engines, external
  line-protocol agents, the built-in gridworld) and the session pool;
* :mod:`qsaliency.chess`      -- board state, legality, piece-removal
  perturbations, saliency datasets;
* :mod:`qsaliency.gridworld`  -- exactly solvable test worlds;
* :mod:`qsaliency.image`      -- frame perturbation by localized blur;
* :mod:`qsaliency.evaluation` -- ROC/AUC, ablations, robustness runs;
* :mod:`qsaliency.render`     -- SVG board heatmaps and frame overlays;
* :mod:`qsaliency.cli`        -- the ``qsaliency`` command.
"""

from .core import (
    ActionDistribution,
    Combiner,
    DegenerateRemainderError,
    NoCommonActionsError,
    PolicyValueProfile,
    QProfile,
    SaliencyError,
    ScoreBreakdown,
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
from .gateway import (
    EngineScore,
    FunctionSession,
    OracleConfig,
    OracleError,
    OracleSession,
    SessionPool,
    open_session,
    score_to_q,
)

__version__ = "0.1.0"

__all__ = [
    "ActionDistribution",
    "Combiner",
    "DegenerateRemainderError",
    "NoCommonActionsError",
    "PolicyValueProfile",
    "QProfile",
    "SaliencyError",
    "ScoreBreakdown",
    "Status",
    "baseline_greydanus",
    "baseline_iyer",
    "combine",
    "derive_policy_value",
    "kl_divergence",
    "rem_distribution",
    "restrict_to_common_actions",
    "sarfa_score",
    "similarity",
    "softmax_selected",
    "EngineScore",
    "FunctionSession",
    "OracleConfig",
    "OracleError",
    "OracleSession",
    "SessionPool",
    "open_session",
    "score_to_q",
    "__version__",
]
