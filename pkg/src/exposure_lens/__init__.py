"""exposure-lens: occupation-level AI-exposure measurement tools.

Platform conversation logs over- and under-represent occupations relative
to the workforce. This package quantifies that selection (psi between
occupations, theta within), builds and reweights exposure proxies,
propagates the selection into regression coefficients via closed-form
probability limits, and brackets structural coefficients with
partial-identification bounds, all verified by seeded Monte Carlo.
"""

from .errors import (
    ConvergenceError,
    ExposureLensError,
    NumericalError,
    ValidationError,
    ZeroPlatformError,
)
from .exposure import (
    AggregationSpec,
    ExposureVector,
    aggregate,
    composite,
    platform_proxy,
    reweight,
    standardize,
    true_exposure,
)
from .identify import (
    IdentifiedSet,
    ProjectionStats,
    bounds,
    monotonicity_report,
    plim,
    plim_from_values,
    projection_stats,
    span_decomposition,
)
from .regression import (
    EventStudyFit,
    FitSummary,
    FixedEffectSpec,
    Frame,
    RegressionFit,
    cochran_q,
    cross_occ_regression,
    did,
    event_study,
    spearman,
    wild_cluster_bootstrap,
    wls_absorbed,
)
from .selection import SelectionProfile, compute_eta, compute_psi, compute_theta, skew_metrics
from .simulate import DGPConfig, PanelDataset, gen_occ_cross_section, gen_panel
from .soc import OccId
from .tables import (
    Crosswalk,
    OccOutcomeTable,
    ShareTable,
    TaskMatrix,
    apply_crosswalk,
    expand_major_to_detailed,
    load_crosswalk,
    load_outcome_table,
    load_share_table,
    load_task_matrix,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
