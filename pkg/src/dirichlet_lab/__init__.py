"""Measure estimates and Dirichlet-property testers on unimodular lattices.

The package provides:

- exact and Monte Carlo measures of the sublevel sets of the
  shortest-vector depth function (:mod:`dirichlet_lab.chart`,
  :mod:`dirichlet_lab.d2`, :mod:`dirichlet_lab.bounds`);
- the correspondence between approximating functions and flow radii,
  with convergence diagnostics for the associated critical series
  (:mod:`dirichlet_lab.dani`);
- direct and dynamical testers for the Dirichlet property of a target
  matrix (:mod:`dirichlet_lab.tester`);
- triangular decompositions of critical lattices and tiling checks
  (:mod:`dirichlet_lab.hajos`);
- reproducible experiment runners behind the ``dirichlet-lab`` CLI
  (:mod:`dirichlet_lab.experiments`).
"""

from .bounds import (
    LowerSetParams,
    UpperSetParams,
    covering_check,
    default_c0,
    in_lower_set,
    in_upper_set,
    linear_extension_count,
    lower_set_lattice,
    lower_set_measure,
    minimal_covering_C,
    mu2_exact,
    upper_set_bracket,
    upper_set_measure_bound,
)
from .chart import (
    ChartBox,
    MeasureEstimate,
    derived_corner_range,
    estimate_K_measure,
    estimate_sublevel_measure,
    estimate_thickened_measure,
    injectivity_audit,
    sample_chart,
    sweep_K_measures,
    sweep_sublevel_measures,
    zeta_product_inverse,
)
from .d2 import (
    ACCEPTANCE_RATE,
    ModularPoint,
    estimate_sublevel_global,
    sample_modular_points,
    sample_X2,
    sweep_sublevel_global,
)
from .dani import (
    Constants,
    COverT,
    LogFamily,
    LogLogFamily,
    PsiFromR,
    PsiSpec,
    RFunction,
    SeriesReport,
    TablePsi,
    constant_r,
    critical_terms,
    equivalent_series_terms,
    parse_psi,
    psi_to_r,
    r_to_psi,
    series_diagnostics,
    table_r,
)
from .errors import (
    BisectionFailed,
    ConfigError,
    DimensionMismatch,
    DimensionTooLarge,
    DirichletLabError,
    HorizonTooLarge,
    NegativeR,
    NonUnimodular,
    NumericallyDegenerate,
    NumericFailure,
    PsiInvalid,
    RInvalid,
    ROutOfRange,
    SearchExhausted,
    SingularChartBlock,
    ToleranceTooLoose,
    WeightDimensionMismatch,
)
from .hajos import (
    HajosDecomposition,
    TilingReport,
    decompose_critical,
    random_critical_basis,
    tiling_check,
)
from .lattice import (
    BOUNDARY_TOL,
    MAX_DIM,
    LatticeBasis,
    ThickenedCertificate,
    Verdict,
    WeightPair,
    apply_flow,
    default_thickened_step,
    delta,
    flow_matrix,
    in_K_r,
    in_thickened,
    lll_reduce,
    random_unimodular_basis,
    shortest_sup_vector,
)
from .rng import RunningMoments, split_counts, worker_rng
from .tester import (
    CoverageReport,
    DynamicalReport,
    TargetMatrix,
    direct_test,
    dynamical_test,
    fast_window_verdicts,
    hit_sequence,
    horizon_of_time,
    lattice_of_target,
    quasi_norm,
)

__version__ = "0.1.0"

__all__ = [
    "ACCEPTANCE_RATE",
    "BOUNDARY_TOL",
    "BisectionFailed",
    "COverT",
    "ChartBox",
    "ConfigError",
    "Constants",
    "CoverageReport",
    "DimensionMismatch",
    "DimensionTooLarge",
    "DirichletLabError",
    "DynamicalReport",
    "HajosDecomposition",
    "HorizonTooLarge",
    "LatticeBasis",
    "LogFamily",
    "LogLogFamily",
    "LowerSetParams",
    "MAX_DIM",
    "MeasureEstimate",
    "ModularPoint",
    "NegativeR",
    "NonUnimodular",
    "NumericFailure",
    "NumericallyDegenerate",
    "PsiFromR",
    "PsiInvalid",
    "PsiSpec",
    "RFunction",
    "RInvalid",
    "ROutOfRange",
    "RunningMoments",
    "SearchExhausted",
    "SeriesReport",
    "SingularChartBlock",
    "TablePsi",
    "TargetMatrix",
    "ThickenedCertificate",
    "TilingReport",
    "ToleranceTooLoose",
    "UpperSetParams",
    "Verdict",
    "WeightDimensionMismatch",
    "WeightPair",
    "apply_flow",
    "constant_r",
    "covering_check",
    "critical_terms",
    "decompose_critical",
    "default_c0",
    "default_thickened_step",
    "delta",
    "derived_corner_range",
    "direct_test",
    "dynamical_test",
    "equivalent_series_terms",
    "estimate_K_measure",
    "estimate_sublevel_global",
    "estimate_sublevel_measure",
    "estimate_thickened_measure",
    "fast_window_verdicts",
    "flow_matrix",
    "hit_sequence",
    "horizon_of_time",
    "in_K_r",
    "in_lower_set",
    "in_thickened",
    "in_upper_set",
    "injectivity_audit",
    "lattice_of_target",
    "linear_extension_count",
    "lll_reduce",
    "lower_set_lattice",
    "lower_set_measure",
    "minimal_covering_C",
    "mu2_exact",
    "parse_psi",
    "psi_to_r",
    "quasi_norm",
    "r_to_psi",
    "random_critical_basis",
    "random_unimodular_basis",
    "sample_X2",
    "sample_chart",
    "sample_modular_points",
    "series_diagnostics",
    "shortest_sup_vector",
    "split_counts",
    "sweep_K_measures",
    "sweep_sublevel_global",
    "sweep_sublevel_measures",
    "table_r",
    "tiling_check",
    "upper_set_bracket",
    "upper_set_measure_bound",
    "worker_rng",
    "zeta_product_inverse",
]
