"""Hedonic price modeling for annual city housing panels with ESG factors.

Stationarizing transforms, augmented Dickey-Fuller tests, AR(q)-ARCH(1)
price innovations, linear and penalized-spline additive regressions, and
principal-component diagnostics of the cross-city residuals.
"""
__version__ = "0.1.0"

from .adf import AdfResult, adf_decision_table, adf_test, format_pvalue  # noqa: E402
from .ararch import (ArArchFit, ArArchSpec, InnovationSelection, fit_ar_arch,  # noqa: E402
                     reconstruct_returns, select_innovations)
from .diagnostics import (DecayFit, DecayReport, PcaResult, QuadrantReport,  # noqa: E402
                          ResidualMatrix, fit_decay, pca, quadrant_analysis, relative_change,
                          zeta)
from .errors import (CollinearityError, DegenerateInputError, DivisionByZero,  # noqa: E402
                     DomainError, HedonicError, InsufficientDataError, NonConvergence,
                     ParseError, SchemaError, ValidationError)
from .gam import GamFit, LambdaPolicy, fit_gam, gam_significance  # noqa: E402
from .panel import (CITY_META, CityMeta, CityPanel, PanelSet, YearRow, builtin_atl,  # noqa: E402
                    builtin_residuals, ingest_panel, load_panel)
from .pipeline import PipelineConfig, PipelineReport, emit_tables, run_pipeline  # noqa: E402
from .regression import (DesignMatrix, GlmFit, RegressionFit, SignificanceTable,  # noqa: E402
                         fit_glm, significance_summary)
from .transforms import (TransformedSeries, TransformPlan, apply_plan,  # noqa: E402
                         arithmetic_return, first_difference, plan_transforms, price_returns)

__all__ = [
    "AdfResult", "ArArchFit", "ArArchSpec", "CITY_META", "CityMeta", "CityPanel",
    "CollinearityError", "DecayFit", "DecayReport", "DegenerateInputError", "DesignMatrix",
    "DivisionByZero", "DomainError", "GamFit", "GlmFit", "HedonicError",
    "InnovationSelection", "InsufficientDataError", "LambdaPolicy", "NonConvergence",
    "PanelSet", "ParseError", "PcaResult", "PipelineConfig", "PipelineReport", "QuadrantReport", "RegressionFit",
    "ResidualMatrix", "SchemaError", "SignificanceTable", "TransformPlan",
    "TransformedSeries", "ValidationError", "YearRow", "adf_decision_table", "adf_test",
    "apply_plan", "arithmetic_return", "builtin_atl", "builtin_residuals", "emit_tables",
    "fit_ar_arch",
    "fit_decay", "fit_gam", "fit_glm", "first_difference", "format_pvalue",
    "gam_significance", "ingest_panel", "load_panel", "pca", "plan_transforms",
    "price_returns", "quadrant_analysis", "reconstruct_returns", "relative_change",
    "run_pipeline", "select_innovations", "significance_summary", "zeta",
]
