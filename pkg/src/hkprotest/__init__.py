"""Protest-intensity event studies and panel regressions for HK stocks."""

__version__ = "0.1.0"

from .core_stats import (
    DesignMatrix,
    OlsFit,
    StandardizationStats,
    absorb_groups,
    ols_fit,
    standardize,
    student_t_p,
)

__all__ = [
    "DesignMatrix",
    "OlsFit",
    "StandardizationStats",
    "absorb_groups",
    "ols_fit",
    "standardize",
    "student_t_p",
    "__version__",
]
