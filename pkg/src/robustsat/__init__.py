"""Robust and randomized state-feedback design for an uncertain flexible satellite.

The package models a rigid spacecraft with flexible appendices as a linear
fractional transformation over interval, norm-bounded and symmetric matrix
uncertainties, synthesizes multiobjective state-feedback gains through LMI
programs (deterministic with quadratic separators, or randomized by the
scenario and sequential-validation approaches) and analyzes the closed loop
both with common-Lyapunov certificates and Monte Carlo estimation.
"""

__version__ = "0.1.0"

from .benchmark import BenchmarkConfig, PhysicalData, default_physical_data
from .lft import (
    DeltaSample,
    Interval,
    Lft,
    NormBounded,
    ScalarRepeated,
    SymmetricSet,
    UncertaintyStructure,
    diag_concat,
    normalize_interval,
    star_compose,
    star_eval,
)
from .sampling import RandomizedSettings, sample, sample_size, vertices
from .synthesis import Controller, DesignItem, DesignSpec, demeter_design_spec, \
    design_deterministic, design_scenario, design_sequential
from .analysis import AnalysisResult, analyze_deterministic, close_loop, \
    hinf_sample, i2p_sample, verify_probability, worst_case_estimate
from .uss import UncertainStateSpace

__all__ = [
    "__version__",
    "BenchmarkConfig",
    "PhysicalData",
    "default_physical_data",
    "Lft",
    "UncertaintyStructure",
    "DeltaSample",
    "ScalarRepeated",
    "SymmetricSet",
    "NormBounded",
    "Interval",
    "star_eval",
    "star_compose",
    "diag_concat",
    "normalize_interval",
    "RandomizedSettings",
    "sample",
    "sample_size",
    "vertices",
    "Controller",
    "DesignSpec",
    "DesignItem",
    "demeter_design_spec",
    "design_deterministic",
    "design_scenario",
    "design_sequential",
    "AnalysisResult",
    "close_loop",
    "analyze_deterministic",
    "worst_case_estimate",
    "verify_probability",
    "hinf_sample",
    "i2p_sample",
    "UncertainStateSpace",
]
