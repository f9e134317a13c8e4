"""Randomly weighted self-normalized subordinators: samplers, limit laws and diagnostics."""

from . import diagnostics, experiment, levy_measure, limits, simulate, weights
from .levy_measure import (
    BlockOscillating,
    ExpCompoundPoisson,
    IndexOneLogCorrected,
    LevyMeasure,
    LogSlowlyVarying,
    StablePositive,
    StepTail,
)
from .limits import LimitLaw, expected_rt, fourier_cdf, limit_cdf, limit_second_moment
from .simulate import RatioBatch, SeriesConfig, ShellConfig, ratio_batch
from .weights import WeightLaw

__version__ = "0.1.0"

__all__ = [
    "diagnostics",
    "experiment",
    "levy_measure",
    "limits",
    "simulate",
    "weights",
    "LevyMeasure",
    "StablePositive",
    "ExpCompoundPoisson",
    "LogSlowlyVarying",
    "IndexOneLogCorrected",
    "StepTail",
    "BlockOscillating",
    "WeightLaw",
    "LimitLaw",
    "limit_cdf",
    "fourier_cdf",
    "expected_rt",
    "limit_second_moment",
    "RatioBatch",
    "SeriesConfig",
    "ShellConfig",
    "ratio_batch",
]
