"""Multiscale detrended cross-correlation statistics and mean-risk portfolios."""

__version__ = "0.1.0"

from .errors import MDCCPError
from .kernels import BACKEND
from .mfdcca import (
    DetrendConfig,
    FluctuationSurface,
    HurstCurve,
    f_matrix,
    hurst_curve,
    profile,
    surface,
)
from .series import ReturnPanel, ReturnSeries, describe, load_panel, prices_to_returns
from .solver import (
    PreferenceSpec,
    SolverInput,
    WeightField,
    WeightVector,
    build_alpha,
    solve_mdccp,
    solve_min_risk,
    solve_mvp,
)
