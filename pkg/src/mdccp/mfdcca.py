"""Multiscale detrended cross-correlation: profiles, moving-average detrending,
box covariances, q-order fluctuation functions and generalized Hurst exponents.

The q-order function raises ``|F_v|`` (already quadratic in the residuals) to
the power q, so exponents come out on twice the scale of the usual
amplitude-based MF-DFA convention: an uncorrelated random walk gives H(2) ~ 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from . import kernels
from .errors import (
    ConfigurationError,
    DegenerateAssetError,
    DegenerateBoxError,
    ScaleError,
)
from .series import ReturnPanel, ReturnSeries

DEFAULT_Q = tuple(range(-20, 21))
DEFAULT_S = tuple(range(3, 61))
MIN_SCALE = 3


@dataclass(frozen=True)
class DetrendConfig:
    """How the local trend is fitted and how q = 0 is averaged.

    tau
        ``None`` ties the moving-average window to the analysis scale
        (l = s). An integer fixes l = int(T / tau) for every scale.
    normalization
        ``"corrected"`` divides the l+1 window terms by l+1 (true mean);
        ``"literal"`` divides by l.
    q_zero_rule
        ``"continuous"`` averages logs over the 2d boxes (the q -> 0 limit);
        ``"literal"`` divides the log-sum by 4d.
    """

    tau: int | None = None
    normalization: str = "corrected"
    q_zero_rule: str = "continuous"

    def __post_init__(self):
        if self.normalization not in ("corrected", "literal"):
            raise ConfigurationError(f"normalization must be corrected|literal, got {self.normalization!r}")
        if self.q_zero_rule not in ("continuous", "literal"):
            raise ConfigurationError(f"q_zero_rule must be continuous|literal, got {self.q_zero_rule!r}")
        if self.tau is not None and (not isinstance(self.tau, (int, np.integer)) or self.tau < 2):
            raise ConfigurationError(f"fixed tau must be an integer >= 2, got {self.tau!r}")

    def window(self, length: int, s: int) -> int:
        if self.tau is None:
            l = int(s)
        else:
            if self.tau > length:
                raise ConfigurationError(f"tau={self.tau} exceeds series length {length}")
            l = length // self.tau
        if l < 1 or l >= length:
            raise ConfigurationError(f"moving-average window {l} invalid for length {length}")
        return l

    def as_dict(self) -> dict:
        return {
            "tau": "scale" if self.tau is None else int(self.tau),
            "normalization": self.normalization,
            "q_zero_rule": self.q_zero_rule,
        }


@dataclass(frozen=True)
class FluctuationSurface:
    pair: tuple
    q_grid: np.ndarray
    s_grid: np.ndarray
    values: np.ndarray  # (len(q_grid), len(s_grid))

    def at(self, q, s) -> float:
        iq = int(np.flatnonzero(self.q_grid == q)[0])
        i_s = int(np.flatnonzero(self.s_grid == s)[0])
        return float(self.values[iq, i_s])


@dataclass(frozen=True)
class HurstCurve:
    q_grid: np.ndarray
    h_values: np.ndarray
    r_squared: np.ndarray
    intercepts: np.ndarray
    fitted: np.ndarray  # bool per q; False where fewer than 3 usable scales


def _values(series) -> np.ndarray:
    return np.asarray(getattr(series, "values", series), dtype=float)


def profile(series) -> np.ndarray:
    """Cumulative sum of deviations from the mean."""
    x = _values(series)
    if np.ptp(x) == 0.0:
        return np.zeros_like(x)
    return np.cumsum(x - x.mean())


def moving_average_fit(prof, config: DetrendConfig | None = None, s: int = 3) -> np.ndarray:
    """Backward moving average over positions k-l..k; short heads use the available prefix."""
    config = config or DetrendConfig()
    prof = np.ascontiguousarray(prof, dtype=float)
    l = config.window(len(prof), s)
    return kernels.moving_average(prof, l, config.normalization == "literal")


def partition_boxes(length: int, s: int) -> np.ndarray:
    """0-based start positions of the d forward boxes then the d backward boxes."""
    length, s = int(length), int(s)
    if s < MIN_SCALE or s > length // 2:
        raise ScaleError(f"scale {s} outside [{MIN_SCALE}, {length // 2}] for length {length}")
    d = length // s
    forward = np.arange(d) * s
    backward = length - (np.arange(d) + 1) * s
    return np.concatenate([forward, backward]).astype(np.intp)


def box_detrended_cov(I, I_fit, J, J_fit, s: int) -> float:
    segs = [np.asarray(v, dtype=float) for v in (I, I_fit, J, J_fit)]
    if any(len(v) != s for v in segs):
        raise ValueError("all four segments must have length s")
    ri = segs[0] - segs[1]
    rj = segs[2] - segs[3]
    return float(kernels.box_cov(np.vstack([ri, rj]), np.array([0]), s)[0, 0, 1])


def fluctuation_function(box_values, q: float, q_zero_rule: str = "continuous") -> float:
    """Power mean of |F_v| of order q across the boxes."""
    a = np.abs(np.asarray(box_values, dtype=float))
    if q <= 0:
        zero = np.flatnonzero(a == 0)
        if zero.size:
            raise DegenerateBoxError(f"box {int(zero[0])} has zero covariance (q={q})", box=int(zero[0]), q=q)
    out = kernels.power_means(a.reshape(-1, 1).copy(), np.array([q], dtype=float), q_zero_rule == "literal")
    return float(out[0, 0])


def _check_scales(length: int, s_grid) -> np.ndarray:
    s_grid = np.asarray(s_grid, dtype=int)
    if s_grid.size == 0:
        raise ScaleError("empty scale grid")
    bad = s_grid[(s_grid < MIN_SCALE) | (s_grid > length // 2)]
    if bad.size:
        raise ScaleError(f"scale {int(bad[0])} outside [{MIN_SCALE}, {length // 2}] for length {length}")
    return s_grid


def residuals(values: np.ndarray, s: int, config: DetrendConfig) -> np.ndarray:
    """(N, T) profile minus its moving-average fit, one row per column of ``values``."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    out = np.empty((values.shape[1], values.shape[0]))
    for k in range(values.shape[1]):
        prof = profile(values[:, k])
        out[k] = prof - moving_average_fit(prof, config, s)
    return out


def f_tensor(values, q_grid, s_grid, config: DetrendConfig | None = None, names=None) -> np.ndarray:
    """F_ij(q, s) for every asset pair of a (T, N) array: shape (Q, S, N, N).

    Only the upper triangle is computed; the lower one is a copy, so the
    result is exactly symmetric.
    """
    config = config or DetrendConfig()
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    length, n = values.shape
    names = list(names) if names is not None else list(range(n))
    q_grid = np.asarray(q_grid, dtype=float)
    if q_grid.size == 0:
        raise ConfigurationError("empty q grid")
    s_grid = _check_scales(length, s_grid)
    iu, ju = np.triu_indices(n)
    need_nonzero = bool(np.any(q_grid <= 0))
    out = np.empty((len(q_grid), len(s_grid), n, n))
    for i_s, s in enumerate(s_grid):
        starts = partition_boxes(length, s)
        cov = kernels.box_cov(residuals(values, s, config), starts, int(s))
        a = np.ascontiguousarray(np.abs(cov[:, iu, ju]))
        if need_nonzero and not np.all(a):
            b, c = np.argwhere(a == 0)[0]
            q_bad = float(q_grid[q_grid <= 0][0])
            pair = (names[iu[c]], names[ju[c]])
            raise DegenerateBoxError(
                f"box {int(b)} has zero covariance for pair {pair} at s={int(s)} (q={q_bad})",
                box=int(b), q=q_bad, s=int(s), pair=pair,
            )
        pm = kernels.power_means(a, q_grid, config.q_zero_rule == "literal")
        out[:, i_s, iu, ju] = pm
        out[:, i_s, ju, iu] = pm
    return out


def surface(x, y, q_grid=DEFAULT_Q, s_grid=DEFAULT_S, config: DetrendConfig | None = None) -> FluctuationSurface:
    xv, yv = _values(x), _values(y)
    if xv.shape != yv.shape:
        raise ValueError("series must be aligned and of equal length")
    pair = (getattr(x, "asset_id", "x"), getattr(y, "asset_id", "y"))
    t = f_tensor(np.column_stack([xv, yv]), q_grid, s_grid, config, names=pair)
    return FluctuationSurface(pair, np.asarray(q_grid, dtype=float), np.asarray(s_grid, dtype=int), t[:, :, 0, 1])


def self_surface(x, q_grid=DEFAULT_Q, s_grid=DEFAULT_S, config: DetrendConfig | None = None) -> FluctuationSurface:
    """Single-series (DFA-style) surface."""
    name = getattr(x, "asset_id", "x")
    t = f_tensor(_values(x)[:, None], q_grid, s_grid, config, names=[name])
    return FluctuationSurface((name, name), np.asarray(q_grid, dtype=float), np.asarray(s_grid, dtype=int), t[:, :, 0, 0])


def hurst_curve(surf: FluctuationSurface) -> HurstCurve:
    """OLS slope of ln F against ln s for each q."""
    log_s = np.log(surf.s_grid.astype(float))
    nq = len(surf.q_grid)
    h = np.full(nq, np.nan)
    r2 = np.full(nq, np.nan)
    icpt = np.full(nq, np.nan)
    fitted = np.zeros(nq, dtype=bool)
    for iq in range(nq):
        f = surf.values[iq]
        ok = np.isfinite(f) & (f > 0)
        if ok.sum() < 3:
            continue
        x, y = log_s[ok], np.log(f[ok])
        xc, yc = x - x.mean(), y - y.mean()
        slope = 0.0 if np.ptp(y) == 0 else np.dot(xc, yc) / np.dot(xc, xc)
        resid = yc - slope * xc
        sst = np.dot(yc, yc)
        r2[iq] = 1.0 if sst == 0 or np.ptp(y) == 0 else min(1.0, max(0.0, 1.0 - np.dot(resid, resid) / sst))
        h[iq] = slope
        icpt[iq] = y.mean() - slope * x.mean()
        fitted[iq] = True
    return HurstCurve(surf.q_grid.copy(), h, r2, icpt, fitted)


def f_matrix(panel: ReturnPanel, q: float, s: int, config: DetrendConfig | None = None) -> np.ndarray:
    check_nonconstant(panel)
    return f_tensor(panel.values, [q], [s], config, names=panel.assets)[0, 0]


def check_nonconstant(panel: ReturnPanel) -> None:
    for k, name in enumerate(panel.assets):
        col = panel.values[:, k]
        if np.all(col == col[0]):
            raise DegenerateAssetError(f"asset {name!r} is constant", asset=name)


def panel_tensor(panel: ReturnPanel, q_grid, s_grid, config: DetrendConfig | None = None) -> np.ndarray:
    check_nonconstant(panel)
    return f_tensor(panel.values, q_grid, s_grid, config, names=panel.assets)


# --------------------------------------------------------------------------- #
# exports


def pair_surfaces(panel: ReturnPanel, q_grid, s_grid, config=None, include_self=True) -> list[FluctuationSurface]:
    t = panel_tensor(panel, q_grid, s_grid, config)
    q_arr, s_arr = np.asarray(q_grid, dtype=float), np.asarray(s_grid, dtype=int)
    out = []
    for i in range(panel.n_assets):
        for j in range(i if include_self else i + 1, panel.n_assets):
            out.append(FluctuationSurface((panel.assets[i], panel.assets[j]), q_arr, s_arr, t[:, :, i, j]))
    return out


def _num(v) -> str:
    return repr(float(v))


def _q_label(q) -> str:
    q = float(q)
    return str(int(q)) if q.is_integer() else repr(q)


def write_surfaces(surfaces: Sequence[FluctuationSurface], fh: TextIO, delimiter: str = ",") -> None:
    w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
    w.writerow(["pair_i", "pair_j", "q", "s", "F"])
    for surf in surfaces:
        for iq, q in enumerate(surf.q_grid):
            for i_s, s in enumerate(surf.s_grid):
                w.writerow([surf.pair[0], surf.pair[1], _q_label(q), int(s), _num(surf.values[iq, i_s])])


def write_hurst(surfaces: Sequence[FluctuationSurface], fh: TextIO, delimiter: str = ",") -> None:
    w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
    w.writerow(["pair_i", "pair_j", "q", "H", "r_squared"])
    for surf in surfaces:
        hc = hurst_curve(surf)
        for iq, q in enumerate(hc.q_grid):
            h = _num(hc.h_values[iq]) if hc.fitted[iq] else "unfit"
            r2 = _num(hc.r_squared[iq]) if hc.fitted[iq] else "unfit"
            w.writerow([surf.pair[0], surf.pair[1], _q_label(q), h, r2])
