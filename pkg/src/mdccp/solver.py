"""Closed-form minimum-risk portfolios at a target return, preference
weights over (q, s) cells and their aggregation.

Both the mean-variance model (covariance risk matrix) and the multiscale
model (F-matrix per cell) share one solver: minimise w'Mw subject to
sum(w) = 1 and r'w = u, solved through the two Lagrange multipliers.
Weights are signed; nothing enforces w >= 0.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, TextIO

import numpy as np

from . import mfdcca
from .errors import (
    CellError,
    ConditioningError,
    ConfigurationError,
    CoverageError,
    DegenerateConstraintsError,
    EmptyPreferenceError,
    MDCCPError,
)
from .series import ReturnPanel

logger = logging.getLogger(__name__)

COND_CAP = 1e12
CATEGORIES = ("C-I", "C-II", "C-III", "C-IV", "C-V", "C-VI", "C-VII", "C-VIII", "C-IX")

# (scale subset, q subset) per category
_CATEGORY_RULES = {
    "C-I": ("all", "all"),
    "C-II": ("short", "all"),
    "C-III": ("long", "all"),
    "C-IV": ("all", "large"),
    "C-V": ("all", "small"),
    "C-VI": ("long", "large"),
    "C-VII": ("long", "small"),
    "C-VIII": ("short", "large"),
    "C-IX": ("short", "small"),
}

SPLIT_RULE = "short: s < ceil((s_min+s_max)/2), long: otherwise; large: q > 0, small: q < 0"


@dataclass(frozen=True)
class SolverInput:
    expected_returns: np.ndarray
    risk_matrix: np.ndarray
    target_return: float
    risk_free_rate: float = 0.0

    def __post_init__(self):
        r = np.array(self.expected_returns, dtype=float)
        m = np.array(self.risk_matrix, dtype=float)
        object.__setattr__(self, "expected_returns", r)
        object.__setattr__(self, "risk_matrix", m)
        n = r.shape[0]
        if r.ndim != 1 or m.shape != (n, n):
            raise ConfigurationError(f"risk matrix shape {m.shape} does not match {n} assets")
        if np.max(np.abs(m - m.T)) > 1e-12 * max(1.0, np.max(np.abs(m))):
            raise ConfigurationError("risk matrix is not symmetric")
        _check_returns(r)


def _check_returns(r: np.ndarray) -> None:
    if np.all(r == r[0]):
        raise DegenerateConstraintsError("all expected returns are equal; constraints are dependent")


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray
    cell: tuple | None = None
    objective: float | None = None  # (u - r_F) / w'Mw
    risk: float | None = None  # w'Mw
    assets: tuple = ()

    @property
    def negative(self) -> tuple:
        names = self.assets or tuple(range(len(self.weights)))
        return tuple(a for a, w in zip(names, self.weights) if w < 0)


@dataclass(frozen=True)
class PreferenceSpec:
    category: str
    Q: tuple
    S: tuple
    alpha: Mapping  # (q, s) -> Fraction

    def support(self) -> list:
        return sorted(self.alpha)

    def weight(self, q, s) -> float:
        return float(self.alpha.get((q, s), 0))


@dataclass(frozen=True)
class WeightField:
    spec: PreferenceSpec
    cells: Mapping  # (q, s) -> WeightVector
    aggregate: WeightVector
    expected_return: float
    target_return: float = math.nan
    risk_free_rate: float = 0.0


# --------------------------------------------------------------------------- #
# core solve


def repair_matrix(m: np.ndarray) -> np.ndarray:
    """Floor eigenvalues at 1e-10 * trace / N."""
    n = m.shape[-1]
    w, v = np.linalg.eigh(m)
    floor = 1e-10 * np.trace(m) / n
    out = (v * np.maximum(w, floor)) @ v.T
    return (out + out.T) / 2


def solve_stack(
    risk: np.ndarray,
    r: np.ndarray,
    u: float,
    r_F: float = 0.0,
    cond_cap: float = COND_CAP,
    repair: bool = False,
):
    """Solve a (K, N, N) stack of risk matrices at one target return.

    Returns ``(weights, risks, errors)`` where ``weights`` is (K, N) with NaN
    rows for failed matrices and ``errors`` maps stack index to the error.
    """
    risk = np.array(risk, dtype=float)
    r = np.asarray(r, dtype=float)
    _check_returns(r)
    k, n = risk.shape[0], risk.shape[-1]
    if repair:
        risk = np.stack([repair_matrix(m) for m in risk])
    errors: dict[int, MDCCPError] = {}
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(risk)
    for idx in np.flatnonzero(~(cond <= cond_cap)):
        errors[int(idx)] = ConditioningError(f"condition number {cond[idx]:.3g} exceeds {cond_cap:.3g}")
    ok = np.flatnonzero(cond <= cond_cap)

    weights = np.full((k, n), np.nan)
    risks = np.full(k, np.nan)
    if ok.size:
        rhs = np.broadcast_to(np.column_stack([np.ones(n), r]), (ok.size, n, 2))
        x = np.linalg.solve(risk[ok], rhs)
        x1, xr = x[:, :, 0], x[:, :, 1]
        a = x1.sum(axis=-1)
        b = (x1 * r).sum(axis=-1)
        d = (xr * r).sum(axis=-1)
        det = a * d - b * b
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = (d - u * b) / det
            gam = (u * a - b) / det
            w = lam[:, None] * x1 + gam[:, None] * xr
            # project back onto {1'w = 1, r'w = u} to strip rounding drift
            # left by the cancellation in det on ill-conditioned matrices;
            # elementwise only, so each row is independent of the stack size
            e1 = 1.0 - w.sum(axis=-1)
            er = u - (w * r).sum(axis=-1)
            g11, g1r, grr = float(n), r.sum(), (r * r).sum()
            g_det = g11 * grr - g1r * g1r
            y1 = (grr * e1 - g1r * er) / g_det
            yr = (g11 * er - g1r * e1) / g_det
            w = w + y1[:, None] + yr[:, None] * r
        degenerate = ~(np.abs(det) >= 1e-12 * np.abs(a * d))
        for pos in np.flatnonzero(degenerate):
            errors[int(ok[pos])] = DegenerateConstraintsError(
                "return and budget constraints are numerically dependent"
            )
        good = ~degenerate
        weights[ok[good]] = w[good]
        mw = np.matmul(risk[ok[good]], w[good][:, :, None])[:, :, 0]
        risks[ok[good]] = (w[good] * mw).sum(axis=-1)
    return weights, risks, errors


def _objective(u, r_F, risk):
    return (u - r_F) / risk if risk != 0 else math.nan


def solve_min_risk(
    inp: SolverInput, cond_cap: float = COND_CAP, repair: bool = False, cell=None, assets=()
) -> WeightVector:
    w, risk, errors = solve_stack(
        inp.risk_matrix[None], inp.expected_returns, inp.target_return, inp.risk_free_rate, cond_cap, repair
    )
    if errors:
        raise errors[0]
    return WeightVector(
        w[0], cell, _objective(inp.target_return, inp.risk_free_rate, risk[0]), float(risk[0]), tuple(assets)
    )


def sample_covariance(values: np.ndarray) -> np.ndarray:
    c = np.cov(np.asarray(values, dtype=float), rowvar=False, ddof=1)
    c = np.atleast_2d(c)
    return (c + c.T) / 2


def expected_returns(panel: ReturnPanel) -> np.ndarray:
    return panel.values.mean(axis=0)


def solve_mvp(
    panel: ReturnPanel, u: float, r_F: float = 0.0, cond_cap: float = COND_CAP, repair=False, r=None
) -> WeightVector:
    """Mean-variance solution with sample covariance; ``r`` defaults to in-sample means."""
    r = expected_returns(panel) if r is None else r
    inp = SolverInput(r, sample_covariance(panel.values), u, r_F)
    return solve_min_risk(inp, cond_cap, repair, assets=panel.assets)


# --------------------------------------------------------------------------- #
# preferences


def normalize_category(category) -> str:
    if isinstance(category, int):
        return CATEGORIES[category - 1]
    c = str(category).strip().upper()
    if not c.startswith("C-"):
        c = "C-" + c
    if c not in CATEGORIES:
        raise ConfigurationError(f"unknown preference category {category!r}")
    return c


def _scale_subset(S: Sequence[int], which: str) -> list:
    if which == "all":
        return list(S)
    mid = (min(S) + max(S) + 1) // 2  # ceil of the midpoint
    return [s for s in S if (s < mid) == (which == "short")]


def _q_subset(Q: Sequence, which: str) -> list:
    if which == "all":
        return list(Q)
    return [q for q in Q if (q > 0 if which == "large" else q < 0)]


def build_alpha(category, Q: Sequence, S: Sequence[int]) -> PreferenceSpec:
    """Uniform preference over the (q, s) cells a category selects."""
    category = normalize_category(category)
    Q = tuple(sorted(set(Q)))
    S = tuple(sorted(set(int(s) for s in S)))
    if not Q or not S:
        raise EmptyPreferenceError("Q and S must be nonempty")
    s_rule, q_rule = _CATEGORY_RULES[category]
    qs, ss = _q_subset(Q, q_rule), _scale_subset(S, s_rule)
    if not qs or not ss:
        raise EmptyPreferenceError(f"{category} selects no cells from Q={Q}, S={S}")
    each = Fraction(1, len(qs) * len(ss))
    alpha = {(q, s): each for q in qs for s in ss}
    return PreferenceSpec(category, Q, S, alpha)


# --------------------------------------------------------------------------- #
# aggregation and the multiscale model


def aggregate(cells: Mapping, spec: PreferenceSpec, r=None, u: float = math.nan, r_F: float = 0.0) -> WeightField:
    """alpha-weighted sum of per-cell weights.

    Accumulated as ``w_ref + sum(alpha * (w_cell - w_ref))`` with exactly
    rounded sums, so identical cell vectors aggregate to themselves bit for bit.
    """
    support = spec.support()
    missing = [c for c in support if c not in cells]
    if missing:
        raise CoverageError(f"no weights for cells {missing[:10]}{'...' if len(missing) > 10 else ''}", missing)
    ref = np.asarray(cells[support[0]].weights, dtype=float)
    n = ref.shape[0]
    alphas = [float(spec.alpha[c]) for c in support]
    dev = np.array([np.asarray(cells[c].weights) - ref for c in support])
    agg = ref + np.array([math.fsum(a * dv for a, dv in zip(alphas, dev[:, i])) for i in range(n)])
    assets = cells[support[0]].assets
    er = math.nan if r is None else math.fsum(np.asarray(r, dtype=float) * agg)
    return WeightField(spec, dict(cells), WeightVector(agg, None, None, None, assets), er, u, r_F)


def mdccp_cells(
    panel: ReturnPanel,
    q_grid,
    s_grid,
    u: float,
    config: mfdcca.DetrendConfig | None = None,
    r_F: float = 0.0,
    cond_cap: float = COND_CAP,
    repair: bool = False,
    risk_override: np.ndarray | None = None,
    r: np.ndarray | None = None,
):
    """Per-cell solutions over the full q x s grid.

    Returns ``(cells, errors)``: WeightVector per solvable (q, s) and the
    error per failed one. ``risk_override`` replaces the F-matrices: an
    (N, N) matrix for every cell, or a precomputed (Q, S, N, N) tensor.
    """
    q_grid = list(q_grid)
    s_grid = [int(s) for s in s_grid]
    r = expected_returns(panel) if r is None else np.asarray(r, dtype=float)
    n = panel.n_assets
    if risk_override is None:
        tensor = mfdcca.panel_tensor(panel, q_grid, s_grid, config)
        stack = tensor.reshape(-1, n, n)
    else:
        override = np.asarray(risk_override, dtype=float)
        if override.ndim == 2:
            stack = np.broadcast_to(override, (len(q_grid) * len(s_grid), n, n))
        else:
            stack = override.reshape(-1, n, n)
    labels = [(q, s) for q in q_grid for s in s_grid]
    w, risks, errs = solve_stack(stack, r, u, r_F, cond_cap, repair)
    cells, errors = {}, {}
    for idx, cell in enumerate(labels):
        if idx in errs:
            errors[cell] = errs[idx]
        else:
            cells[cell] = WeightVector(w[idx], cell, _objective(u, r_F, risks[idx]), float(risks[idx]), panel.assets)
    return cells, errors


def solve_mdccp(
    panel: ReturnPanel,
    spec: PreferenceSpec,
    u: float,
    config: mfdcca.DetrendConfig | None = None,
    r_F: float = 0.0,
    cond_cap: float = COND_CAP,
    repair: bool = False,
    risk_override: np.ndarray | None = None,
) -> WeightField:
    support = spec.support()
    q_grid = sorted({q for q, _ in support})
    s_grid = sorted({s for _, s in support})
    r = expected_returns(panel)
    try:
        cells, errors = mdccp_cells(panel, q_grid, s_grid, u, config, r_F, cond_cap, repair, risk_override, r)
    except CellError:
        raise
    except mfdcca.DegenerateBoxError as exc:
        raise CellError(exc, exc.q, exc.s) from exc
    bad = [c for c in support if c in errors]
    if bad:
        raise CellError(errors[bad[0]], *bad[0])
    field_ = aggregate({c: cells[c] for c in support}, spec, r, u, r_F)
    if field_.aggregate.negative:
        logger.warning("aggregated weights short %s", ", ".join(map(str, field_.aggregate.negative)))
    return field_


# --------------------------------------------------------------------------- #
# export


def write_weights(field_: WeightField, fh: TextIO, echo: Mapping | None = None, per_cell: bool = True) -> None:
    """Per-cell rows (q, s, asset, weight) followed by the aggregated block."""
    for key, value in (echo or {}).items():
        fh.write(f"# {key}: {value}\n")
    fh.write(f"# category: {field_.spec.category}\n")
    fh.write(f"# split_rule: {SPLIT_RULE}\n")
    alphas = sorted({str(a) for a in field_.spec.alpha.values()})
    fh.write(f"# alpha: {', '.join(alphas)}\n")
    fh.write(f"# support_cells: {len(field_.spec.alpha)}\n")
    neg = field_.aggregate.negative
    fh.write(f"# negative_weights: {','.join(map(str, neg)) if neg else 'none'}\n")
    fh.write(f"# expected_return: {field_.expected_return!r}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["q", "s", "asset", "weight"])
    if per_cell:
        for (q, s) in field_.spec.support():
            wv = field_.cells[(q, s)]
            for name, x in zip(wv.assets, wv.weights):
                w.writerow([q, s, name, repr(float(x))])
    for name, x in zip(field_.aggregate.assets, field_.aggregate.weights):
        w.writerow(["aggregate", "aggregate", name, repr(float(x))])
