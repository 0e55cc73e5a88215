"""Subperiod backtests comparing the mean-variance and multiscale models.

Weights are estimated and evaluated on the same subperiod. Per-subperiod
returns compound geometrically into the cumulative figure; the risk
denominator is the sample standard deviation of the per-subperiod returns.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, TextIO

import numpy as np

from . import mfdcca, solver
from .errors import (
    ConfigurationError,
    InfeasibleSubperiodError,
    MDCCPError,
    UnavailableError,
)
from .series import ReturnPanel

logger = logging.getLogger(__name__)

MVP, MDCCP = "M-VP", "M-DCCP"
MODEL_NAMES = {"mvp": MVP, "mdccp": MDCCP}
FAILED = "failed"
UNDEFINED = "undefined"


@dataclass(frozen=True)
class BacktestPlan:
    """What to run on each subperiod.

    rule
        ``calendar_year`` groups rows by the year of their date labels;
        ``fixed_length`` cuts consecutive blocks of ``period_length`` rows.
    u_horizon
        ``subperiod``: expected asset returns are per-period means times the
        subperiod length, so u is a per-subperiod target. ``period``: plain
        per-period means.
    evaluation
        ``realized``: sum_i w_i R_i with R_i the compounded subperiod return
        of asset i. ``expected``: sum_i w_i r_i with the estimation means
        (equal to u by construction).
    """

    rule: str = "calendar_year"
    period_length: int | None = None
    targets: tuple = (0.05, 0.15, 0.30)
    categories: tuple = solver.CATEGORIES
    models: tuple = ("mvp", "mdccp")
    q_grid: tuple = mfdcca.DEFAULT_Q
    s_grid: tuple = mfdcca.DEFAULT_S
    config: mfdcca.DetrendConfig = field(default_factory=mfdcca.DetrendConfig)
    r_F: float = 0.0
    return_mode: str = "log"
    u_horizon: str = "subperiod"
    evaluation: str = "realized"
    compounding: str = "geometric"
    cond_cap: float = solver.COND_CAP
    repair: bool = False

    def __post_init__(self):
        checks = {
            "rule": ("calendar_year", "fixed_length"),
            "return_mode": ("log", "simple"),
            "u_horizon": ("subperiod", "period"),
            "evaluation": ("realized", "expected"),
            "compounding": ("geometric", "additive"),
        }
        for name, allowed in checks.items():
            if getattr(self, name) not in allowed:
                raise ConfigurationError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.rule == "fixed_length" and not (self.period_length and self.period_length > 0):
            raise ConfigurationError("fixed_length rule needs a positive period_length")
        bad = [m for m in self.models if m not in MODEL_NAMES]
        if bad:
            raise ConfigurationError(f"unknown model(s) {bad}")
        object.__setattr__(self, "categories", tuple(solver.normalize_category(c) for c in self.categories))

    @property
    def s_max(self) -> int:
        return max(self.s_grid)

    def as_dict(self) -> dict:
        return {
            "rule": self.rule,
            "period_length": self.period_length,
            "targets": list(self.targets),
            "categories": list(self.categories),
            "models": list(self.models),
            "q_grid": list(self.q_grid),
            "s_grid": list(self.s_grid),
            "detrend": self.config.as_dict(),
            "r_F": self.r_F,
            "return_mode": self.return_mode,
            "u_horizon": self.u_horizon,
            "evaluation": self.evaluation,
            "compounding": self.compounding,
            "cond_cap": self.cond_cap,
            "repair": self.repair,
        }


@dataclass
class ConfigResult:
    panel: str
    model: str
    category: str | None
    u: float
    returns: list | None  # per-subperiod portfolio returns, None if failed
    cumulative: float | None = None
    risk: float | None = None
    risk_adjusted: float | None = None
    failure: str | None = None

    @property
    def key(self):
        return (self.panel, self.model, self.category, self.u)


@dataclass
class BacktestReport:
    plan: BacktestPlan
    panels: list
    subperiods: dict  # panel -> list of labels
    results: list = field(default_factory=list)
    actual: dict = field(default_factory=dict)  # panel -> {label: return} or UNAVAILABLE

    def get(self, panel, model, category, u) -> ConfigResult:
        for res in self.results:
            if res.key == (panel, model, category, u):
                return res
        raise KeyError((panel, model, category, u))

    def expected_size(self) -> int:
        per_u = ("mvp" in self.plan.models) + ("mdccp" in self.plan.models) * len(self.plan.categories)
        return len(self.panels) * len(self.plan.targets) * per_u

    def win_counts(self, metric: str = "cumulative") -> dict:
        """Per target u: (wins, total, exact fraction) where M-DCCP beats M-VP.

        ``total`` is |categories| x |panels|; failed or undefined cells count
        as non-wins.
        """
        out = {}
        for u in self.plan.targets:
            wins = 0
            for p in self.panels:
                base = getattr(self.get(p, MVP, None, u), metric)
                for c in self.plan.categories:
                    val = getattr(self.get(p, MDCCP, c, u), metric)
                    if base is not None and val is not None and val > base:
                        wins += 1
            total = len(self.plan.categories) * len(self.panels)
            out[u] = (wins, total, Fraction(wins, total))
        return out


# --------------------------------------------------------------------------- #


def _label(t) -> int:
    if not hasattr(t, "year"):
        raise InfeasibleSubperiodError("calendar_year split needs date time labels")
    return t.year


def split(panel: ReturnPanel, rule: str = "calendar_year", period_length: int | None = None, s_max: int = 60):
    """Ordered, disjoint, exhaustive subpanels as ``[(label, subpanel), ...]``."""
    bounds = []
    if rule == "calendar_year":
        years = [_label(t) for t in panel.times]
        start = 0
        for k in range(1, len(years) + 1):
            if k == len(years) or years[k] != years[start]:
                bounds.append((str(years[start]), start, k))
                start = k
    elif rule == "fixed_length":
        if not period_length or period_length < 1:
            raise ConfigurationError("fixed_length needs a positive period_length")
        for i, start in enumerate(range(0, panel.length, period_length)):
            bounds.append((f"P{i + 1}", start, min(start + period_length, panel.length)))
    else:
        raise ConfigurationError(f"unknown split rule {rule!r}")
    need = 2 * s_max
    for label, a, b in bounds:
        if b - a < need:
            raise InfeasibleSubperiodError(
                f"subperiod {label} has {b - a} rows; scales up to {s_max} need at least {need}"
            )
    return [(label, panel.slice(a, b)) for label, a, b in bounds]


def compound(returns: Sequence[float], mode: str = "geometric") -> float:
    if mode == "additive":
        return math.fsum(returns)
    if len(returns) == 1:
        return float(returns[0])
    return math.prod(1.0 + r for r in returns) - 1.0


def _asset_period_returns(sub: ReturnPanel, mode: str) -> np.ndarray:
    if mode == "log":
        return np.expm1(sub.values.sum(axis=0))
    return np.prod(1.0 + sub.values, axis=0) - 1.0


def summarize(res: ConfigResult, compounding: str) -> ConfigResult:
    if res.returns is None:
        return res
    res.cumulative = compound(res.returns, compounding)
    if len(res.returns) >= 2:
        same = all(v == res.returns[0] for v in res.returns)
        res.risk = 0.0 if same else float(np.std(res.returns, ddof=1))
    res.risk_adjusted = res.cumulative / res.risk if res.risk and res.risk > 0 else None
    return res


def run(panel: ReturnPanel, plan: BacktestPlan, name: str = "panel", caps: ReturnPanel | None = None) -> BacktestReport:
    return run_many({name: panel}, plan, {name: caps} if caps is not None else None)


def run_many(panels: Mapping, plan: BacktestPlan, caps: Mapping | None = None) -> BacktestReport:
    report = BacktestReport(plan, list(panels), {})
    for name, panel in panels.items():
        subs = split(panel, plan.rule, plan.period_length, plan.s_max)
        report.subperiods[name] = [label for label, _ in subs]
        _run_panel(report, name, subs, plan)
        try:
            report.actual[name] = actual_index_return(panel, (caps or {}).get(name), plan)
        except UnavailableError:
            report.actual[name] = None
    return report


def _run_panel(report: BacktestReport, name: str, subs, plan: BacktestPlan) -> None:
    # per (model, category, u): list of subperiod returns or a failure message
    series: dict = {}
    keys = []
    for u in plan.targets:
        if "mvp" in plan.models:
            keys.append((MVP, None, u))
        if "mdccp" in plan.models:
            keys.extend((MDCCP, c, u) for c in plan.categories)
    for key in keys:
        series[key] = []

    specs = {c: solver.build_alpha(c, plan.q_grid, plan.s_grid) for c in plan.categories}
    for label, sub in subs:
        r = solver.expected_returns(sub)
        if plan.u_horizon == "subperiod":
            r = r * sub.length
        realized = _asset_period_returns(sub, plan.return_mode)
        evaluate = (lambda w: math.fsum(w * realized)) if plan.evaluation == "realized" else (lambda w: math.fsum(w * r))

        tensor, tensor_error = None, None
        if "mdccp" in plan.models:
            try:
                tensor = mfdcca.panel_tensor(sub, plan.q_grid, plan.s_grid, plan.config)
            except MDCCPError as exc:
                tensor_error = exc

        for u in plan.targets:
            if "mvp" in plan.models:
                try:
                    w = solver.solve_mvp(sub, u, plan.r_F, plan.cond_cap, plan.repair, r=r)
                    _append(series, (MVP, None, u), evaluate(w.weights))
                except MDCCPError as exc:
                    _fail(series, (MVP, None, u), label, exc)
            if "mdccp" not in plan.models:
                continue
            if tensor_error is not None:
                for c in plan.categories:
                    _fail(series, (MDCCP, c, u), label, tensor_error)
                continue
            try:
                cells, errors = solver.mdccp_cells(
                    sub, plan.q_grid, plan.s_grid, u, plan.config, plan.r_F,
                    plan.cond_cap, plan.repair, risk_override=tensor, r=r,
                )
            except MDCCPError as exc:
                for c in plan.categories:
                    _fail(series, (MDCCP, c, u), label, exc)
                continue
            for c, spec in specs.items():
                bad = [cell for cell in spec.support() if cell in errors]
                if bad:
                    exc = errors[bad[0]]
                    _fail(series, (MDCCP, c, u), label, exc, cell=bad[0])
                    continue
                agg = solver.aggregate({cell: cells[cell] for cell in spec.support()}, spec, r, u, plan.r_F)
                _append(series, (MDCCP, c, u), evaluate(agg.aggregate.weights))

    for (model, cat, u) in keys:
        vals = series[(model, cat, u)]
        if isinstance(vals, str):
            res = ConfigResult(name, model, cat, u, None, failure=vals)
        else:
            res = summarize(ConfigResult(name, model, cat, u, vals), plan.compounding)
        report.results.append(res)


def _append(series, key, value):
    if not isinstance(series[key], str):
        series[key].append(value)


def _fail(series, key, label, exc, cell=None):
    if isinstance(series[key], str):
        return
    where = f" cell (q={cell[0]}, s={cell[1]})" if cell else ""
    msg = f"{label}{where}: {type(exc).__name__}: {exc}"
    logger.warning("%s %s u=%s failed in %s", key[0], key[1] or "", key[2], msg)
    series[key] = msg


def actual_index_return(panel: ReturnPanel, caps: ReturnPanel | None, plan: BacktestPlan) -> dict:
    """Value-weighted subperiod return using the market values at each subperiod's end."""
    if caps is None:
        raise UnavailableError("no market-value weights supplied")
    if caps.assets != panel.assets or caps.times != panel.times:
        raise UnavailableError("market-value weights are not aligned with the return panel")
    out = {}
    cap_subs = dict(split(caps, plan.rule, plan.period_length, plan.s_max))
    for label, sub in split(panel, plan.rule, plan.period_length, plan.s_max):
        w = cap_subs[label].values[-1]
        out[label] = index_return(_asset_period_returns(sub, plan.return_mode), w)
    return out


def index_return(asset_returns, caps) -> float:
    caps = np.asarray(caps, dtype=float)
    return float(np.dot(caps / caps.sum(), np.asarray(asset_returns, dtype=float)))


# --------------------------------------------------------------------------- #
# export


def _fmt(v, digits=6):
    if v is None:
        return UNDEFINED
    return f"{v:.{digits}f}"


def write_tables(report: BacktestReport, fh: TextIO, digits: int = 6) -> None:
    """Cumulative and risk-adjusted tables: rows = panel, columns = M-VP then categories, one block per u."""
    plan = report.plan
    fh.write(f"# evaluation: {plan.evaluation} (in-sample, same subperiod as estimation)\n")
    fh.write(f"# compounding: {plan.compounding}; risk: sample std (n-1) of subperiod returns\n")
    fh.write(f"# u_horizon: {plan.u_horizon}; split_rule: {solver.SPLIT_RULE}\n")
    cols = (["M-VP"] if "mvp" in plan.models else []) + (list(plan.categories) if "mdccp" in plan.models else [])
    for metric, title in (("cumulative", "Cumulative expected return"), ("risk_adjusted", "Risk-adjusted cumulative return")):
        fh.write(f"\n## {title}\n")
        fh.write("\t".join(["u", "panel", *cols]) + "\n")
        for u in plan.targets:
            for p in report.panels:
                row = []
                if "mvp" in plan.models:
                    row.append(_cell(report.get(p, MVP, None, u), metric, digits))
                if "mdccp" in plan.models:
                    row.extend(_cell(report.get(p, MDCCP, c, u), metric, digits) for c in plan.categories)
                fh.write("\t".join([repr(u), p, *row]) + "\n")
        if "mvp" in plan.models and "mdccp" in plan.models:
            fh.write("\n# M-DCCP wins over M-VP\n")
            for u, (wins, total, frac) in report.win_counts(metric).items():
                fh.write(f"u={u!r}\t{wins}/{total}\t{100 * wins / total:.2f}%\n")


def _cell(res: ConfigResult, metric: str, digits: int) -> str:
    if res.failure:
        return FAILED
    return _fmt(getattr(res, metric), digits)


def write_long(report: BacktestReport, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["panel", "model", "category", "u", "subperiod", "value"])
    for res in report.results:
        cat = res.category or ""
        if res.failure:
            w.writerow([res.panel, res.model, cat, repr(res.u), "", FAILED])
            continue
        for label, v in zip(report.subperiods[res.panel], res.returns):
            w.writerow([res.panel, res.model, cat, repr(res.u), label, repr(v)])
        for stat in ("cumulative", "risk", "risk_adjusted"):
            v = getattr(res, stat)
            w.writerow([res.panel, res.model, cat, repr(res.u), stat, UNDEFINED if v is None else repr(v)])


def write_series(report: BacktestReport, fh: TextIO) -> None:
    """Per-subperiod expected returns by model, with the cap-weighted index return when known."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["panel", "subperiod", "model", "category", "u", "expected_return", "actual_return"])
    for res in report.results:
        if res.failure:
            continue
        actual = report.actual.get(res.panel)
        for label, v in zip(report.subperiods[res.panel], res.returns):
            act = "unavailable" if actual is None else repr(actual[label])
            w.writerow([res.panel, label, res.model, res.category or "", repr(res.u), repr(v), act])
