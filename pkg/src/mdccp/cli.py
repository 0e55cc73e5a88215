"""Command-line entry point.

Every run writes ``config.json`` next to its outputs; passing it back with
``--config`` reproduces the run (explicit flags override the echoed values).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, backtest, kernels, mfdcca, series, solver, synth
from .errors import MDCCPError

OUT_ENV = "MDCCP_OUT"
RANGE_FLAGS = ("--q", "--s")


def parse_grid(text: str, integer: bool = False) -> list:
    """``lo:hi`` inclusive integer range or a comma list."""
    text = str(text).strip()
    if ":" in text:
        lo, hi = (int(v) for v in text.split(":"))
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    vals = [float(v) for v in text.split(",") if v.strip()]
    if integer or all(v.is_integer() for v in vals):
        return [int(v) for v in vals]
    return vals


def parse_floats(text: str) -> list:
    return [float(v) for v in str(text).split(",") if v.strip()]


def parse_categories(text: str) -> list:
    if str(text).strip().lower() == "all":
        return list(solver.CATEGORIES)
    return [solver.normalize_category(c) for c in str(text).split(",") if c.strip()]


def parse_models(text: str) -> list:
    models = [m.strip().lower() for m in str(text).split(",") if m.strip()]
    bad = [m for m in models if m not in backtest.MODEL_NAMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown model(s) {bad}")
    return models


def _add_detrend(p):
    p.add_argument("--q", default="-20:20", help="fluctuation orders, lo:hi or comma list (default -20:20)")
    p.add_argument("--s", default="3:60", help="scales, lo:hi or comma list (default 3:60)")
    p.add_argument("--tau", type=int, default=None, help="fixed tau: window = int(T/tau); default window = s")
    p.add_argument("--literal-ma", action="store_true", help="divide the l+1 moving-average terms by l")
    p.add_argument("--literal-q0", action="store_true", help="use 1/(4d) in the q=0 log average")


def _add_input(p, many=False):
    p.add_argument("inputs" if many else "input", nargs="*" if many else "?", help="delimited panel file")
    p.add_argument("--prices", action="store_true", help="input holds prices; convert to returns")
    p.add_argument("--return-mode", choices=("log", "simple"), default="log")
    p.add_argument("--missing", default="", help="missing-value marker (default: empty cell)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdccp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    ap.subcommands = sub.choices

    def common(p):
        p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
        p.add_argument("--config", default=None, help="config echo from a previous run")

    p = sub.add_parser("stats", help="descriptive statistics per asset")
    _add_input(p)
    common(p)

    for name, hlp in (("mfdcca", "F(q,s) surfaces for every asset pair"), ("hurst", "H(q) curves for every asset pair")):
        p = sub.add_parser(name, help=hlp)
        _add_input(p)
        _add_detrend(p)
        p.add_argument("--no-self", action="store_true", help="skip i = j pairs")
        common(p)

    p = sub.add_parser("optimize", help="single-panel weights for both models")
    _add_input(p)
    _add_detrend(p)
    p.add_argument("--u", type=float, default=0.05, help="target return")
    p.add_argument("--rf", type=float, default=0.0, help="risk-free rate (affects only the objective value)")
    p.add_argument("--category", default="C-I")
    p.add_argument("--cond-cap", type=float, default=solver.COND_CAP)
    p.add_argument("--repair", action="store_true", help="floor eigenvalues of ill-conditioned risk matrices")
    common(p)

    p = sub.add_parser("backtest", help="subperiod comparison tables")
    _add_input(p, many=True)
    _add_detrend(p)
    p.add_argument("--u", default="0.05,0.15,0.30", help="comma list of target returns")
    p.add_argument("--models", default="mvp,mdccp")
    p.add_argument("--categories", default="all")
    p.add_argument("--rule", default="calendar_year", help="calendar_year or fixed:N")
    p.add_argument("--rf", type=float, default=0.0)
    p.add_argument("--u-horizon", choices=("subperiod", "period"), default="subperiod")
    p.add_argument("--evaluation", choices=("realized", "expected"), default="realized")
    p.add_argument("--compounding", choices=("geometric", "additive"), default="geometric")
    p.add_argument("--cond-cap", type=float, default=solver.COND_CAP)
    p.add_argument("--repair", action="store_true")
    p.add_argument("--caps", nargs="*", default=None, help="market-value files, one per input")
    common(p)

    p = sub.add_parser("synth", help="write a synthetic panel in the input format")
    p.add_argument("--kind", choices=("panel", *synth.KINDS), default="panel")
    p.add_argument("--length", type=int, default=4096, help="series length (non-panel kinds)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=float, default=0.7, help="cascade multiplier")
    p.add_argument("--rho", type=float, default=0.5, help="pair correlation")
    p.add_argument("--n-assets", type=int, default=5)
    p.add_argument("--years", type=int, default=3)
    p.add_argument("--start-year", type=int, default=2015)
    p.add_argument("--name", default="panel", help="output file stem")
    common(p)
    return ap


def _join_negative_ranges(argv: list) -> list:
    # "--q -20:20" would otherwise parse as an unknown flag
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in RANGE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def parse_args(argv):
    argv = _join_negative_ranges(list(argv))
    ap = build_parser()
    ns = ap.parse_args(argv)
    if ns.config:
        with open(ns.config) as fh:
            echo = json.load(fh)
        if echo.get("command") != ns.command:
            ap.error(f"config echo is for {echo.get('command')!r}, not {ns.command!r}")
        ap.subcommands[ns.command].set_defaults(**echo["args"])
        ns = ap.parse_args(argv)
    if getattr(ns, "input", "") is None or getattr(ns, "inputs", [""]) == []:
        ap.error(f"{ns.command}: an input panel file is required")
    return ns


def _detrend(ns) -> mfdcca.DetrendConfig:
    return mfdcca.DetrendConfig(
        tau=ns.tau,
        normalization="literal" if ns.literal_ma else "corrected",
        q_zero_rule="literal" if ns.literal_q0 else "continuous",
    )


def _load(path, ns) -> series.ReturnPanel:
    panel = series.load_panel(path, missing=ns.missing)
    if ns.prices:
        panel = series.prices_to_returns(panel, ns.return_mode)
    return panel


def _echo_args(ns) -> dict:
    args = {k: v for k, v in vars(ns).items() if k not in ("command", "out", "config")}
    for key in ("input",):
        if key in args:
            args[key] = os.path.abspath(args[key])
    if args.get("inputs"):
        args["inputs"] = [os.path.abspath(p) for p in args["inputs"]]
    if args.get("caps"):
        args["caps"] = [os.path.abspath(p) for p in args["caps"]]
    return args


def _write_echo(out: Path, ns, extra=None) -> None:
    echo = {"command": ns.command, "version": __version__, "kernel_backend": kernels.BACKEND, "args": _echo_args(ns)}
    if extra:
        echo["resolved"] = extra
    with open(out / "config.json", "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _outdir(ns) -> Path:
    out = Path(ns.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_stats(ns, out):
    panel = _load(ns.input, ns)
    text = series.format_stats(panel)
    (out / "stats.tsv").write_text(text)
    sys.stdout.write(text)
    _write_echo(out, ns, {"return_mode": ns.return_mode if ns.prices else "as-given", "dropped_rows": panel.dropped_rows})
    return ["stats.tsv"]


def cmd_surfaces(ns, out):
    panel = _load(ns.input, ns)
    q, s = parse_grid(ns.q), parse_grid(ns.s, integer=True)
    cfg = _detrend(ns)
    surfs = mfdcca.pair_surfaces(panel, q, s, cfg, include_self=not ns.no_self)
    fname = "surface.csv" if ns.command == "mfdcca" else "hurst.csv"
    with open(out / fname, "w", newline="") as fh:
        (mfdcca.write_surfaces if ns.command == "mfdcca" else mfdcca.write_hurst)(surfs, fh)
    _write_echo(out, ns, {"q_grid": q, "s_grid": s, "detrend": cfg.as_dict(), "dropped_rows": panel.dropped_rows})
    return [fname]


def cmd_optimize(ns, out):
    panel = _load(ns.input, ns)
    q, s = parse_grid(ns.q), parse_grid(ns.s, integer=True)
    cfg = _detrend(ns)
    spec = solver.build_alpha(ns.category, q, s)
    fld = solver.solve_mdccp(panel, spec, ns.u, cfg, ns.rf, ns.cond_cap, ns.repair)
    mvp = solver.solve_mvp(panel, ns.u, ns.rf, ns.cond_cap, ns.repair)
    echo = {
        "category": spec.category,
        "Q": f"{min(q)}:{max(q)}" if q == list(range(min(q), max(q) + 1)) else q,
        "S": f"{min(s)}:{max(s)}" if s == list(range(min(s), max(s) + 1)) else s,
        "u": ns.u,
        "r_F": ns.rf,
        "detrend": json.dumps(cfg.as_dict(), sort_keys=True),
        "expected_returns": "in-sample per-period mean",
    }
    with open(out / "weights.csv", "w", newline="") as fh:
        solver.write_weights(fld, fh, echo)
        for name, w in zip(panel.assets, mvp.weights):
            fh.write(f"mvp,mvp,{name},{float(w)!r}\n")
    _write_echo(out, ns, {**echo, "alpha": sorted({str(a) for a in spec.alpha.values()})})
    return ["weights.csv"]


def _plan(ns) -> backtest.BacktestPlan:
    rule, length = "calendar_year", None
    if ns.rule.startswith("fixed"):
        rule, length = "fixed_length", int(ns.rule.split(":")[1])
    elif ns.rule != "calendar_year":
        raise argparse.ArgumentTypeError(f"unknown rule {ns.rule!r}")
    return backtest.BacktestPlan(
        rule=rule,
        period_length=length,
        targets=tuple(parse_floats(ns.u)),
        categories=tuple(parse_categories(ns.categories)),
        models=tuple(parse_models(ns.models)),
        q_grid=tuple(parse_grid(ns.q)),
        s_grid=tuple(parse_grid(ns.s, integer=True)),
        config=_detrend(ns),
        r_F=ns.rf,
        return_mode=ns.return_mode,
        u_horizon=ns.u_horizon,
        evaluation=ns.evaluation,
        compounding=ns.compounding,
        cond_cap=ns.cond_cap,
        repair=ns.repair,
    )


def cmd_backtest(ns, out):
    plan = _plan(ns)
    panels, caps = {}, {}
    for k, path in enumerate(ns.inputs):
        name = Path(path).stem
        if name in panels:
            name = f"{name}_{k}"
        panels[name] = _load(path, ns)
        if ns.caps:
            caps[name] = series.load_panel(ns.caps[k], missing=ns.missing)
    report = backtest.run_many(panels, plan, caps or None)
    with open(out / "report.tsv", "w") as fh:
        backtest.write_tables(report, fh)
    with open(out / "report_long.csv", "w", newline="") as fh:
        backtest.write_long(report, fh)
    with open(out / "series.csv", "w", newline="") as fh:
        backtest.write_series(report, fh)
    _write_echo(out, ns, {"plan": plan.as_dict()})
    return ["report.tsv", "report_long.csv", "series.csv"]


def cmd_synth(ns, out):
    if ns.kind == "panel":
        panel = synth.synthetic_panel(ns.n_assets, ns.years, ns.seed, ns.start_year)
    else:
        gen = synth.generate(synth.GeneratorSpec(ns.kind, ns.length, ns.seed, ns.p, ns.rho))
        panel = series.ReturnPanel.from_series(list(gen) if isinstance(gen, tuple) else [gen])
    fname = f"{ns.name}.csv"
    with open(out / fname, "w", newline="") as fh:
        series.write_panel(panel, fh)
    _write_echo(out, ns)
    return [fname]


COMMANDS = {
    "stats": cmd_stats,
    "mfdcca": cmd_surfaces,
    "hurst": cmd_surfaces,
    "optimize": cmd_optimize,
    "backtest": cmd_backtest,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    argv = sys.argv[1:] if argv is None else list(argv)
    ns = parse_args(argv)
    try:
        out = _outdir(ns)
        files = COMMANDS[ns.command](ns, out)
    except (MDCCPError, ValueError, OSError, argparse.ArgumentTypeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    if ns.command != "stats":
        for f in files:
            print(out / f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
