"""Command-line interface: ``hedonic-esg <subcommand> [options]``."""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import reference_data as ref
from .adf import AdfTable, adf_test
from .ararch import select_innovations
from .diagnostics import QUADRANT_PROXIES, ResidualMatrix, fit_decay, pca, quadrant_analysis
from .errors import HedonicError, ValidationError
from .panel import CITY_META, builtin_residuals, load_panel, serialize_panel
from .pipeline import (DATA_DIR_ENV, FORMATS, PipelineConfig, Table, _panel_path, adf_rows,
                       adf_table, decay_fit_table, decay_plot_table, emit_tables,
                       explained_table, fit_table, fnum, innovation_table,
                       quadrant_table, report_dict, run_city, run_pipeline,
                       write_tables)
from .transforms import SHORT_NAMES, apply_plan, plan_transforms, price_returns

logger = logging.getLogger("hedonic_esg")

EXIT_OK, EXIT_PARTIAL, EXIT_ERROR = 0, 1, 2


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _config(args):
    overrides = {
        "cities": args.cities,
        "data_dir": args.data_dir,
        "output_dir": args.out,
        "formats": (args.format,) if args.format else None,
    }
    for name in ("lambda_policy", "adf_significance", "adf_lag", "p_cut", "workers"):
        overrides[name] = getattr(args, name, None)
    if args.config:
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig.from_dict({}, **overrides)


def _fmt(args, config=None):
    if args.format:
        return args.format
    return config.formats[0] if config is not None else "csv"


def _emit(tables, args, fmt):
    if args.out:
        for path in write_tables(tables, args.out, (fmt,)):
            print(path)
        return
    if fmt == "json":
        payload = {t.name: t.to_records() for t in tables}
        print(json.dumps(payload, indent=2))
        return
    for i, t in enumerate(tables):
        if len(tables) > 1:
            print(("\n" if i else "") + f"# {t.name}")
        sys.stdout.write(t.to_csv())


def read_residual_csv(path):
    """Residual matrix from a CSV with a ``year`` column and one column per city."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0].strip().lower() != "year":
        raise ValidationError("residual CSV must start with a 'year' column")
    cities = [c.strip().upper() for c in rows[0][1:]]
    years = [int(r[0]) for r in rows[1:] if r]
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:] if r])
    order = np.argsort(cities, kind="stable")
    return ResidualMatrix(values[:, order], years, [cities[i] for i in order])


def _residual_sources(spec):
    if spec in (None, "builtin"):
        return {m: builtin_residuals(m) for m in ("glm", "gam")}
    if spec in ("glm", "gam"):
        return {spec: builtin_residuals(spec)}
    return {Path(spec).stem: read_residual_csv(spec)}


def _panels(args, config):
    if getattr(args, "path", None):
        path = Path(args.path)
        city = (args.cities or path.stem).upper()
        return [load_panel(path, city)]
    return [load_panel(_panel_path(config, c), c) for c in config.cities]


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_ingest(args):
    config = _config(args)
    fmt = _fmt(args, config)
    panels = _panels(args, config)
    if fmt == "json" and not args.out:
        print(json.dumps([{"city": p.city_code, "rows": len(p), "first_year": int(p.years[0]),
                           "last_year": int(p.years[-1])} for p in panels], indent=2))
        return EXIT_OK
    for p in panels:
        text = serialize_panel(p)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{p.city_code}.csv").write_text(text)
            print(out / f"{p.city_code}.csv")
        else:
            sys.stdout.write(text)
    return EXIT_OK


def cmd_transform(args):
    config = _config(args)
    tables = []
    for panel in _panels(args, config):
        plan = plan_transforms(panel)
        series = apply_plan(panel, plan)
        years = panel.years[1:]
        header = ("year",) + tuple(f"{f}_{SHORT_NAMES[s.kind]}" for f, s in series.items())
        rows = tuple((str(y),) + tuple(fnum(s.values[i], 10) for s in series.values())
                     for i, y in enumerate(years))
        tables.append(Table(f"transformed_{panel.city_code}", header, rows))
        tables.append(Table(f"plan_{panel.city_code}", ("factor", "kind"),
                            tuple(plan.short().items())))
    _emit(tables, args, _fmt(args, config))
    return EXIT_OK


def cmd_adf(args):
    config = _config(args)
    results, rows, cities = {}, [], []
    for panel in _panels(args, config):
        factors = apply_plan(panel, plan_transforms(panel))
        series = adf_rows(panel, factors, price_returns(panel), None)
        cities.append(panel.city_code)
        for label, s in series.items():
            if label not in rows:
                rows.append(label)
            results[(label, panel.city_code)] = adf_test(
                s, config.adf_lag, config.adf_significance, config.adf_max_lag,
                args.regression or config.adf_regression)
    table = AdfTable(tuple(rows), tuple(cities), results)
    fmt = _fmt(args, config)
    if fmt == "json":
        records = Table("adf", ("series", "city", "statistic", "p_value", "lag", "verdict"), tuple(
            (label, city, r.statistic, r.p_value, r.lag_order,
             "reject" if r.reject_unit_root else "fail to reject")
            for (label, city), r in results.items()))
        _emit([records], args, fmt)
    else:
        _emit([adf_table(table)], args, fmt)
    return EXIT_OK


def cmd_innovate(args):
    config = _config(args)
    tables, summary = [], []
    for panel in _panels(args, config):
        returns = price_returns(panel)
        sel = select_innovations(returns, config.q_candidates, config.adf_significance,
                                 config.adf_lag)
        tables.append(innovation_table(panel.city_code, returns, sel))
        f = sel.fit
        summary.append((panel.city_code, str(sel.chosen_q), "yes" if sel.stationary else "no",
                        fnum(sel.adf.p_value, 3), fnum(f.mu_r), ";".join(fnum(v) for v in f.phi),
                        fnum(f.omega, 8), fnum(f.alpha1), fnum(f.nu, 3),
                        fnum(f.log_likelihood, 4), "yes" if f.converged else "no"))
    tables.insert(0, Table("ar_arch", ("city", "q", "stationary", "adf_p", "mu_r", "phi",
                                       "omega", "alpha1", "nu", "log_likelihood", "converged"),
                           tuple(summary)))
    _emit(tables, args, _fmt(args, config))
    return EXIT_OK


def cmd_fit(args):
    config = _config(args)
    results = [run_city(config, c) for c in config.cities]
    failed = [r for r in results if not r.completed]
    for r in failed:
        print(f"{r.city}: {r.error}", file=sys.stderr)
    done = [r for r in results if r.completed]
    models = ("gam", "glm") if args.model == "both" else (args.model,)
    if done:
        _emit([fit_table(done, models)], args, _fmt(args, config))
    return EXIT_OK if not failed else EXIT_PARTIAL


def cmd_pca(args):
    sources = _residual_sources(args.residuals)
    pcas = {m: pca(mat, centered=args.centered, standardize=not args.raw)
            for m, mat in sources.items()}
    _emit([explained_table_any(pcas)], args, _fmt(args))
    return EXIT_OK


def explained_table_any(pcas):
    if set(pcas) <= {"glm", "gam"}:
        return explained_table(pcas)
    k = max(len(p.explained) for p in pcas.values())
    rows = tuple((name,) + tuple(fnum(v) for v in p.explained) for name, p in pcas.items())
    return Table("explained", ("model",) + tuple(f"pc{i}" for i in range(1, k + 1)), rows)


def _proportions(args):
    if args.proportions:
        vals = [float(v) for v in args.proportions.split(",") if v.strip()]
        return {"input": np.array(vals)}
    if args.residuals is None:
        return {m: np.array(ref.PUBLISHED_EXPLAINED[m])
                for m in ("gam", "glm")}
    return {m: pca(mat).explained for m, mat in _residual_sources(args.residuals).items()}


def cmd_decay(args):
    props = _proportions(args)
    decays = {m: fit_decay(p) for m, p in props.items()}
    tables = [decay_fit_table_any(decays)]
    _emit(tables, args, _fmt(args))
    return EXIT_OK


def decay_fit_table_any(decays):
    if set(decays) <= {"glm", "gam"}:
        return decay_fit_table(decays)
    t = decay_fit_table({"glm": next(iter(decays.values()))})
    name = next(iter(decays))
    return Table(t.name, t.header, tuple((name,) + row[1:] for row in t.rows))


def _quadrant_reports(args):
    factors = tuple(QUADRANT_PROXIES) if args.factor == "both" else (args.factor,)
    pvals = ref.published_pvalues(args.model)
    reports = {}
    for factor in factors:
        attr, default_cut = QUADRANT_PROXIES[factor]
        cut = args.proxy_cut if args.proxy_cut is not None else default_cut
        reports[factor] = quadrant_analysis(
            {c: pvals[c][factor] for c in pvals},
            {c: getattr(CITY_META[c], attr) for c in pvals}, cut, args.p_cut)
    return reports


def cmd_quadrant(args):
    reports = _quadrant_reports(args)
    _emit([quadrant_table(f, r) for f, r in reports.items()], args, _fmt(args))
    return EXIT_OK


def cmd_plot_data(args):
    tables = []
    for model, mat in _residual_sources(args.residuals).items():
        res = pca(mat)
        tables.append(decay_plot_table(model, res.explained, fit_decay(res.explained)))
    args.factor = "both"
    for factor, rep in _quadrant_reports(args).items():
        tables.append(Table(f"plot_quadrant_{factor}", ("city", "proxy", "p_value", "quadrant"),
                            tuple((e.city, fnum(e.proxy, 3), fnum(e.p_value, 3), e.quadrant)
                                  for e in rep.entries)))
    _emit(tables, args, _fmt(args))
    return EXIT_OK


def cmd_run(args):
    config = _config(args)
    report = run_pipeline(config)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if config.output_dir:
        for path in emit_tables(report, config.output_dir, config.formats):
            print(path)
    else:
        print(json.dumps(report_dict(report), indent=2, sort_keys=True))
    return EXIT_OK if report.all_completed else EXIT_PARTIAL


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--config", default=default, help="JSON config file; flags override it")
    g.add_argument("--out", default=default, help="output directory (default: stdout)")
    g.add_argument("--format", choices=FORMATS, default=default, help="table format")
    g.add_argument("--data-dir", default=default,
                   help=f"directory of <CITY>.csv panels (default: ${DATA_DIR_ENV}, "
                        "then the built-in ATL panel)")
    g.add_argument("--cities", default=default, help="comma-separated city codes")
    g.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hedonic-esg",
        description="Hedonic price pipeline: transforms, ADF, AR-ARCH innovations, "
                    "GLM/GAM fits and residual PCA diagnostics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "validate a panel CSV and write it in canonical form")
    p.add_argument("path", nargs="?", help="panel CSV (default: configured cities)")

    p = add("transform", cmd_transform, "plan and apply the stationarizing transforms")
    p.add_argument("path", nargs="?")

    p = add("adf", cmd_adf, "ADF p-values for raw and transformed series")
    p.add_argument("path", nargs="?")
    p.add_argument("--lag", dest="adf_lag", default=None, help="lag order or 'auto'")
    p.add_argument("--significance", dest="adf_significance", type=float, default=None)
    p.add_argument("--regression", choices=("n", "c", "ct"), default=None,
                   help="deterministic terms (default n: none)")

    p = add("innovate", cmd_innovate, "fit AR(q)-ARCH(1)-t and extract price innovations")
    p.add_argument("path", nargs="?")
    p.add_argument("--significance", dest="adf_significance", type=float, default=None)

    p = add("fit", cmd_fit, "fit the GLM and/or GAM per city")
    p.add_argument("--model", choices=("glm", "gam", "both"), default="both")
    p.add_argument("--lambda-policy", dest="lambda_policy", default=None,
                   help="gcv | df:<d> | linear | lambda:<v>")

    p = add("pca", cmd_pca, "explained-variance proportions of a residual matrix")
    p.add_argument("--residuals", default=None,
                   help="glm | gam | path to a year x city CSV (default: both built-in tables)")
    p.add_argument("--raw", action="store_true", help="use R^T R without column scaling")
    p.add_argument("--centered", action="store_true", help="subtract column means first")

    p = add("decay", cmd_decay, "exponential versus power-law fits to explained variance")
    p.add_argument("--residuals", default=None, help="glm | gam | CSV path")
    p.add_argument("--proportions", default=None, help="comma-separated proportions")

    for name, func, text in (("quadrant", cmd_quadrant, "classify cities by proxy and p-value"),
                             ("plot-data", cmd_plot_data, "CSV data behind the decay and "
                                                          "quadrant figures")):
        p = add(name, func, text)
        p.add_argument("--model", choices=("gam", "glm"), default="gam")
        p.add_argument("--p-cut", dest="p_cut", type=float, default=0.10)
        p.add_argument("--proxy-cut", dest="proxy_cut", type=float, default=None)
        if name == "quadrant":
            p.add_argument("--factor", choices=tuple(QUADRANT_PROXIES) + ("both",),
                           default="both")
        else:
            p.add_argument("--residuals", default=None, help="glm | gam | CSV path")

    p = add("run", cmd_run, "full pipeline over the configured cities")
    p.add_argument("--lambda-policy", dest="lambda_policy", default=None)
    p.add_argument("--workers", type=int, default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0) or 0, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (HedonicError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
