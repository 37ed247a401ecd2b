"""End-to-end batch pipeline and deterministic table emission."""
import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._compat import USE_JIT
from .adf import AdfTable, adf_test, format_pvalue
from .ararch import select_innovations
from .diagnostics import (DEFAULT_P_CUT, QUADRANT_PROXIES, ResidualMatrix, decay_plot_rows,
                          fit_decay, pca, quadrant_analysis)
from .errors import HedonicError, ValidationError
from .gam import LambdaPolicy, fit_gam
from .panel import CITY_META, builtin_csv_path, load_panel
from .reference_data import FACTORS
from .regression import fit_glm, significance_summary
from .transforms import SHORT_NAMES, apply_plan, plan_transforms, price_returns

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "HEDONIC_ESG_DATA_DIR"
MODELS = ("gam", "glm")
FORMATS = ("csv", "json")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    """Run settings; see :meth:`from_file` for the JSON layout.

    ``data_dir`` falls back to ``$HEDONIC_ESG_DATA_DIR`` and then to the
    panels shipped with the package.
    """

    cities: tuple = ("ATL",)
    data_dir: str = None
    adf_significance: float = 0.10
    adf_lag: object = "auto"
    adf_max_lag: int = 3
    adf_regression: str = "n"
    q_candidates: tuple = (1, 2)
    lambda_policy: str = "gcv"
    tally_threshold: float = 0.10
    quadrant_model: str = "gam"
    water_cut: float = QUADRANT_PROXIES["waterfront"][1]
    seniors_cut: float = QUADRANT_PROXIES["accessible"][1]
    p_cut: float = DEFAULT_P_CUT
    pca_standardize: bool = True
    pca_centered: bool = False
    output_dir: str = None
    formats: tuple = ("csv",)
    workers: int = 1

    def __post_init__(self):
        cities = self.cities
        if isinstance(cities, str):
            cities = [c for c in cities.replace(";", ",").split(",") if c.strip()]
        cities = tuple(str(c).strip().upper() for c in cities)
        if not cities:
            raise ValidationError("cities must not be empty")
        if len(set(cities)) != len(cities):
            raise ValidationError(f"duplicate cities in {cities}")
        object.__setattr__(self, "cities", tuple(sorted(cities)))
        for name in ("adf_significance", "p_cut"):
            v = getattr(self, name)
            if not 0.0 < float(v) < 1.0:
                raise ValidationError(f"{name} must lie in (0, 1), got {v}")
        if not 0.0 <= float(self.tally_threshold) <= 1.0:
            raise ValidationError("tally_threshold must lie in [0, 1]")
        qs = tuple(int(q) for q in self.q_candidates)
        if not qs or any(q < 1 for q in qs):
            raise ValidationError("q_candidates must be a non-empty list of orders >= 1")
        object.__setattr__(self, "q_candidates", qs)
        LambdaPolicy.parse(self.lambda_policy)
        if self.quadrant_model not in MODELS:
            raise ValidationError(f"quadrant_model must be one of {MODELS}")
        formats = (self.formats,) if isinstance(self.formats, str) else tuple(self.formats)
        if not formats or any(f not in FORMATS for f in formats):
            raise ValidationError(f"formats must be drawn from {FORMATS}")
        object.__setattr__(self, "formats", formats)
        if self.adf_lag != "auto":
            object.__setattr__(self, "adf_lag", int(self.adf_lag))
        if int(self.workers) < 1:
            raise ValidationError("workers must be >= 1")

    @classmethod
    def from_file(cls, path, **overrides):
        """Load a JSON object whose keys are field names; ``overrides`` win."""
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a JSON object")
        return cls.from_dict(data, **overrides)

    @classmethod
    def from_dict(cls, data, **overrides):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown config keys {unknown}")
        merged = dict(data)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**merged)

    def with_overrides(self, **overrides):
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def resolved_data_dir(self):
        return self.data_dir or os.environ.get(DATA_DIR_ENV) or None

    def as_dict(self):
        d = asdict(self)
        d["cities"] = list(self.cities)
        d["q_candidates"] = list(self.q_candidates)
        # output location, format and threading do not change results
        for key in ("output_dir", "formats", "workers"):
            d.pop(key)
        d["data_dir"] = self.resolved_data_dir()
        return d

    def digest(self):
        text = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# --------------------------------------------------------------------------
# per-city stage
# --------------------------------------------------------------------------

@dataclass
class CityResult:
    city: str
    panel: object = None
    plan: object = None
    factors: dict = None
    adf: AdfTable = None
    returns: object = None
    selection: object = None
    glm: object = None
    gam: object = None
    warnings: list = field(default_factory=list)
    error: str = None
    failed_stage: str = None

    @property
    def completed(self):
        return self.error is None

    @property
    def innovation_years(self):
        return tuple(int(y) for y in self.selection.series.years)


def _panel_path(config, city):
    data_dir = config.resolved_data_dir()
    if data_dir is None:
        return builtin_csv_path(city)
    return Path(data_dir) / f"{city}.csv"


def adf_rows(panel, factors, returns, innovations):
    """Series tested for one city, keyed by row label."""
    rows = {f"{name} (raw)": panel.column(name) for name in ("av_price",) + tuple(FACTORS)}
    for name, series in factors.items():
        rows[f"{name} ({SHORT_NAMES[series.kind]})"] = series
    rows["av_price (rtn)"] = returns
    if innovations is not None:
        rows["av_price (innov)"] = innovations
    return rows


def run_city(config, city):
    """Every per-city stage; failures are recorded, not raised."""
    res = CityResult(city)
    stage = "ingest"
    try:
        res.panel = load_panel(_panel_path(config, city), city)
        stage = "transform"
        res.plan = plan_transforms(res.panel)
        res.factors = apply_plan(res.panel, res.plan)
        res.returns = price_returns(res.panel)
        stage = "innovate"
        res.selection = select_innovations(res.returns, config.q_candidates,
                                           config.adf_significance, config.adf_lag)
        if not res.selection.stationary:
            res.warnings.append(
                f"{city}: no AR order in {list(config.q_candidates)} gives innovations that "
                f"reject a unit root at {config.adf_significance:g} "
                f"(best p = {res.selection.adf.p_value:.3f}, q = {res.selection.chosen_q})")
        stage = "adf"
        rows = adf_rows(res.panel, res.factors, res.returns, res.selection.series)
        results = {}
        for label, series in rows.items():
            results[(label, city)] = adf_test(series, config.adf_lag, config.adf_significance,
                                              config.adf_max_lag, config.adf_regression)
        res.adf = AdfTable(tuple(rows), (city,), results)
        for name, series in res.factors.items():
            r = results[(f"{name} ({SHORT_NAMES[series.kind]})", city)]
            if not r.reject_unit_root:
                res.warnings.append(
                    f"{city}: transformed {name} does not reject a unit root at "
                    f"{config.adf_significance:g} (p = {r.p_value:.3f}); kept in the regressions")
        stage = "fit"
        facs = [res.factors[f] for f in FACTORS]
        res.glm = fit_glm(res.selection.series, facs)
        res.gam = fit_gam(res.selection.series, facs, config.lambda_policy)
        res.warnings.extend(f"{city}: GAM {w}" for w in res.gam.warnings)
    except (HedonicError, OSError, ZeroDivisionError) as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        res.failed_stage = stage
        logger.error("%s failed at %s: %s", city, stage, exc)
    return res


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

@dataclass
class PipelineReport:
    config: PipelineConfig
    cities: dict  # city -> CityResult
    significance: object = None
    residuals: dict = field(default_factory=dict)  # model -> ResidualMatrix
    pca: dict = field(default_factory=dict)  # model -> PcaResult
    decay: dict = field(default_factory=dict)  # model -> DecayReport
    quadrants: dict = field(default_factory=dict)  # factor -> QuadrantReport
    warnings: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def completed(self):
        return tuple(c for c, r in self.cities.items() if r.completed)

    @property
    def failed(self):
        return tuple(c for c, r in self.cities.items() if not r.completed)

    @property
    def all_completed(self):
        return not self.failed


def provenance(config):
    return {
        "config_sha256": config.digest(),
        "hedonic_esg": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "kernels": "numba" if USE_JIT else "numpy",
    }


def _residual_matrices(done, report):
    years = None
    for r in done:
        ys = set(r.innovation_years)
        years = ys if years is None else years & ys
    years = sorted(years or ())
    if any(len(r.innovation_years) != len(years) for r in done):
        report.warnings.append(
            f"cities cover different years; residual matrices use the {len(years)} shared years")
    out = {}
    for model in MODELS:
        cols = {}
        for r in done:
            fit = getattr(r, model)
            idx = [r.innovation_years.index(y) for y in years]
            cols[r.city] = fit.residuals[idx]
        out[model] = ResidualMatrix.from_columns(cols, years)
    return out


def run_pipeline(config):
    """Run every stage for every configured city.

    Per-city stages are independent and may run on ``config.workers``
    threads; cross-city stages (residual PCA, decay fits, quadrants) run
    afterwards on the cities that completed. Missing files and failed fits
    are recorded per city. PCA needs at least two completed cities and is
    otherwise skipped with a warning.
    """
    if not config.cities:
        raise ValidationError("cities must not be empty")
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda c: run_city(config, c), config.cities))
    else:
        results = [run_city(config, c) for c in config.cities]
    report = PipelineReport(config, {r.city: r for r in results},
                            provenance=provenance(config))
    for r in results:
        report.warnings.extend(r.warnings)
        if r.error:
            report.warnings.append(f"{r.city}: failed at stage {r.failed_stage}: {r.error}")

    done = [r for r in results if r.completed]
    if not done:
        report.warnings.append("no city completed; cross-city stages skipped")
        return report
    report.significance = significance_summary(
        {r.city: {"gam": r.gam, "glm": r.glm} for r in done}, config.tally_threshold)

    if len(done) < 2:
        report.warnings.append(
            f"PCA skipped: needs at least 2 completed cities, have {len(done)}")
    else:
        report.residuals = _residual_matrices(done, report)
        for model, mat in report.residuals.items():
            try:
                report.pca[model] = pca(mat, config.pca_centered, config.pca_standardize)
                report.decay[model] = fit_decay(report.pca[model].explained)
            except HedonicError as exc:
                report.warnings.append(f"{model} PCA/decay skipped: {exc}")

    cuts = {"waterfront": config.water_cut, "accessible": config.seniors_cut}
    with_meta = [r for r in done if r.city in CITY_META]
    missing = sorted(r.city for r in done if r.city not in CITY_META)
    if missing:
        report.warnings.append(f"no census proxies for {missing}; left out of quadrants")
    if with_meta:
        for factor, (attr, _) in QUADRANT_PROXIES.items():
            fits = {r.city: getattr(r, config.quadrant_model) for r in with_meta}
            report.quadrants[factor] = quadrant_analysis(
                {c: f.p_values[factor] for c, f in fits.items()},
                {c: getattr(CITY_META[c], attr) for c in fits},
                cuts[factor], config.p_cut)
    return report


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Table:
    name: str
    header: tuple
    rows: tuple

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()

    def to_records(self):
        return [dict(zip(self.header, row)) for row in self.rows]

    def to_json(self):
        return json.dumps(self.to_records(), indent=2) + "\n"

    def render(self, fmt):
        return self.to_csv() if fmt == "csv" else self.to_json()


def fnum(x, digits=6):
    """Fixed-point text for a float; blank for NaN."""
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.{digits}f}"


def adf_table(adf):
    return Table("adf_decisions", ("series",) + adf.cities,
                 tuple(tuple(row) for row in adf.rendered()[1:]))


def merged_adf(results):
    rows, cities, merged = [], [], {}
    for r in results:
        cities.append(r.city)
        for label in r.adf.rows:
            if label not in rows:
                rows.append(label)
        merged.update(r.adf.results)
    return AdfTable(tuple(rows), tuple(cities), merged)


def significance_table(sig):
    rows = []
    for model in MODELS:
        if model not in sig.models:
            continue
        for factor in sig.factors:
            rows.append((model.upper(), factor) + tuple(
                format_pvalue(sig.p_value(model, c, factor)) for c in sig.cities))
        rows.append((model.upper(), "adj_r2") + tuple(
            fnum(sig.adjusted_r2.get((model, c), float("nan")), 3) for c in sig.cities))
    return Table("significance", ("model", "factor") + sig.cities, tuple(rows))


def tally_tables(sig):
    city_rows = tuple((m.upper(),) + tuple(str(sig.city_counts(m)[c]) for c in sig.cities)
                      for m in MODELS if m in sig.models)
    factor_rows = tuple((m.upper(),) + tuple(str(sig.factor_counts(m)[f]) for f in sig.factors)
                        for m in MODELS if m in sig.models)
    return (Table("tallies_by_city", ("model",) + sig.cities, city_rows),
            Table("tallies_by_factor", ("model",) + sig.factors, factor_rows))


def explained_table(pcas):
    k = max(len(p.explained) for p in pcas.values())
    rows = tuple((m.upper(),) + tuple(fnum(v) for v in pcas[m].explained)
                 for m in MODELS if m in pcas)
    return Table("explained", ("model",) + tuple(f"pc{i}" for i in range(1, k + 1)), rows)


def residual_table(model, mat):
    rows = tuple((str(y),) + tuple(fnum(v) for v in mat.values[i])
                 for i, y in enumerate(mat.year_labels))
    return Table(f"residuals_{model}", ("year",) + mat.city_labels, rows)


def decay_fit_table(decays):
    rows = []
    for model in MODELS:
        if model not in decays:
            continue
        rep = decays[model]
        for fit in (rep.exponential, rep.power):
            params = ";".join(f"{k}={v:.6f}" for k, v in fit.params.items())
            orig = ";".join(f"{k}={v:.6f}" for k, v in fit.orig_params.items())
            rows.append((model.upper(), fit.model, params, fnum(fit.r2), fnum(fit.mse, 8),
                         orig, fnum(fit.orig_r2), fnum(fit.orig_mse, 8), rep.verdict))
    return Table("decay_fits", ("model", "law", "params", "r2", "mse", "orig_params", "orig_r2",
                                "orig_mse", "verdict"), tuple(rows))


def decay_plot_table(model, explained, report):
    rows = tuple((str(i), fnum(f), fnum(lf), fnum(e), fnum(p))
                 for i, f, lf, e, p in decay_plot_rows(explained, report))
    return Table(f"plot_decay_{model}",
                 ("component", "proportion", "ln_proportion", "exponential_fit", "power_fit"), rows)


def quadrant_table(factor, rep):
    rows = tuple((e.city, fnum(e.proxy, 3), format_pvalue(e.p_value), e.quadrant,
                  e.levels[0], e.levels[1]) for e in rep.entries)
    return Table(f"quadrant_{factor}",
                 ("city", "proxy", "p_value", "quadrant", "proxy_level", "p_level"), rows)


def plan_table(results):
    cities = tuple(r.city for r in results)
    rows = [(f,) + tuple(r.plan.short()[f] for r in results) for f in FACTORS]
    rows.append(("q",) + tuple(str(r.selection.chosen_q) for r in results))
    return Table("transform_plan", ("factor",) + cities, tuple(rows))


def innovation_table(city, returns, selection):
    fit = selection.fit
    rows = tuple((str(y), fnum(r, 10), fnum(z, 10), fnum(s, 10))
                 for y, r, z, s in zip(selection.series.years, returns.values,
                                       fit.innovations, fit.sigma))
    return Table(f"innovations_{city}", ("year", "price_return", "innovation", "sigma"), rows)


def fit_table(results, models=MODELS):
    """Per-factor p-value, slope, lambda and edf for each city and model."""
    rows = []
    for res in results:
        for model in models:
            fit = getattr(res, model)
            for factor in fit.factor_names:
                if model == "glm":
                    j = fit.factor_names.index(factor) + 1
                    extra = (fnum(fit.beta[j]), "", "1.000")
                else:
                    sm = fit.smoothers[fit.factor_names.index(factor)]
                    extra = (fnum(sm.linear_slope), f"{sm.lam:.6g}", fnum(sm.edf, 3))
                rows.append((res.city, model.upper(), factor, format_pvalue(fit.p_values[factor]))
                            + extra + (fnum(fit.adjusted_r2, 3),))
    return Table("fits", ("city", "model", "factor", "p_value", "slope", "lambda", "edf",
                          "adj_r2"), tuple(rows))


def report_tables(report):
    """Every table the report supports, in a fixed order."""
    done = [report.cities[c] for c in report.completed]
    tables = []
    if done:
        tables.append(plan_table(done))
        tables.append(adf_table(merged_adf(done)))
        tables.append(fit_table(done))
        tables.append(significance_table(report.significance))
        tables.extend(tally_tables(report.significance))
        tables.extend(innovation_table(r.city, r.returns, r.selection) for r in done)
    for model in MODELS:
        if model in report.residuals:
            tables.append(residual_table(model, report.residuals[model]))
    if report.pca:
        tables.append(explained_table(report.pca))
    if report.decay:
        tables.append(decay_fit_table(report.decay))
        for model, rep in report.decay.items():
            tables.append(decay_plot_table(model, report.pca[model].explained, rep))
    for factor in sorted(report.quadrants):
        tables.append(quadrant_table(factor, report.quadrants[factor]))
    return tables


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _city_record(res):
    if not res.completed:
        return {"error": res.error, "failed_stage": res.failed_stage, "warnings": res.warnings}
    sel = res.selection
    fit = sel.fit
    return {
        "transform_plan": res.plan.short(),
        "adf": {label: {"statistic": r.statistic, "p_value": r.p_value, "lag": r.lag_order,
                        "reject_unit_root": r.reject_unit_root}
                for (label, _), r in res.adf.results.items()},
        "ar_arch": {
            "chosen_q": sel.chosen_q, "stationary": sel.stationary,
            "adf_p_by_q": {str(q): t.p_value for q, t in sel.per_q_adf.items()},
            "params": fit.params, "log_likelihood": fit.log_likelihood,
            "converged": fit.converged, "at_bound": list(fit.at_bound),
            "innovations": fit.innovations, "start_year": sel.series.start_year,
        },
        "glm": {"beta": res.glm.beta, "p_values": res.glm.p_values,
                "adjusted_r2": res.glm.adjusted_r2, "dispersion": res.glm.dispersion},
        "gam": {"intercept": res.gam.intercept, "p_values": res.gam.p_values,
                "adjusted_r2": res.gam.adjusted_r2, "total_edf": res.gam.total_edf,
                "converged": res.gam.converged, "cycles": res.gam.cycles,
                "lambda_policy": res.gam.lambda_policy,
                "smoothers": [s.describe() for s in res.gam.smoothers]},
        "warnings": res.warnings,
    }


def report_dict(report):
    sig = report.significance
    out = {
        "provenance": report.provenance,
        "config": report.config.as_dict(),
        "cities": {c: _city_record(r) for c, r in report.cities.items()},
        "completed": list(report.completed),
        "failed": list(report.failed),
        "warnings": report.warnings,
    }
    if sig is not None:
        out["significance"] = {
            "threshold": sig.threshold,
            "city_counts": {m: sig.city_counts(m) for m in sig.models},
            "factor_counts": {m: sig.factor_counts(m) for m in sig.models},
        }
    out["pca"] = {m: {"explained": p.explained, "eigenvalues": p.eigenvalues,
                      "standardized": p.standardized, "centered": p.centered}
                  for m, p in report.pca.items()}
    out["decay"] = {m: {"verdict": d.verdict, "interpretation": d.interpretation,
                        "exponential": {"params": d.exponential.params, "r2": d.exponential.r2,
                                        "mse": d.exponential.mse},
                        "power": {"params": d.power.params, "r2": d.power.r2,
                                  "mse": d.power.mse}}
                    for m, d in report.decay.items()}
    out["quadrants"] = {f: q.as_dict() for f, q in report.quadrants.items()}
    return _clean(out)


def write_tables(tables, out_dir, formats=("csv",)):
    """Write each table once per format; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for table in tables:
        for fmt in formats:
            path = out / f"{table.name}.{fmt}"
            path.write_text(table.render(fmt))
            written.append(path)
    return written


def emit_tables(report, out_dir=None, formats=None):
    """Write every table plus ``report.json`` to ``out_dir``.

    Output is byte-identical for identical inputs: fixed table order, fixed
    number formatting, sorted JSON keys and no timestamps.
    """
    out_dir = out_dir or report.config.output_dir
    if out_dir is None:
        raise ValidationError("no output directory given")
    formats = tuple(formats or report.config.formats)
    written = write_tables(report_tables(report), out_dir, formats)
    path = Path(out_dir) / "report.json"
    path.write_text(json.dumps(report_dict(report), indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
