"""Augmented Dickey-Fuller unit-root test.

The test regression is ``dy[t] = alpha*y[t-1] + sum_i delta_i*dy[t-i] + e[t]``
with no deterministic terms by default. The statistic ``alpha_hat / se`` is
referred to Fuller's finite-sample tau quantiles (interpolated linearly in
``1/n`` and between quantiles) to obtain a p-value.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError, ValidationError
from .kernels import df_tau_stats

QUANTILES = np.array([0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99])
SAMPLE_SIZES = (25, 50, 100, 250, 500, np.inf)
P_FLOOR, P_CEIL = 0.001, 0.999
DEFAULT_MAX_LAG = 3

# Rows follow SAMPLE_SIZES, columns follow QUANTILES.
TAU_TABLES = {
    "n": np.array([
        [-2.66, -2.26, -1.95, -1.60, 0.92, 1.33, 1.70, 2.16],
        [-2.62, -2.25, -1.95, -1.61, 0.91, 1.31, 1.66, 2.08],
        [-2.60, -2.24, -1.95, -1.61, 0.90, 1.29, 1.64, 2.03],
        [-2.58, -2.23, -1.95, -1.62, 0.89, 1.29, 1.63, 2.01],
        [-2.58, -2.23, -1.95, -1.62, 0.89, 1.28, 1.62, 2.00],
        [-2.58, -2.23, -1.95, -1.62, 0.89, 1.28, 1.62, 2.00],
    ]),
    "c": np.array([
        [-3.75, -3.33, -3.00, -2.63, -0.37, 0.00, 0.34, 0.72],
        [-3.58, -3.22, -2.93, -2.60, -0.40, -0.03, 0.29, 0.66],
        [-3.51, -3.17, -2.89, -2.58, -0.42, -0.05, 0.26, 0.63],
        [-3.46, -3.14, -2.88, -2.57, -0.42, -0.06, 0.24, 0.62],
        [-3.44, -3.13, -2.87, -2.57, -0.43, -0.07, 0.24, 0.61],
        [-3.43, -3.12, -2.86, -2.57, -0.44, -0.07, 0.23, 0.60],
    ]),
    "ct": np.array([
        [-4.38, -3.95, -3.60, -3.24, -1.14, -0.80, -0.50, -0.15],
        [-4.15, -3.80, -3.50, -3.18, -1.19, -0.87, -0.58, -0.24],
        [-4.04, -3.73, -3.45, -3.15, -1.22, -0.90, -0.62, -0.28],
        [-3.99, -3.69, -3.43, -3.13, -1.23, -0.92, -0.64, -0.31],
        [-3.98, -3.68, -3.42, -3.13, -1.24, -0.93, -0.65, -0.32],
        [-3.96, -3.66, -3.41, -3.12, -1.25, -0.94, -0.66, -0.33],
    ]),
}
_N_DETERMINISTIC = {"n": 0, "c": 1, "ct": 2}
_TREND_ORDER = {"n": -1, "c": 0, "ct": 1}
_INV_SIZES = np.array([0.0 if np.isinf(s) else 1.0 / s for s in SAMPLE_SIZES])


@dataclass(frozen=True)
class StationarityVerdict:
    reject_unit_root: bool
    significance_level: float


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    p_value: float
    lag_order: int
    alpha_hat: float
    delta_hats: tuple
    n_effective: int
    regression: str
    verdict: StationarityVerdict
    aic: float = float("nan")

    @property
    def reject_unit_root(self):
        return self.verdict.reject_unit_root


def critical_values(n, regression="n"):
    """Tau quantiles for an effective sample of ``n``.

    Linear in ``1/n`` between tabulated sizes, and extrapolated along the
    25-50 segment for ``n < 25``.
    """
    table = TAU_TABLES[regression]
    x = 1.0 / float(n)
    order = np.argsort(_INV_SIZES)
    inv = _INV_SIZES[order]
    rows = table[order]
    if x <= inv[-1]:
        return np.array([np.interp(x, inv, rows[:, j]) for j in range(table.shape[1])])
    slope = (rows[-1] - rows[-2]) / (inv[-1] - inv[-2])
    return rows[-1] + slope * (x - inv[-1])


def adf_pvalue(statistic, n, regression="n"):
    """Left-tail probability of ``statistic`` under the unit-root null."""
    cv = critical_values(n, regression)
    if statistic < cv[0]:
        slope = (QUANTILES[1] - QUANTILES[0]) / (cv[1] - cv[0])
        p = QUANTILES[0] + slope * (statistic - cv[0])
    elif statistic > cv[-1]:
        slope = (QUANTILES[-1] - QUANTILES[-2]) / (cv[-1] - cv[-2])
        p = QUANTILES[-1] + slope * (statistic - cv[-1])
    else:
        p = np.interp(statistic, cv, QUANTILES)
    return float(np.clip(p, P_FLOOR, P_CEIL))


def _design(y, lag, start, regression):
    """Regressors and response for lag ``lag``, using rows from ``start`` on."""
    dy = np.diff(y)
    m = dy.shape[0]
    rows = m - start
    cols = [y[start:m]]
    if regression in ("c", "ct"):
        cols.append(np.ones(rows))
    if regression == "ct":
        cols.append(np.arange(1.0, rows + 1.0))
    for i in range(1, lag + 1):
        cols.append(dy[start - i:m - i])
    return np.column_stack(cols), dy[start:]


def _ols(X, Y):
    XtX = X.T @ X
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateInputError("ADF regression is rank deficient")
    beta = np.linalg.solve(XtX, X.T @ Y)
    resid = Y - X @ beta
    return beta, resid, XtX


def _check_length(length, lag, regression):
    k = 1 + _N_DETERMINISTIC[regression] + lag
    n_eff = length - 1 - lag
    return length >= lag + 4 and n_eff - k >= 1


def _fit(y, lag, regression):
    X, Y = _design(y, lag, lag, regression)
    beta, resid, XtX = _ols(X, Y)
    n, k = X.shape
    s2 = resid @ resid / (n - k)
    se = np.sqrt(s2 * np.linalg.inv(XtX)[0, 0])
    if not se > 0:
        raise DegenerateInputError("zero standard error for the lagged level")
    stat = beta[0] / se
    aic = n * np.log(resid @ resid / n) + 2 * k
    return float(stat), beta, n, float(aic)


def select_lag(y, max_lag=DEFAULT_MAX_LAG, regression="n"):
    """AIC-minimizing lag in ``0..max_lag``, compared on a common sample.

    Ties go to the smaller lag.
    """
    y = np.asarray(y, dtype=float)
    while max_lag > 0 and not _check_length(y.shape[0], max_lag, regression):
        max_lag -= 1
    best_lag, best_aic = 0, np.inf
    for lag in range(max_lag + 1):
        X, Y = _design(y, lag, max_lag, regression)
        _, resid, _ = _ols(X, Y)
        n, k = X.shape
        rss = float(resid @ resid)
        aic = n * np.log(rss / n) + 2 * k if rss > 0 else -np.inf
        if aic < best_aic - 1e-12:
            best_lag, best_aic = lag, aic
    return best_lag


def adf_test(series, lag_order="auto", significance=0.10, max_lag=DEFAULT_MAX_LAG,
             regression="n"):
    """Run the augmented Dickey-Fuller test.

    Parameters
    ----------
    series : array_like or TransformedSeries
    lag_order : int or "auto"
        Number of lagged differences. ``"auto"`` minimizes AIC over
        ``0..max_lag``.
    significance : float
        Level at which the unit root is rejected (``p < significance``).
    regression : {"n", "c", "ct"}
        Deterministic terms: none (default), constant, constant and trend.

    Returns
    -------
    AdfResult
    """
    if regression not in TAU_TABLES:
        raise ValidationError(f"regression must be one of {sorted(TAU_TABLES)}")
    if not 0.0 < significance < 1.0:
        raise ValidationError("significance must lie in (0, 1)")
    y = np.asarray(getattr(series, "values", series), dtype=float)
    if y.ndim != 1:
        raise ValidationError("series must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise ValidationError("series contains non-finite values")
    if y.shape[0] < 4:
        raise InsufficientDataError(f"need at least 4 observations, got {y.shape[0]}")
    if np.ptp(y) == 0.0:
        raise DegenerateInputError("constant series: the lagged level has no variation")

    if lag_order == "auto":
        lag = select_lag(y, max_lag, regression)
    else:
        lag = int(lag_order)
        if lag < 0:
            raise ValidationError("lag_order must be >= 0")
        if not _check_length(y.shape[0], lag, regression):
            raise InsufficientDataError(
                f"series of length {y.shape[0]} too short for lag {lag}")
    stat, beta, n_eff, aic = _fit(y, lag, regression)
    p = adf_pvalue(stat, n_eff, regression)
    nd = _N_DETERMINISTIC[regression]
    return AdfResult(
        statistic=stat,
        p_value=p,
        lag_order=lag,
        alpha_hat=float(beta[0]),
        delta_hats=tuple(float(v) for v in beta[1 + nd:]),
        n_effective=n_eff,
        regression=regression,
        verdict=StationarityVerdict(bool(p < significance), float(significance)),
        aic=aic,
    )


def format_pvalue(p):
    """Three decimals, or ``"**"`` when ``p < 0.01``."""
    return "**" if p < 0.01 else f"{p:.3f}"


@dataclass(frozen=True)
class AdfTable:
    """p-values keyed by row label then city; rows and cities keep insertion order."""

    rows: tuple
    cities: tuple
    results: dict  # (row, city) -> AdfResult

    def p_value(self, row, city):
        return self.results[(row, city)].p_value

    def rendered(self):
        """Rows of strings: header then one line per row label."""
        lines = [("Factor",) + self.cities]
        for row in self.rows:
            cells = []
            for city in self.cities:
                res = self.results.get((row, city))
                cells.append("" if res is None else format_pvalue(res.p_value))
            lines.append((row,) + tuple(cells))
        return lines


def adf_decision_table(series_by_city, lag_order="auto", significance=0.10,
                       max_lag=DEFAULT_MAX_LAG, regression="n"):
    """ADF p-value for every series of every city.

    ``series_by_city`` maps city code to ``{row label: series}``. Cities are
    reported alphabetically; row labels in first-seen order.
    """
    if not series_by_city or not any(series_by_city.values()):
        raise InsufficientDataError("no series to test")
    cities = tuple(sorted(series_by_city))
    rows = []
    results = {}
    for city in cities:
        for label, series in series_by_city[city].items():
            if label not in rows:
                rows.append(label)
            results[(label, city)] = adf_test(series, lag_order, significance, max_lag, regression)
    return AdfTable(tuple(rows), cities, results)


def simulate_tau_quantiles(n, reps=100_000, regression="n", seed=0, quantiles=QUANTILES,
                           chunk=20_000):
    """Monte Carlo quantiles of the lag-0 tau statistic under a Gaussian random walk."""
    rng = np.random.default_rng(seed)
    draws = []
    remaining = reps
    while remaining > 0:
        m = min(chunk, remaining)
        shocks = rng.standard_normal((m, n))
        draws.append(df_tau_stats(shocks, _TREND_ORDER[regression]))
        remaining -= m
    return np.quantile(np.concatenate(draws), quantiles)
