"""Linear hedonic regression and cross-city significance tallies."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (CollinearityError, DegenerateInputError, InsufficientDataError,
                     ValidationError)

INTERCEPT = "intercept"
_RANK_TOL = 1e-10


def _values(series):
    return np.asarray(getattr(series, "values", series), dtype=float)


def _factor_names(factors, names):
    if names is not None:
        names = tuple(str(n) for n in names)
        if len(names) != len(factors):
            raise ValidationError("one name per factor is required")
        return names
    out = []
    for j, f in enumerate(factors):
        out.append(getattr(f, "source_factor", "") or f"x{j + 1}")
    return tuple(out)


def dependent_columns(X, names, tol=_RANK_TOL):
    """Names of the columns involved in any exact linear dependence."""
    norms = np.linalg.norm(X, axis=0)
    Xs = X / np.where(norms == 0.0, 1.0, norms)
    _, s, vt = np.linalg.svd(Xs, full_matrices=True)
    s = np.concatenate([s, np.zeros(vt.shape[0] - s.shape[0])])
    null = vt[s <= tol * max(s[0], 1.0)]
    involved = np.any(np.abs(null) > 1e-6, axis=0) | (norms == 0.0)
    return tuple(n for n, flag in zip(names, involved) if flag)


@dataclass(frozen=True)
class DesignMatrix:
    """Intercept column followed by one column per factor."""

    matrix: np.ndarray
    factor_names: tuple

    def __post_init__(self):
        X = np.array(self.matrix, dtype=float)
        names = tuple(self.factor_names)
        if X.ndim != 2 or X.shape[1] != len(names) + 1:
            raise ValidationError("design needs an intercept plus one column per factor")
        if not np.all(np.isfinite(X)):
            raise ValidationError("design contains non-finite values")
        tau, p = X.shape
        if not tau > p:
            raise InsufficientDataError(
                f"need more observations than parameters: tau={tau}, m+1={p}")
        if not np.all(X[:, 0] == 1.0):
            raise ValidationError("first column must be the intercept")
        columns = (INTERCEPT,) + names
        for j in range(1, p):
            if np.ptp(X[:, j]) == 0.0:
                raise CollinearityError(
                    f"factor {names[j - 1]!r} is constant", columns=(INTERCEPT, names[j - 1]))
        if np.linalg.matrix_rank(X, tol=_RANK_TOL * np.linalg.norm(X, 2)) < p:
            dep = dependent_columns(X, columns)
            raise CollinearityError(f"design is rank deficient; dependent columns {dep}",
                                    columns=dep)
        X.setflags(write=False)
        object.__setattr__(self, "matrix", X)
        object.__setattr__(self, "factor_names", names)

    @classmethod
    def from_series(cls, factors, names=None):
        if len(factors) == 0:
            raise ValidationError("at least one factor is required")
        cols = [_values(f) for f in factors]
        lengths = {c.shape[0] for c in cols}
        if len(lengths) != 1 or any(c.ndim != 1 for c in cols):
            raise ValidationError("factor series must be one-dimensional and of equal length")
        tau = cols[0].shape[0]
        return cls(np.column_stack([np.ones(tau)] + cols), _factor_names(factors, names))

    @property
    def tau(self):
        return self.matrix.shape[0]

    @property
    def m(self):
        return self.matrix.shape[1] - 1

    @property
    def factors(self):
        return self.matrix[:, 1:]


def _response(response, tau):
    y = _values(response)
    if y.ndim != 1 or y.shape[0] != tau:
        raise ValidationError(f"response length {y.shape[0]} differs from factor length {tau}")
    if not np.all(np.isfinite(y)):
        raise ValidationError("response contains non-finite values")
    return y


def adjusted_r2(r2, tau, model_df):
    """``1 - (1 - R^2)(tau - 1)/(tau - df)``; ``df`` counts the intercept."""
    resid_df = tau - model_df
    if resid_df <= 0:
        return float("nan")
    return 1.0 - (1.0 - r2) * (tau - 1) / resid_df


def r_squared(y, fitted):
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateInputError("response is constant")
    return 1.0 - float(np.sum((y - fitted) ** 2)) / ss_tot


@dataclass(frozen=True)
class RegressionFit:
    """Fields shared by the linear and additive fits."""

    model: str
    factor_names: tuple
    fitted: np.ndarray
    residuals: np.ndarray
    p_values: dict
    r2: float
    adjusted_r2: float
    model_df: float

    @property
    def rss(self):
        return float(self.residuals @ self.residuals)

    @property
    def tau(self):
        return self.fitted.shape[0]


@dataclass(frozen=True)
class GlmFit(RegressionFit):
    beta: np.ndarray = None
    std_errors: np.ndarray = None
    t_stats: np.ndarray = None
    dispersion: float = float("nan")


def ols(X, y):
    """Least squares through a thin QR factorization."""
    Q, R = np.linalg.qr(X)
    beta = np.linalg.solve(R, Q.T @ y)
    fitted = Q @ (Q.T @ y)
    return beta, fitted, R


def fit_glm(response, factors, names=None):
    """Ordinary least squares of the response on an intercept and the factors.

    Parameters
    ----------
    response : TransformedSeries or array_like, length tau
    factors : sequence of TransformedSeries or array_like, each length tau
    names : sequence of str, optional
        Factor names; default to each series' ``source_factor``.

    Returns
    -------
    GlmFit
        p-values are two-sided t-tests on ``tau - m - 1`` degrees of freedom
        and ``dispersion`` is ``RSS / (tau - m - 1)``.

    Raises
    ------
    CollinearityError
        Rank-deficient design; ``err.columns`` names the dependent columns.
    """
    design = factors if isinstance(factors, DesignMatrix) else DesignMatrix.from_series(factors, names)
    X = design.matrix
    y = _response(response, design.tau)
    tau, p = X.shape
    beta, fitted, R = ols(X, y)
    resid = y - fitted
    dof = tau - p
    dispersion = float(resid @ resid) / dof
    Rinv = np.linalg.inv(R)
    se = np.sqrt(dispersion * np.sum(Rinv * Rinv, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.copysign(np.inf, beta))
    pv = 2.0 * stats.t.sf(np.abs(t), dof)
    r2 = r_squared(y, fitted)
    return GlmFit(
        model="glm", factor_names=design.factor_names, fitted=fitted, residuals=resid,
        p_values={n: float(v) for n, v in zip(design.factor_names, pv[1:])},
        r2=r2, adjusted_r2=adjusted_r2(r2, tau, p), model_df=float(p),
        beta=beta, std_errors=se, t_stats=t, dispersion=dispersion,
    )


# --------------------------------------------------------------------------
# significance tallies
# --------------------------------------------------------------------------

def is_significant(p, threshold):
    """``p <= threshold``; printed values on the threshold count, zero admits none."""
    return threshold > 0.0 and p <= threshold


@dataclass(frozen=True)
class SignificanceTable:
    threshold: float
    models: tuple
    cities: tuple
    factors: tuple
    p_values: dict  # (model, city, factor) -> p
    adjusted_r2: dict = field(default_factory=dict)  # (model, city) -> value

    def p_value(self, model, city, factor):
        return self.p_values[(model, city, factor)]

    def city_counts(self, model):
        return {c: sum(is_significant(self.p_values[(model, c, f)], self.threshold)
                       for f in self.factors if (model, c, f) in self.p_values)
                for c in self.cities}

    def factor_counts(self, model):
        return {f: sum(is_significant(self.p_values[(model, c, f)], self.threshold)
                       for c in self.cities if (model, c, f) in self.p_values)
                for f in self.factors}

    def with_threshold(self, threshold):
        return SignificanceTable(float(threshold), self.models, self.cities, self.factors,
                                 self.p_values, self.adjusted_r2)


def significance_summary(fits, threshold=0.10):
    """Tally significant factors per city and per factor, for each model.

    Parameters
    ----------
    fits : mapping
        ``{city: {model: fit}}`` where each fit is a :class:`RegressionFit`
        or a plain ``{factor: p_value}`` mapping.
    threshold : float
        A factor counts as significant when ``p <= threshold``.
    """
    if not fits:
        raise ValidationError("no fits to summarize")
    if threshold < 0 or not math.isfinite(threshold):
        raise ValidationError("threshold must be a finite non-negative number")
    cities = tuple(sorted(fits))
    models, factors = [], []
    pvals, adj = {}, {}
    for city in cities:
        for model, fit in fits[city].items():
            if model not in models:
                models.append(model)
            if isinstance(fit, RegressionFit):
                pv = fit.p_values
                adj[(model, city)] = fit.adjusted_r2
            else:
                pv = fit
            for factor, p in pv.items():
                if factor not in factors:
                    factors.append(factor)
                pvals[(model, city, factor)] = float(p)
    return SignificanceTable(float(threshold), tuple(models), cities, tuple(factors), pvals, adj)
