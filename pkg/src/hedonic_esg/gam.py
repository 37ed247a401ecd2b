"""Additive model with penalized cubic B-spline smoothers, fitted by backfitting.

Each factor ``x_j`` gets a smoother ``f_j`` built from cubic B-splines with a
knot at every distinct observed value. The penalty is the exact integral of
``f_j''**2``, whose null space is the straight lines, so ``lambda -> inf``
collapses a smoother to a linear term and the whole fit to least squares.

Fitting uses modified backfitting: the linear span of all factors is fitted
jointly by least squares, and each smoother only carries the nonlinear part
left after projecting out ``[1, x_j]``. Every cycle is an exact block
coordinate step on the penalized least-squares objective, which therefore
never increases.
"""
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.interpolate import BSpline

from .errors import DomainError, ValidationError
from .kernels import bspline_basis
from .regression import DesignMatrix, RegressionFit, _response, adjusted_r2, r_squared

logger = logging.getLogger(__name__)

DEGREE = 3
GCV_GRID = np.logspace(8.0, -4.0, 41)  # descending: ties resolve to the smoother fit
BACKFIT_TOL = 1e-8
MAX_CYCLES = 100
MAX_SELECTION_CYCLES = 30
_SV_TOL = 1e-10
_GAUSS = np.array([-1.0, 1.0]) / math.sqrt(3.0)


# --------------------------------------------------------------------------
# lambda policies
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaPolicy:
    """How smoothing parameters are chosen.

    ``gcv``
        generalized cross-validation over a 41-point log grid on
        ``[1e-4, 1e8]``, one smoother at a time with the model-level edf
        in the denominator
    ``df:<d>``
        the ``lambda`` giving each smoother ``d`` effective degrees of freedom
    ``linear``
        ``lambda = inf``; every smoother is a straight line
    ``lambda:<v>``
        the same fixed ``lambda`` for every smoother
    """

    kind: str
    value: float = float("nan")

    @classmethod
    def parse(cls, text):
        if isinstance(text, LambdaPolicy):
            return text
        s = str(text).strip().lower()
        if s in ("gcv", "linear"):
            return cls(s)
        if s in ("force-linear", "inf"):
            return cls("linear")
        m = re.fullmatch(r"(df|fixed-df|lambda)[:(]\s*([^)]+?)\s*\)?", s)
        if m:
            try:
                v = float(m.group(2))
            except ValueError:
                raise ValidationError(f"bad lambda policy {text!r}") from None
            kind = "lambda" if m.group(1) == "lambda" else "df"
            if kind == "df" and not v >= 1.0:
                raise ValidationError("df target must be >= 1")
            if kind == "lambda" and not v >= 0.0:
                raise ValidationError("lambda must be >= 0")
            return cls(kind, v)
        raise ValidationError(f"unknown lambda policy {text!r}; use gcv, df:<d>, linear or lambda:<v>")

    def __str__(self):
        if self.kind in ("gcv", "linear"):
            return self.kind
        return f"{self.kind}:{self.value:g}"


# --------------------------------------------------------------------------
# per-factor basis
# --------------------------------------------------------------------------

def penalty_matrix(knots, degree=DEGREE):
    """Exact ``int B_i''(u) B_k''(u) du`` over the knot range."""
    K = knots.shape[0] - degree - 1
    d2 = BSpline(knots, np.eye(K), degree).derivative(2)
    P = np.zeros((K, K))
    for a, b in zip(knots[:-1], knots[1:]):
        if b <= a:
            continue
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        D = d2(mid + half * _GAUSS)
        P += half * (D.T @ D)
    return 0.5 * (P + P.T)


class SmootherBasis:
    """Spline basis, penalty and nonlinear-part decomposition for one factor."""

    def __init__(self, x, name):
        self.name = name
        self.x = np.asarray(x, dtype=float)
        self.x_min = float(self.x.min())
        self.x_max = float(self.x.max())
        span = self.x_max - self.x_min
        self.u = (self.x - self.x_min) / span
        inner = np.unique(self.u)
        self.knots = np.concatenate([[0.0] * DEGREE, inner, [1.0] * DEGREE])
        self.B = bspline_basis(self.u, self.knots, DEGREE)
        K = self.B.shape[1]
        d, V = np.linalg.eigh(penalty_matrix(self.knots))
        keep = np.argsort(d)[2:]  # drop the two-dimensional linear null space
        self.to_coef = V[:, keep] / np.sqrt(d[keep])
        Z = self.B @ self.to_coef
        L = np.column_stack([np.ones_like(self.u), self.u])
        self.QL, _ = np.linalg.qr(L)
        Zt = Z - self.QL @ (self.QL.T @ Z)
        U, s, Wt = np.linalg.svd(Zt, full_matrices=False)
        rank = int(np.sum(s > _SV_TOL * max(s[0], 1e-300))) if s.size else 0
        self.U, self.s, self.W = U[:, :rank], s[:rank], Wt[:rank].T
        self.Z = Z
        self.n_basis = K

    def weights(self, lam):
        if math.isinf(lam):
            return np.zeros_like(self.s)
        s2 = self.s ** 2
        return s2 / (s2 + lam)

    def edf(self, lam):
        """Trace of the full smoother minus one for centering."""
        return 1.0 + float(np.sum(self.weights(lam)))

    def smooth(self, p, lam):
        """Nonlinear fitted part and penalized coefficients for residual ``p``."""
        if math.isinf(lam):
            return np.zeros_like(p), np.zeros(self.W.shape[0])
        a = self.U.T @ p
        w = self.weights(lam)
        coef = self.W @ (self.s / (self.s ** 2 + lam) * a)
        return self.U @ (w * a), coef

    def gcv_lambda(self, p, other_edf=0.0, grid=GCV_GRID):
        """Grid minimizer of ``n * RSS / (n - total_edf)**2`` for residual ``p``.

        ``other_edf`` is the intercept plus the edf of every other smoother, so
        the score is the model-level criterion with the rest held fixed.
        """
        n = p.shape[0]
        a = self.U.T @ p
        base = float(p @ p) - float(a @ a)
        best_lam, best = grid[0], np.inf
        for lam in grid:
            w = self.weights(lam)
            rss = base + float(np.sum(((1.0 - w) * a) ** 2))
            denom = n - other_edf - 1.0 - float(np.sum(w))
            if denom <= 1.0:
                continue
            score = n * max(rss, 0.0) / denom ** 2
            if score < best * (1.0 - 1e-12):
                best_lam, best = float(lam), score
        return best_lam

    def lambda_for_edf(self, target):
        """Smoothing parameter giving ``edf == target`` (bisection in log lambda)."""
        max_edf = self.edf(0.0)
        if target <= 1.0:
            return math.inf
        if target >= max_edf:
            return 0.0
        lo, hi = -12.0, 16.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.edf(10.0 ** mid) > target:
                lo = mid
            else:
                hi = mid
        return 10.0 ** (0.5 * (lo + hi))

    def greville(self):
        t = self.knots
        return np.array([t[i + 1:i + 1 + DEGREE].mean() for i in range(self.n_basis)])


# --------------------------------------------------------------------------
# fit containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Smoother:
    """One fitted smooth term, centered to mean zero over the sample.

    ``coefficients`` are cubic B-spline coefficients on ``knots``, which live
    on the factor rescaled to ``[0, 1]``.
    """

    factor: str
    x_min: float
    x_max: float
    knots: np.ndarray
    coefficients: np.ndarray
    lam: float
    edf: float
    component: np.ndarray
    linear_slope: float

    @property
    def basis_size(self):
        return self.coefficients.shape[0]

    def evaluate(self, x):
        """Component value at ``x`` inside the observed range."""
        x = np.asarray(x, dtype=float)
        if np.any(x < self.x_min - 1e-12) or np.any(x > self.x_max + 1e-12):
            raise DomainError("smoothers are not evaluated outside the fitted range")
        u = np.clip((x - self.x_min) / (self.x_max - self.x_min), 0.0, 1.0)
        return BSpline(self.knots, self.coefficients, DEGREE)(u)

    def describe(self):
        return {"factor": self.factor, "basis": f"cubic B-spline, {self.basis_size} functions",
                "lambda": self.lam, "edf": self.edf}


@dataclass(frozen=True)
class SmoothTest:
    f_stat: float
    df1: float
    df2: float
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class GamFit(RegressionFit):
    intercept: float = float("nan")
    smoothers: tuple = ()
    total_edf: float = float("nan")
    converged: bool = False
    cycles: int = 0
    objective_history: tuple = ()
    lambda_policy: str = "gcv"
    tests: dict = field(default_factory=dict)
    warnings: tuple = ()

    @property
    def lambdas(self):
        return tuple(s.lam for s in self.smoothers)

    @property
    def edfs(self):
        return tuple(s.edf for s in self.smoothers)


# --------------------------------------------------------------------------
# backfitting
# --------------------------------------------------------------------------

def _objective(y, lin, g, coefs, lams):
    r = y - lin - g.sum(axis=0)
    pen = sum(lam * float(c @ c) for lam, c in zip(lams, coefs) if not math.isinf(lam))
    return float(r @ r) + pen


def _sweep_order(bases):
    # smoothers visit in factor-name order, so column order cannot matter
    return sorted(range(len(bases)), key=lambda j: (bases[j].name, j))


def _backfit(y, Q, bases, lams, g, coefs, tol, max_cycles):
    """Fixed-lambda cycles; returns (lin, g, coefs, history, cycles, converged)."""
    total = g.sum(axis=0)
    lin = Q @ (Q.T @ (y - total))
    history = [_objective(y, lin, g, coefs, lams)]
    converged = False
    cycles = 0
    for cycles in range(1, max_cycles + 1):
        new_lin = Q @ (Q.T @ (y - total))
        change = float(np.max(np.abs(new_lin - lin)))
        lin = new_lin
        for j in _sweep_order(bases):
            basis = bases[j]
            partial = y - lin - (total - g[j])
            new, coefs[j] = basis.smooth(partial, lams[j])
            change = max(change, float(np.max(np.abs(new - g[j]))))
            total += new - g[j]
            g[j] = new
        history.append(_objective(y, lin, g, coefs, lams))
        if change < tol:
            converged = True
            break
    lin = Q @ (Q.T @ (y - g.sum(axis=0)))
    return lin, g, coefs, history, cycles, converged


def _select_gcv(y, Q, bases, g, coefs):
    """Cycle with per-smoother GCV until the chosen lambdas repeat."""
    lams = [math.inf] * len(bases)
    total = g.sum(axis=0)
    for _ in range(MAX_SELECTION_CYCLES):
        previous = list(lams)
        lin = Q @ (Q.T @ (y - total))
        for j in _sweep_order(bases):
            basis = bases[j]
            partial = y - lin - (total - g[j])
            others = 1.0 + sum(b.edf(lams[k]) for k, b in enumerate(bases) if k != j)
            lams[j] = basis.gcv_lambda(partial, others)
            new, coefs[j] = basis.smooth(partial, lams[j])
            total += new - g[j]
            g[j] = new
        if lams == previous:
            break
    return lams


def _initial_lambdas(policy, bases):
    if policy.kind == "linear":
        return [math.inf] * len(bases)
    if policy.kind == "lambda":
        return [policy.value] * len(bases)
    if policy.kind == "df":
        return [b.lambda_for_edf(policy.value) for b in bases]
    return None


def _fit_core(y, design, bases, policy, fixed_lams=None, tol=BACKFIT_TOL, max_cycles=MAX_CYCLES):
    X = design.matrix
    Q, R = np.linalg.qr(X)
    n = y.shape[0]
    g = np.zeros((len(bases), n))
    coefs = [np.zeros(b.W.shape[0]) for b in bases]
    if fixed_lams is not None:
        lams = list(fixed_lams)
    else:
        lams = _initial_lambdas(policy, bases)
        if lams is None:
            lams = _select_gcv(y, Q, bases, g, coefs)
    lin, g, coefs, history, cycles, converged = _backfit(y, Q, bases, lams, g, coefs,
                                                         tol, max_cycles)
    beta = np.linalg.solve(R, Q.T @ (y - g.sum(axis=0)))
    return lams, lin, g, coefs, beta, history, cycles, converged


def _smoothers(design, bases, lams, g, coefs, beta):
    out = []
    for j, basis in enumerate(bases):
        slope = float(beta[j + 1])
        xbar = float(basis.x.mean())
        comp = slope * (basis.x - xbar) + g[j]
        theta = basis.to_coef @ coefs[j] if coefs[j].size else np.zeros(basis.n_basis)
        # remove the [1, u] part of the raw spline and add the centered line
        zc = basis.Z @ coefs[j] if coefs[j].size else np.zeros_like(basis.u)
        L = np.column_stack([np.ones_like(basis.u), basis.u])
        (a0, a1), *_ = np.linalg.lstsq(L, zc, rcond=None)
        span = basis.x_max - basis.x_min
        theta = (theta + (slope * (basis.x_min - xbar) - a0)
                 + (slope * span - a1) * basis.greville())
        out.append(Smoother(
            factor=basis.name, x_min=basis.x_min, x_max=basis.x_max,
            knots=basis.knots.copy(), coefficients=theta, lam=float(lams[j]),
            edf=basis.edf(lams[j]), component=comp, linear_slope=slope,
        ))
    return tuple(out)


def _build(y, design, bases, policy, fixed_lams=None, with_tests=True):
    lams, lin, g, coefs, beta, history, cycles, converged = _fit_core(
        y, design, bases, policy, fixed_lams)
    fitted = lin + g.sum(axis=0)
    resid = y - fitted
    smoothers = _smoothers(design, bases, lams, g, coefs, beta)
    total_edf = 1.0 + sum(s.edf for s in smoothers)
    intercept = float(beta[0] + sum(s.linear_slope * float(b.x.mean())
                                    for s, b in zip(smoothers, bases)))
    r2 = r_squared(y, fitted)
    warnings = []
    if not converged:
        warnings.append(f"backfitting stopped after {cycles} cycles without converging")
    if y.shape[0] - total_edf <= 0:
        warnings.append("effective degrees of freedom exhaust the sample")
    fit = GamFit(
        model="gam", factor_names=design.factor_names, fitted=fitted, residuals=resid,
        p_values={}, r2=r2, adjusted_r2=adjusted_r2(r2, y.shape[0], total_edf),
        model_df=total_edf, intercept=intercept, smoothers=smoothers, total_edf=total_edf,
        converged=converged, cycles=cycles, objective_history=tuple(history),
        lambda_policy=str(policy), warnings=tuple(warnings),
    )
    if not with_tests:
        return fit
    tests = _drop_one_tests(y, design, bases, fit)
    p_values = {name: t.p_value for name, t in tests.items()}
    return _replace(fit, p_values=p_values, tests=tests)


def _replace(fit, **changes):
    values = {f: getattr(fit, f) for f in fit.__dataclass_fields__}
    values.update(changes)
    return GamFit(**values)


def fit_gam(response, factors, lambda_policy="gcv", names=None):
    """Fit ``y = beta_0 + sum_j f_j(x_j) + e`` with penalized spline smoothers.

    Parameters
    ----------
    response : TransformedSeries or array_like, length tau
    factors : sequence of TransformedSeries or array_like
    lambda_policy : str or LambdaPolicy
        ``"gcv"`` (default), ``"df:<d>"``, ``"linear"`` or ``"lambda:<v>"``.
    names : sequence of str, optional

    Returns
    -------
    GamFit
        Backfitting runs until no fitted component moves by more than 1e-8,
        or 100 cycles; non-convergence is reported in ``warnings`` rather
        than raised. p-values come from :func:`gam_significance`.
    """
    policy = LambdaPolicy.parse(lambda_policy)
    design = factors if isinstance(factors, DesignMatrix) else DesignMatrix.from_series(factors, names)
    y = _response(response, design.tau)
    bases = [SmootherBasis(design.factors[:, j], design.factor_names[j]) for j in range(design.m)]
    fit = _build(y, design, bases, policy)
    for w in fit.warnings:
        logger.warning("GAM: %s", w)
    return fit


def _drop_one_tests(y, design, bases, fit):
    tau = y.shape[0]
    rss_full = fit.rss
    df2 = tau - fit.total_edf
    tests = {}
    for j, name in enumerate(design.factor_names):
        keep = [k for k in range(design.m) if k != j]
        if keep:
            sub = DesignMatrix(design.matrix[:, [0] + [k + 1 for k in keep]],
                               tuple(design.factor_names[k] for k in keep))
            reduced = _build(y, sub, [bases[k] for k in keep], LambdaPolicy("lambda", 0.0),
                             fixed_lams=[fit.smoothers[k].lam for k in keep], with_tests=False)
            rss_drop, edf_drop = reduced.rss, reduced.total_edf
        else:
            rss_drop, edf_drop = float(np.sum((y - y.mean()) ** 2)), 1.0
        df1 = fit.total_edf - edf_drop
        if df1 <= 1e-10 or df2 <= 0.0 or rss_full <= 0.0:
            tests[name] = SmoothTest(float("nan"), df1, df2, 1.0, degenerate=True)
            continue
        F = max(rss_drop - rss_full, 0.0) / df1 / (rss_full / df2)
        tests[name] = SmoothTest(float(F), float(df1), float(df2), float(stats.f.sf(F, df1, df2)))
    return tests


def gam_significance(fit, response, factors, names=None):
    """Drop-one approximate F-tests for every smooth term.

    The model without factor ``j`` is refitted with the other smoothing
    parameters held at their full-model values, and
    ``F = ((RSS_drop - RSS_full)/(edf_full - edf_drop)) / (RSS_full/(tau - edf_full))``.
    A non-positive edf difference gives ``p = 1`` with ``degenerate=True``.

    Returns
    -------
    dict
        ``{factor: SmoothTest}``.
    """
    if not fit.converged:
        logger.warning("GAM significance computed on a fit that did not converge")
    design = factors if isinstance(factors, DesignMatrix) else DesignMatrix.from_series(
        factors, names or fit.factor_names)
    y = _response(response, design.tau)
    bases = [SmootherBasis(design.factors[:, j], design.factor_names[j]) for j in range(design.m)]
    return _drop_one_tests(y, design, bases, fit)
