"""AR(q)-ARCH(1) with standardized Student-t errors, fitted by maximum likelihood.

Model, for a return series ``r``::

    r[t] - mu = sum_i phi[i] * (r[t-i] - mu) + eps[t]
    eps[t] = sigma[t] * z[t],   z ~ unit-variance Student-t(nu)
    sigma[t]**2 = omega + alpha * eps[t-1]**2

Deviations before the first observation are taken as zero and
``sigma[0]**2`` is the sample variance of the AR residuals, so the fitted
innovation series ``z`` has the same length as ``r``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_toeplitz
from scipy.optimize import minimize

from .adf import adf_test
from .errors import (DegenerateInputError, InsufficientDataError, NonConvergence,
                     ValidationError)
from .kernels import ar_arch_filter, ar_arch_nll
from .transforms import INNOVATION, TransformedSeries

logger = logging.getLogger(__name__)

MIN_LENGTH = 10
MAX_ITER = 500
GRAD_TOL = 1e-6
NU_BOUNDS = (2.1, 100.0)
LOGIT_ALPHA_BOUND = 15.0
LOG_OMEGA_SPAN = (-25.0, 5.0)  # relative to log of the initial residual variance
START_ALPHAS = (0.05, 0.3)
START_NUS = (5.0, 10.0)
_FD_STEP = 1e-6


@dataclass(frozen=True)
class ArArchSpec:
    q: int = 1
    distribution: str = "student-t"

    def __post_init__(self):
        if self.q < 1:
            raise ValidationError("AR order q must be >= 1")
        if self.distribution != "student-t":
            raise ValidationError("only the standardized Student-t is supported")


@dataclass(frozen=True)
class ArArchFit:
    q: int
    mu_r: float
    phi: tuple
    omega: float
    alpha1: float
    nu: float
    innovations: np.ndarray
    sigma: np.ndarray
    residuals: np.ndarray
    log_likelihood: float
    converged: bool
    start_log_likelihood: float
    gradient_norm: float
    at_bound: tuple = ()
    iterations: int = 0
    message: str = ""

    @property
    def params(self):
        return {"mu_r": self.mu_r, "phi": list(self.phi), "omega": self.omega,
                "alpha1": self.alpha1, "nu": self.nu}


# --------------------------------------------------------------------------
# parameter transforms
# --------------------------------------------------------------------------

def _to_natural(theta, q):
    mu = theta[0]
    phi = np.asarray(theta[1:1 + q], dtype=float)
    omega = np.exp(theta[1 + q])
    alpha = 1.0 / (1.0 + np.exp(-theta[2 + q]))
    nu = 2.0 + np.exp(theta[3 + q])
    return mu, phi, omega, alpha, nu


def _to_transformed(mu, phi, omega, alpha, nu):
    return np.concatenate([[mu], phi, [np.log(omega), np.log(alpha / (1.0 - alpha)),
                                       np.log(nu - 2.0)]])


def _bounds(q, log_var):
    return ([(None, None)] * (1 + q)
            + [(log_var + LOG_OMEGA_SPAN[0], log_var + LOG_OMEGA_SPAN[1]),
               (-LOGIT_ALPHA_BOUND, LOGIT_ALPHA_BOUND),
               (np.log(NU_BOUNDS[0] - 2.0), np.log(NU_BOUNDS[1] - 2.0))])


def negative_log_likelihood(r, mu, phi, omega, alpha, nu):
    """Conditional negative log-likelihood at natural parameters."""
    return float(ar_arch_nll(np.ascontiguousarray(r, dtype=float), float(mu),
                             np.ascontiguousarray(phi, dtype=float), float(omega),
                             float(alpha), float(nu)))


def _mean_nll(theta, r, q):
    mu, phi, omega, alpha, nu = _to_natural(theta, q)
    val = ar_arch_nll(r, mu, phi, omega, alpha, nu) / r.shape[0]
    return val if np.isfinite(val) else 1e10


def _central_grad(fun, theta, *args):
    g = np.empty_like(theta)
    for i in range(theta.shape[0]):
        h = _FD_STEP * max(1.0, abs(theta[i]))
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (fun(up, *args) - fun(dn, *args)) / (2.0 * h)
    return g


def _projected_grad(g, theta, bounds):
    pg = g.copy()
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and theta[i] <= lo + 1e-10 and g[i] > 0:
            pg[i] = 0.0
        if hi is not None and theta[i] >= hi - 1e-10 and g[i] < 0:
            pg[i] = 0.0
    return pg


# --------------------------------------------------------------------------
# initialization
# --------------------------------------------------------------------------

def _initial_mean_params(r, q):
    """Least-squares AR fit; Yule-Walker when the lag design is singular."""
    n = r.shape[0]
    X = np.column_stack([np.ones(n - q)] + [r[q - i:n - i] for i in range(1, q + 1)])
    if np.linalg.matrix_rank(X) == X.shape[1]:
        coef, *_ = np.linalg.lstsq(X, r[q:], rcond=None)
        phi = coef[1:]
        denom = 1.0 - phi.sum()
        mu = coef[0] / denom if abs(denom) > 1e-3 else r.mean()
        return float(mu), phi
    mu = float(r.mean())
    d = r - mu
    acov = np.array([d[: n - k] @ d[k:] / n for k in range(q + 1)])
    if acov[0] <= 0.0:
        return mu, np.zeros(q)
    return mu, solve_toeplitz(acov[:q], acov[1:q + 1])


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------

def _build_fit(r, q, theta, converged, start_ll, gnorm, at_bound, nit, message):
    mu, phi, omega, alpha, nu = _to_natural(theta, q)
    eps, sigma2 = ar_arch_filter(r, mu, phi, omega, alpha)
    sigma = np.sqrt(sigma2)
    return ArArchFit(
        q=q, mu_r=float(mu), phi=tuple(float(p) for p in phi), omega=float(omega),
        alpha1=float(alpha), nu=float(nu), innovations=eps / sigma, sigma=sigma,
        residuals=eps, log_likelihood=-negative_log_likelihood(r, mu, phi, omega, alpha, nu),
        converged=converged, start_log_likelihood=start_ll, gradient_norm=gnorm,
        at_bound=at_bound, iterations=nit, message=message,
    )


def fit_ar_arch(returns, q):
    """Maximum-likelihood AR(q)-ARCH(1)-t fit.

    Four deterministic starts (``alpha1`` in {0.05, 0.3} crossed with ``nu``
    in {5, 10}, mean parameters from least squares) are each refined by
    L-BFGS-B on ``(mu, phi, log omega, logit alpha1, log(nu - 2))`` with
    central-difference gradients; the highest likelihood wins.

    ``converged`` is true when the projected gradient of the mean negative
    log-likelihood (transformed coordinates) is below 1e-6 and no parameter
    sits on a bound.

    Raises
    ------
    InsufficientDataError
        Fewer than 10 returns.
    NonConvergence
        Every start exhausted the iteration budget; ``err.fit`` holds the best.
    """
    spec = ArArchSpec(int(q))
    q = spec.q
    r = np.ascontiguousarray(getattr(returns, "values", returns), dtype=float)
    if r.ndim != 1 or r.shape[0] < MIN_LENGTH:
        raise InsufficientDataError(f"need at least {MIN_LENGTH} returns")
    if not np.all(np.isfinite(r)):
        raise ValidationError("returns must be finite")
    if r.shape[0] <= 2 * q + 3:
        raise InsufficientDataError(f"too few returns for q = {q}")

    mu0, phi0 = _initial_mean_params(r, q)
    eps0, _ = ar_arch_filter(r, mu0, phi0, 1.0, 0.0)
    var0 = float(eps0.var())
    if not var0 > 1e-20 * float(np.mean(r * r)):
        raise DegenerateInputError("AR residuals have zero variance")
    bounds = _bounds(q, np.log(var0))

    best = None
    for alpha0 in START_ALPHAS:
        for nu0 in START_NUS:
            theta0 = _to_transformed(mu0, phi0, var0 * (1.0 - alpha0), alpha0, nu0)
            res = minimize(_mean_nll, theta0, args=(r, q), method="L-BFGS-B",
                           jac=lambda th, *a: _central_grad(_mean_nll, th, *a),
                           bounds=bounds,
                           options={"maxiter": MAX_ITER, "ftol": 1e-15, "gtol": 1e-10,
                                    "maxls": 50})
            start_ll = -_mean_nll(theta0, r, q) * r.shape[0]
            if best is None or res.fun < best[0].fun:
                best = (res, start_ll)

    res, start_ll = best
    theta = res.x
    g = _projected_grad(_central_grad(_mean_nll, theta, r, q), theta, bounds)
    gnorm = float(np.max(np.abs(g)))
    names = ["mu_r"] + [f"phi{i}" for i in range(1, q + 1)] + ["omega", "alpha1", "nu"]
    at_bound = tuple(
        name for name, v, (lo, hi) in zip(names, theta, bounds)
        if (lo is not None and v <= lo + 1e-6) or (hi is not None and v >= hi - 1e-6)
    )
    converged = gnorm < GRAD_TOL and not at_bound
    fit = _build_fit(r, q, theta, converged, float(start_ll), gnorm, at_bound,
                     int(res.nit), str(res.message))
    if res.nit >= MAX_ITER:
        raise NonConvergence(f"AR({q})-ARCH(1) fit hit the {MAX_ITER}-iteration budget", fit=fit)
    if not converged:
        logger.debug("AR(%d)-ARCH(1) fit not interior/flat: bound=%s grad=%.2e",
                     q, at_bound, gnorm)
    return fit


def reconstruct_returns(fit, innovations=None):
    """Run the model forward from ``z`` (default: the fit's own innovations)."""
    z = np.asarray(fit.innovations if innovations is None else innovations, dtype=float)
    n = z.shape[0]
    phi = np.asarray(fit.phi)
    r = np.empty(n)
    eps = np.empty(n)
    for t in range(n):
        s2 = fit.sigma[0] ** 2 if t == 0 else fit.omega + fit.alpha1 * eps[t - 1] ** 2
        eps[t] = np.sqrt(s2) * z[t]
        ar = sum(phi[i - 1] * (r[t - i] - fit.mu_r) for i in range(1, fit.q + 1) if t - i >= 0)
        r[t] = fit.mu_r + ar + eps[t]
    return r


def simulate_ar_arch(n, mu, phi, omega, alpha, nu, seed=0, burn=200):
    """Draw a stationary AR(q)-ARCH(1)-t path of length ``n``."""
    rng = np.random.default_rng(seed)
    phi = np.asarray(phi, dtype=float)
    q = phi.shape[0]
    total = n + burn
    z = rng.standard_t(nu, size=total) * np.sqrt((nu - 2.0) / nu)
    dev = np.zeros(total)
    eps_prev = 0.0
    for t in range(total):
        sigma2 = omega + alpha * eps_prev ** 2
        eps = np.sqrt(sigma2) * z[t]
        dev[t] = sum(phi[i - 1] * dev[t - i] for i in range(1, q + 1) if t - i >= 0) + eps
        eps_prev = eps
    return mu + dev[burn:]


# --------------------------------------------------------------------------
# minimal-q selection
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class InnovationSelection:
    chosen_q: int
    per_q_adf: dict
    fits: dict
    stationary: bool
    threshold: float
    series: TransformedSeries = field(repr=False, default=None)

    @property
    def fit(self):
        return self.fits[self.chosen_q]

    @property
    def adf(self):
        return self.per_q_adf[self.chosen_q]


def select_innovations(returns, q_candidates=(1, 2), adf_threshold=0.10, adf_lag="auto"):
    """Fit increasing AR orders until the innovations pass the ADF test.

    The first ``q`` whose innovation series rejects the unit root at
    ``adf_threshold`` is chosen. If none does, the ``q`` with the lowest ADF
    p-value is returned with ``stationary=False``.
    """
    qs = [int(q) for q in q_candidates]
    if not qs:
        raise ValidationError("q_candidates must not be empty")
    if qs != sorted(qs) or len(set(qs)) != len(qs):
        raise ValidationError("q_candidates must be strictly ascending")
    start_year = getattr(returns, "start_year", 0)

    fits, tests = {}, {}
    chosen = None
    for q in qs:
        fit = fit_ar_arch(returns, q)
        fits[q] = fit
        tests[q] = adf_test(fit.innovations, lag_order=adf_lag, significance=adf_threshold)
        if tests[q].p_value < adf_threshold:
            chosen = q
            break
    stationary = chosen is not None
    if not stationary:
        chosen = min(tests, key=lambda k: (tests[k].p_value, k))
    series = TransformedSeries(fits[chosen].innovations, INNOVATION, "av_price", start_year)
    return InnovationSelection(chosen, tests, fits, stationary, float(adf_threshold), series)
