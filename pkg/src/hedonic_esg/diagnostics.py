"""Cross-city residual diagnostics.

Principal components of the stacked residual matrix, exponential versus
power-law decay of the explained-variance sequence, and the two-threshold
quadrant classification of cities by a census proxy and a factor p-value.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import DomainError, InsufficientDataError, ValidationError
from .kernels import jacobi_eigh, jacobi_eigh_numpy

EIG_TOL = 1e-12
EIG_MAX_SWEEPS = 100
NEG_EIG_CLAMP = 1e-10
# below this many cities the vectorized solver beats compiling the loop kernel
JIT_MIN_CITIES = 32


@dataclass(frozen=True)
class ResidualMatrix:
    """Residuals with one row per year and one column per city."""

    values: np.ndarray
    year_labels: tuple
    city_labels: tuple

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValidationError("residual matrix must be two-dimensional")
        years = tuple(int(y) for y in self.year_labels)
        cities = tuple(str(c) for c in self.city_labels)
        if vals.shape != (len(years), len(cities)):
            raise ValidationError(
                f"shape {vals.shape} does not match {len(years)} years x {len(cities)} cities")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("residual matrix contains non-finite entries")
        if list(cities) != sorted(cities):
            raise ValidationError("city columns must be in alphabetical order")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "year_labels", years)
        object.__setattr__(self, "city_labels", cities)

    @classmethod
    def from_columns(cls, columns, year_labels):
        """Build from ``{city: residual vector}``; columns are sorted by city."""
        cities = sorted(columns)
        vals = np.column_stack([np.asarray(columns[c], dtype=float) for c in cities])
        return cls(vals, tuple(year_labels), tuple(cities))

    @property
    def shape(self):
        return self.values.shape

    def column(self, city):
        return self.values[:, self.city_labels.index(city)]

    def __getitem__(self, key):
        year, city = key
        return float(self.values[self.year_labels.index(int(year)), self.city_labels.index(city)])


@dataclass(frozen=True)
class PcaResult:
    eigenvalues: np.ndarray
    components: np.ndarray  # columns are unit eigenvectors
    explained: np.ndarray
    centered: bool
    standardized: bool
    sweeps: int


def _prepare(values, centered, standardize):
    X = np.array(values, dtype=float)
    if centered:
        X = X - X.mean(axis=0)
    if standardize:
        norms = np.sqrt(np.sum(X * X, axis=0))
        if np.any(norms == 0.0):
            raise ValidationError("cannot standardize an all-zero residual column")
        X = X / norms
    return X


def pca(residuals, centered=False, standardize=True):
    """Eigen-decompose the residual cross-product matrix.

    Parameters
    ----------
    residuals : ResidualMatrix or array_like, shape (years, cities)
    centered : bool
        Subtract column means first. Residuals are already close to mean zero.
    standardize : bool
        Scale each column to unit norm, so the cross-product matrix is a
        correlation-type matrix and every city carries equal weight. With
        ``False`` the raw ``R.T @ R`` is used.

    Returns
    -------
    PcaResult
        Eigenvalues in descending order (tiny negatives clamped to zero),
        orthonormal eigenvectors, and each eigenvalue's share of the total.
    """
    values = residuals.values if isinstance(residuals, ResidualMatrix) else np.asarray(residuals, float)
    if values.ndim != 2:
        raise ValidationError("residuals must be a 2-D matrix")
    if not np.all(np.isfinite(values)):
        raise ValidationError("residual matrix contains non-finite entries")
    n_obs, k = values.shape
    if not n_obs >= k >= 2:
        raise InsufficientDataError(f"need years >= cities >= 2, got shape {values.shape}")

    X = _prepare(values, centered, standardize)
    cross = X.T @ X
    cross = 0.5 * (cross + cross.T)
    solver = jacobi_eigh if k >= JIT_MIN_CITIES else jacobi_eigh_numpy
    w, V, sweeps = solver(np.ascontiguousarray(cross), EIG_TOL, EIG_MAX_SWEEPS)
    scale = max(float(np.max(np.abs(w))), 1.0)
    if np.any(w < -NEG_EIG_CLAMP * scale):
        raise ValidationError(f"cross-product matrix has a negative eigenvalue {w.min():.3e}")
    w = np.where(w < 0.0, 0.0, w)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = V[:, order]
    # deterministic sign: largest-magnitude loading positive
    pivots = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivots, np.arange(k)])
    V = V * np.where(signs == 0, 1.0, signs)
    total = w.sum()
    if total <= 0.0:
        raise ValidationError("residual matrix is identically zero")
    return PcaResult(w, V, w / total, centered, standardize, int(sweeps))


# --------------------------------------------------------------------------
# Decay-law discrimination
# --------------------------------------------------------------------------

_ZETA_TERMS = 64


def zeta(b):
    """Riemann zeta function for real ``b > 1``.

    Sums the first 63 terms directly and adds the Euler-Maclaurin tail
    (integral, half-term and three derivative corrections); the remainder is
    below 1e-14 for every ``b > 1``.
    """
    b = float(b)
    if not b > 1.0:
        raise DomainError(f"zeta(b) needs b > 1, got {b}")
    N = _ZETA_TERMS
    head = math.fsum(x ** -b for x in range(1, N))
    tail = (N ** (1.0 - b) / (b - 1.0)
            + 0.5 * N ** -b
            + b * N ** (-b - 1.0) / 12.0
            - b * (b + 1.0) * (b + 2.0) * N ** (-b - 3.0) / 720.0
            + b * (b + 1.0) * (b + 2.0) * (b + 3.0) * (b + 4.0) * N ** (-b - 5.0) / 30240.0)
    return head + tail


@dataclass(frozen=True)
class DecayFit:
    """Two-parameter decay curve fitted to an explained-variance sequence.

    ``r2``, ``mse`` and ``fitted_curve`` come from the straight-line fit in log
    space (``ln f`` against ``x`` or ``ln x``). ``orig_*`` hold the same curve
    refined by least squares on the untransformed proportions.
    """

    model: str
    params: dict
    r2: float
    mse: float
    fitted_curve: np.ndarray
    orig_params: dict = field(default_factory=dict)
    orig_r2: float = float("nan")
    orig_mse: float = float("nan")
    orig_curve: np.ndarray = None


@dataclass(frozen=True)
class DecayReport:
    exponential: DecayFit
    power: DecayFit
    verdict: str

    @property
    def interpretation(self):
        if self.verdict == "exponential":
            return "systemic factors continue to be unaccounted for"
        return "noise dominates the residuals"


def _r2(obs, fit):
    ss_res = float(np.sum((obs - fit) ** 2))
    ss_tot = float(np.sum((obs - obs.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)


def _params(model, amplitude, rate):
    if model == "exponential":
        return {"A": amplitude, "c": rate, "beta": 1.0 - rate}
    return {"A": amplitude, "b": rate}


def _curve(model, x, amplitude, rate):
    if model == "exponential":
        return amplitude * rate ** x
    return amplitude * x ** (-rate)


def _fit_one(model, x, f):
    lf = np.log(f)
    regressor = x if model == "exponential" else np.log(x)
    D = np.column_stack([np.ones_like(regressor), regressor])
    (intercept, slope), *_ = np.linalg.lstsq(D, lf, rcond=None)
    amplitude = math.exp(intercept)
    rate = math.exp(slope) if model == "exponential" else -slope
    log_fit = intercept + slope * regressor
    fitted = np.exp(log_fit)

    def resid(p):
        return _curve(model, x, p[0], p[1]) - f

    refined = least_squares(resid, x0=[amplitude, rate], method="lm", xtol=1e-15, ftol=1e-15)
    a2, r2_rate = (float(v) for v in refined.x)
    orig = _curve(model, x, a2, r2_rate)
    return DecayFit(
        model=model,
        params=_params(model, amplitude, rate),
        r2=_r2(lf, log_fit),
        mse=float(np.mean((lf - log_fit) ** 2)),
        fitted_curve=fitted,
        orig_params=_params(model, a2, r2_rate),
        orig_r2=_r2(f, orig),
        orig_mse=float(np.mean((f - orig) ** 2)),
        orig_curve=orig,
    )


def fit_decay(explained):
    """Fit ``A*c**x`` and ``A*x**-b`` to proportions indexed ``x = 1..K``.

    The verdict is the model whose log-space line fits better (higher R^2);
    exponential decay means systematic structure is left in the residuals,
    power-law decay means they are mostly noise.
    """
    f = np.asarray(explained, dtype=float)
    if f.ndim != 1 or f.size < 4:
        raise InsufficientDataError("need at least 4 proportions")
    if not np.all(np.isfinite(f)) or np.any(f <= 0.0):
        raise DomainError("proportions must be finite and strictly positive")
    x = np.arange(1.0, f.size + 1.0)
    exp_fit = _fit_one("exponential", x, f)
    pow_fit = _fit_one("power", x, f)
    verdict = "exponential" if exp_fit.r2 >= pow_fit.r2 else "power"
    return DecayReport(exp_fit, pow_fit, verdict)


def relative_change(model, param, x):
    """Relative drop ``(f(x+1) - f(x)) / f(x)`` of the two decay laws.

    ``model="exponential"`` takes ``param = beta`` in (0, 1) and returns
    ``-beta`` for every ``x``; ``model="power"`` takes ``param = b > 1`` and
    returns ``(x / (1 + x))**b - 1``.
    """
    if x < 1:
        raise DomainError(f"x must be >= 1, got {x}")
    if model == "exponential":
        if not 0.0 < param < 1.0:
            raise DomainError(f"beta must lie in (0, 1), got {param}")
        return -float(param)
    if model == "power":
        if not param > 1.0:
            raise DomainError(f"b must be > 1, got {param}")
        return (x / (1.0 + x)) ** param - 1.0
    raise DomainError(f"unknown decay model {model!r}")


def decay_plot_rows(explained, report):
    """Rows of (component_index, proportion, ln_proportion, exp_fit, pow_fit)."""
    f = np.asarray(explained, dtype=float)
    return [
        (i + 1, float(f[i]), math.log(f[i]),
         float(report.exponential.fitted_curve[i]), float(report.power.fitted_curve[i]))
        for i in range(f.size)
    ]


# --------------------------------------------------------------------------
# Quadrant classification
# --------------------------------------------------------------------------

# proxy attribute on CityMeta and its default cut, per factor
QUADRANT_PROXIES = {
    "waterfront": ("water_area_pct", 2.45),
    "accessible": ("seniors_alone_pct", 6.0),
}
DEFAULT_P_CUT = 0.10


@dataclass(frozen=True)
class QuadrantEntry:
    city: str
    proxy: float
    p_value: float
    quadrant: str  # two letters: proxy level then p-value level, e.g. "LH"

    @property
    def levels(self):
        names = {"L": "low", "H": "high"}
        return names[self.quadrant[0]], names[self.quadrant[1]]


@dataclass(frozen=True)
class QuadrantReport:
    entries: tuple
    proxy_cut: float
    p_cut: float

    def members(self, quadrant):
        return tuple(e.city for e in self.entries if e.quadrant == quadrant)

    def as_dict(self):
        return {e.city: e.quadrant for e in self.entries}


def quadrant_analysis(p_values, proxy, proxy_cut, p_cut=DEFAULT_P_CUT):
    """Label each city by (proxy >= proxy_cut, p >= p_cut) as L/H pairs."""
    missing = set(p_values) ^ set(proxy)
    if missing:
        raise ValidationError(f"city sets differ; unmatched: {sorted(missing)}")
    entries = []
    for city in sorted(p_values):
        pv = float(p_values[city])
        px = float(proxy[city])
        label = ("H" if px >= proxy_cut else "L") + ("H" if pv >= p_cut else "L")
        entries.append(QuadrantEntry(city, px, pv, label))
    return QuadrantReport(tuple(entries), float(proxy_cut), float(p_cut))
