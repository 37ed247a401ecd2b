"""Stationarizing transforms for yearly level series."""
from dataclasses import dataclass

import numpy as np

from .errors import DivisionByZero, InsufficientDataError, ValidationError
from .reference_data import FACTORS

ARITHMETIC_RETURN = "arithmetic_return"
FIRST_DIFFERENCE = "first_difference"
INNOVATION = "innovation"
KINDS = (ARITHMETIC_RETURN, FIRST_DIFFERENCE, INNOVATION)

SHORT_NAMES = {ARITHMETIC_RETURN: "rtn", FIRST_DIFFERENCE: "fd", INNOVATION: "innov"}

# always differenced, whatever its zeros, so all cities share one transform
ALWAYS_DIFFERENCED = ("waterfront",)


@dataclass(frozen=True)
class TransformedSeries:
    values: np.ndarray
    kind: str
    source_factor: str
    start_year: int
    order: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown transform kind {self.kind!r}")
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.shape[0]

    @property
    def years(self):
        return np.arange(self.start_year, self.start_year + len(self))


def _as_levels(levels, minimum):
    x = np.asarray(levels, dtype=float)
    if x.ndim != 1:
        raise ValidationError("levels must be one-dimensional")
    if x.shape[0] < minimum:
        raise InsufficientDataError(f"need at least {minimum} levels, got {x.shape[0]}")
    return x


def arithmetic_return(levels, source_factor="", start_year=0):
    """Relative one-step changes ``(x[t+1] - x[t]) / x[t]``.

    ``start_year`` is the year of the first level; the result starts one
    year later. A zero denominator raises :class:`DivisionByZero` carrying the
    year of the zero level, which signals the first-difference fallback.
    """
    x = _as_levels(levels, 2)
    denom = x[:-1]
    zeros = np.nonzero(denom == 0.0)[0]
    if zeros.size:
        i = int(zeros[0])
        raise DivisionByZero(
            f"{source_factor or 'series'}: zero level in {start_year + i} used as a denominator",
            year=start_year + i, index=i)
    return TransformedSeries((x[1:] - denom) / denom, ARITHMETIC_RETURN, source_factor,
                             start_year + 1)


def first_difference(levels, source_factor="", start_year=0, order=1):
    """Differences ``x[t+1] - x[t]``, applied ``order`` times."""
    if order < 1:
        raise ValidationError("difference order must be >= 1")
    x = _as_levels(levels, order + 1)
    return TransformedSeries(np.diff(x, n=order), FIRST_DIFFERENCE, source_factor,
                             start_year + order, order=order)


def reconstruct_from_returns(first_level, returns):
    """Invert :func:`arithmetic_return` from the initial level."""
    r = np.asarray(returns.values if isinstance(returns, TransformedSeries) else returns, float)
    return first_level * np.concatenate([[1.0], np.cumprod(1.0 + r)])


def reconstruct_from_differences(first_level, diffs):
    """Invert a first difference by cumulative summation."""
    d = np.asarray(diffs.values if isinstance(diffs, TransformedSeries) else diffs, float)
    return np.concatenate([[first_level], first_level + np.cumsum(d)])


@dataclass(frozen=True)
class TransformPlan:
    city_code: str
    kinds: tuple  # ((factor, kind), ...) in factor order

    def __post_init__(self):
        for factor, kind in self.kinds:
            if factor in ALWAYS_DIFFERENCED and kind != FIRST_DIFFERENCE:
                raise ValidationError(f"{factor} must use first differences")

    def __getitem__(self, factor):
        return dict(self.kinds)[factor]

    def as_dict(self):
        return dict(self.kinds)

    def short(self):
        return {f: SHORT_NAMES[k] for f, k in self.kinds}


def plan_transforms(panel, factors=None):
    """Choose return or first difference per factor.

    Waterfront is always differenced. Other factors use arithmetic returns
    unless a level that would serve as a denominator (every year but the last)
    is zero, in which case they fall back to first differences.
    """
    kinds = []
    for factor in factors or FACTORS:
        if factor in ALWAYS_DIFFERENCED:
            kinds.append((factor, FIRST_DIFFERENCE))
            continue
        levels = panel.column(factor)
        kind = ARITHMETIC_RETURN if np.all(levels[:-1] != 0.0) else FIRST_DIFFERENCE
        kinds.append((factor, kind))
    return TransformPlan(panel.city_code, tuple(kinds))


def apply_plan(panel, plan):
    """Transform every planned factor of ``panel``; returns ``{factor: series}``."""
    out = {}
    for factor, kind in plan.kinds:
        levels = panel.column(factor)
        if kind == ARITHMETIC_RETURN:
            out[factor] = arithmetic_return(levels, factor, panel.start_year)
        else:
            out[factor] = first_difference(levels, factor, panel.start_year)
    return out


def price_returns(panel):
    """Arithmetic returns of the average price (always defined: prices are > 0)."""
    return arithmetic_return(panel.column("av_price"), "av_price", panel.start_year)
