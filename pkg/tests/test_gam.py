import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import BSpline

from hedonic_esg.errors import DomainError, ValidationError
from hedonic_esg.gam import (GCV_GRID, LambdaPolicy, SmootherBasis, fit_gam, gam_significance,
                             penalty_matrix)
from hedonic_esg.regression import fit_glm
from hedonic_esg.transforms import apply_plan, plan_transforms, price_returns


def planted_panel(n=200, seed=0):
    """One strongly curved effect, one linear effect and one null factor."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, 3))
    y = np.sin(3.0 * X[:, 0]) + 0.5 * X[:, 1] + 0.3 * rng.standard_normal(n)
    return y, list(X.T)


@pytest.fixture(scope="module")
def planted():
    y, factors = planted_panel()
    return y, factors, fit_gam(y, factors), fit_glm(y, factors)


def test_planted_curvature_is_found(planted):
    y, factors, gam, glm = planted
    assert gam.converged
    assert gam.adjusted_r2 - glm.adjusted_r2 > 0.2
    assert gam.edfs[0] > 3.0
    assert gam.p_values["x1"] < 1e-10
    assert gam.p_values["x2"] < 0.01
    assert gam.p_values["x3"] > 0.01


def test_components_are_centered_and_consistent(planted):
    y, factors, gam, _ = planted
    assert np.allclose(gam.fitted, gam.intercept + sum(s.component for s in gam.smoothers),
                       atol=1e-10)
    for s, x in zip(gam.smoothers, factors):
        assert abs(s.component.mean()) < 1e-10
        assert np.allclose(s.evaluate(x), s.component, atol=1e-8)
    assert gam.total_edf == pytest.approx(1.0 + sum(gam.edfs))
    assert gam.model_df == pytest.approx(gam.total_edf)


def test_evaluate_refuses_extrapolation(planted):
    s = planted[2].smoothers[0]
    with pytest.raises(DomainError):
        s.evaluate([s.x_max + 0.5])


def test_smooth_matches_the_planted_curve(planted):
    _, factors, gam, _ = planted
    x = factors[0]
    truth = np.sin(3.0 * x) - np.sin(3.0 * x).mean()
    assert np.sqrt(np.mean((gam.smoothers[0].component - truth) ** 2)) < 0.1


def test_backfitting_objective_is_monotone(planted):
    hist = np.array(planted[2].objective_history)
    assert hist.size >= 2
    assert np.all(np.diff(hist) <= 1e-10 * np.abs(hist[:-1]))


@pytest.mark.parametrize("policy", ["linear", "force-linear", "inf"])
def test_linear_policy_is_the_glm(planted, policy):
    y, factors, _, glm = planted
    gam = fit_gam(y, factors, policy)
    assert gam.adjusted_r2 == pytest.approx(glm.adjusted_r2, abs=1e-8)
    assert np.allclose(gam.fitted, glm.fitted, atol=1e-8)
    assert gam.edfs == (1.0, 1.0, 1.0)


@settings(max_examples=10)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_huge_lambda_degenerates_to_glm(seed, m):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, m))
    y = X @ rng.standard_normal(m) + np.cos(2 * X[:, 0]) + 0.5 * rng.standard_normal(30)
    gam = fit_gam(y, list(X.T), "lambda:1e12")
    glm = fit_glm(y, list(X.T))
    assert np.max(np.abs(gam.fitted - glm.fitted)) < 1e-4
    assert gam.adjusted_r2 == pytest.approx(glm.adjusted_r2, abs=1e-4)


def test_fit_does_not_depend_on_factor_order():
    y, factors = planted_panel(80, seed=3)
    a = fit_gam(y, factors, "lambda:0.01", names=["a", "b", "c"])
    b = fit_gam(y, factors[::-1], "lambda:0.01", names=["c", "b", "a"])
    assert np.allclose(a.fitted, b.fitted, atol=1e-8)
    g = fit_gam(y, factors, names=["a", "b", "c"])
    h = fit_gam(y, factors[::-1], names=["c", "b", "a"])
    assert np.allclose(g.fitted, h.fitted, atol=1e-8)
    assert g.p_values == pytest.approx(h.p_values, rel=1e-6)


def test_renaming_changes_sweep_order_but_not_the_fit():
    y, factors = planted_panel(80, seed=4)
    a = fit_gam(y, factors, "lambda:0.01", names=["a", "b", "c"])
    b = fit_gam(y, factors, "lambda:0.01", names=["z", "y", "x"])
    assert np.allclose(a.fitted, b.fitted, atol=1e-8)


@pytest.mark.parametrize("target", [2.0, 3.5, 5.0])
def test_df_policy_hits_its_target(target):
    y, factors = planted_panel(120, seed=5)
    fit = fit_gam(y, factors, f"df:{target}")
    assert fit.edfs == pytest.approx((target,) * 3, abs=1e-6)


def test_zero_effect_is_not_significant_and_strong_effect_is():
    rng = np.random.default_rng(9)
    n = 60
    x_null, x_strong = rng.uniform(0, 1, (2, n))
    y = 2.0 * x_strong + 0.1 * rng.standard_normal(n)
    fit = fit_gam(y, [x_null, x_strong], "linear", names=["null", "strong"])
    assert fit.p_values["strong"] < 0.01
    tests = gam_significance(fit, y, [x_null, x_strong], names=["null", "strong"])
    assert tests["strong"].p_value == fit.p_values["strong"]
    # remove the null factor's partial effect: dropping it then costs nothing
    A = np.column_stack([np.ones(n), x_null, x_strong])
    y0 = y - x_null * np.linalg.lstsq(A, y, rcond=None)[0][1]
    fit0 = fit_gam(y0, [x_null, x_strong], "linear", names=["null", "strong"])
    assert fit0.p_values["null"] > 0.99


def test_atl_gam_collapses_to_linear(atl):
    y = price_returns(atl)
    factors = list(apply_plan(atl, plan_transforms(atl)).values())
    gam, glm = fit_gam(y, factors), fit_glm(y, factors)
    assert gam.adjusted_r2 >= glm.adjusted_r2 - 0.02
    assert np.all(np.isfinite(list(gam.p_values.values())))


def test_policy_parsing():
    assert LambdaPolicy.parse("GCV").kind == "gcv"
    assert LambdaPolicy.parse("force-linear") == LambdaPolicy("linear")
    assert LambdaPolicy.parse("fixed-df(4)") == LambdaPolicy("df", 4.0)
    assert LambdaPolicy.parse("df:3") == LambdaPolicy("df", 3.0)
    assert LambdaPolicy.parse("lambda:0.5") == LambdaPolicy("lambda", 0.5)
    assert str(LambdaPolicy.parse("df:3")) == "df:3"
    for bad in ("df:0.5", "lambda:-1", "df:x", "ridge"):
        with pytest.raises(ValidationError):
            LambdaPolicy.parse(bad)


def test_penalty_is_exact_for_a_quadratic():
    # coefficients of u**2 on the basis are exact; its integrated f''**2 is 4
    basis = SmootherBasis(np.linspace(0.0, 1.0, 7), "u")
    grid = np.linspace(0.0, 1.0, 101)
    B = BSpline.design_matrix(grid, basis.knots, 3).toarray()
    coef = np.linalg.lstsq(B, grid ** 2, rcond=None)[0]
    assert np.allclose(B @ coef, grid ** 2, atol=1e-12)
    assert coef @ penalty_matrix(basis.knots) @ coef == pytest.approx(4.0, rel=1e-10)
    d = np.linalg.eigvalsh(penalty_matrix(basis.knots))
    assert np.sum(np.abs(d) < 1e-8 * d.max()) == 2


def test_edf_decreases_with_lambda():
    basis = SmootherBasis(np.random.default_rng(0).uniform(size=40), "x")
    edfs = [basis.edf(lam) for lam in GCV_GRID]
    assert np.all(np.diff(edfs) >= 0)
    assert basis.edf(np.inf) == 1.0
