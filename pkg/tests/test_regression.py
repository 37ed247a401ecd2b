import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hedonic_esg import reference_data as ref
from hedonic_esg.errors import (CollinearityError, DegenerateInputError, InsufficientDataError,
                                ValidationError)
from hedonic_esg.regression import (INTERCEPT, DesignMatrix, adjusted_r2, fit_glm,
                                    is_significant, significance_summary)
from hedonic_esg.transforms import apply_plan, plan_transforms, price_returns

# statsmodels OLS of ATL price returns on the five transformed factors
ATL_OLS_P = [0.93588389, 0.84166382, 0.64345497, 0.461499, 0.91116236]
ATL_OLS_ADJ_R2 = -0.1194088822612771
ATL_OLS_BETA = [3.44665711e-02, 7.37327283e-03, -4.15534912e-03, 4.72976848e-02,
                2.85271216e-02, -9.09150285e-05]


def _atl_inputs(atl):
    series = apply_plan(atl, plan_transforms(atl))
    return price_returns(atl), list(series.values())


def test_exact_line_is_recovered():
    x = np.arange(10.0)
    fit = fit_glm(2.0 + 3.0 * x + np.array([0, 1e-3, -1e-3] * 3 + [0]), [x], names=["x"])
    assert fit.beta == pytest.approx([2.0, 3.0], abs=1e-3)
    assert fit.p_values["x"] < 1e-12
    assert fit.r2 == pytest.approx(1.0, abs=1e-8)


def test_adjusted_r2_closed_form():
    assert adjusted_r2(0.5, 22, 6) == pytest.approx(0.34375)
    assert adjusted_r2(0.1, 22, 6) < 0.0
    assert np.isnan(adjusted_r2(0.5, 6, 6))


def test_atl_returns_match_reference_ols(atl):
    y, factors = _atl_inputs(atl)
    fit = fit_glm(y, factors)
    assert fit.factor_names == ref.FACTORS
    assert [fit.p_values[f] for f in ref.FACTORS] == pytest.approx(ATL_OLS_P, rel=1e-6)
    assert fit.adjusted_r2 == pytest.approx(ATL_OLS_ADJ_R2, rel=1e-10)
    assert fit.beta == pytest.approx(ATL_OLS_BETA, rel=1e-6)
    assert fit.model_df == 6


def test_agrees_with_statsmodels_live():
    sm = pytest.importorskip("statsmodels.api")
    rng = np.random.default_rng(5)
    X = rng.standard_normal((30, 3))
    y = X @ [0.5, -0.2, 0.0] + rng.standard_normal(30)
    ref_fit = sm.OLS(y, sm.add_constant(X)).fit()
    fit = fit_glm(y, list(X.T))
    assert fit.beta == pytest.approx(ref_fit.params, rel=1e-10)
    assert fit.std_errors == pytest.approx(ref_fit.bse, rel=1e-10)
    assert [fit.p_values[n] for n in ("x1", "x2", "x3")] == pytest.approx(ref_fit.pvalues[1:],
                                                                          rel=1e-8)
    assert fit.adjusted_r2 == pytest.approx(ref_fit.rsquared_adj, rel=1e-10)


@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(0, 15))
def test_residuals_are_orthogonal_to_the_design(seed, m, extra):
    rng = np.random.default_rng(seed)
    tau = m + 2 + extra
    X = rng.standard_normal((tau, m)) * rng.uniform(0.01, 100, m)
    y = rng.standard_normal(tau) * 10
    design = DesignMatrix.from_series(list(X.T))
    fit = fit_glm(y, design)
    A = design.matrix
    assert np.all(np.abs(A.T @ fit.residuals) <= 1e-8 * np.linalg.norm(A, axis=0)
                  * max(np.linalg.norm(y), 1.0))
    # the projection is idempotent: refitting the fitted values returns them
    assume(np.ptp(fit.fitted) > 1e-6)
    refit = fit_glm(fit.fitted, design)
    assert np.allclose(refit.fitted, fit.fitted, rtol=0, atol=1e-10 * max(1.0, np.abs(y).max()))


@given(st.integers(0, 10_000), st.floats(0.01, 100.0), st.floats(-5.0, 5.0))
def test_pvalues_invariant_to_affine_rescaling(seed, scale, shift):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((20, 3))
    y = X[:, 0] + rng.standard_normal(20)
    a = fit_glm(y, list(X.T))
    b = fit_glm(y, [X[:, 0] * scale + shift, X[:, 1], X[:, 2]])
    assume(a.r2 < 1 - 1e-9)
    assert b.p_values["x1"] == pytest.approx(a.p_values["x1"], rel=1e-7, abs=1e-14)
    assert b.adjusted_r2 == pytest.approx(a.adjusted_r2, rel=1e-9, abs=1e-12)


def test_collinearity_names_dependent_columns():
    rng = np.random.default_rng(0)
    a, b, c = rng.standard_normal((3, 12))
    with pytest.raises(CollinearityError) as err:
        fit_glm(rng.standard_normal(12), [a, b, a + 2 * b, c], names=["a", "b", "ab", "c"])
    assert set(err.value.columns) == {"a", "b", "ab"}
    with pytest.raises(CollinearityError) as err:
        fit_glm(rng.standard_normal(12), [a, np.full(12, 3.0)], names=["a", "flat"])
    assert err.value.columns == (INTERCEPT, "flat")


def test_design_errors():
    with pytest.raises(InsufficientDataError):
        fit_glm(np.arange(3.0), [np.arange(3.0), np.arange(3.0) ** 2])
    with pytest.raises(ValidationError):
        fit_glm(np.arange(5.0), [np.arange(4.0)])
    with pytest.raises(ValidationError):
        fit_glm(np.arange(5.0), [])
    with pytest.raises(DegenerateInputError):
        fit_glm(np.ones(6), [np.arange(6.0)])
    with pytest.raises(ValidationError):
        fit_glm(np.arange(5.0), [np.arange(5.0)], names=["a", "b"])


def test_significance_rule():
    assert is_significant(0.10, 0.10)
    assert not is_significant(0.1001, 0.10)
    assert not is_significant(0.0, 0.0)
    assert is_significant(ref.BELOW_001, 0.01)


def _printed_fits():
    glm, gam = ref.published_pvalues("glm"), ref.published_pvalues("gam")
    return {c: {"gam": gam[c], "glm": glm[c]} for c in ref.CITIES}


def test_printed_pvalues_reproduce_tallies():
    table = significance_summary(_printed_fits(), 0.10)
    assert table.cities == ref.CITIES
    assert list(table.city_counts("gam").values()) == [0, 1, 4, 4, 3, 3, 3, 0]
    assert list(table.city_counts("glm").values()) == [0, 1, 0, 0, 3, 1, 0, 0]
    assert list(table.factor_counts("gam").values()) == [4, 3, 5, 3, 3]


def test_zero_threshold_counts_nothing():
    table = significance_summary(_printed_fits(), 0.0)
    assert all(v == 0 for m in ("gam", "glm") for v in table.city_counts(m).values())
    assert sum(table.with_threshold(1.0).factor_counts("glm").values()) == 40


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_tallies_monotone_in_threshold(t1, t2):
    lo, hi = sorted((t1, t2))
    table = significance_summary(_printed_fits(), lo)
    for model in ("gam", "glm"):
        a = table.city_counts(model)
        b = table.with_threshold(hi).city_counts(model)
        assert all(a[c] <= b[c] for c in a)


def test_summary_records_adjusted_r2(atl):
    y, factors = _atl_inputs(atl)
    fit = fit_glm(y, factors)
    table = significance_summary({"ATL": {"glm": fit}})
    assert table.adjusted_r2[("glm", "ATL")] == fit.adjusted_r2
    with pytest.raises(ValidationError):
        significance_summary({})
    with pytest.raises(ValidationError):
        significance_summary({"ATL": {"glm": fit}}, -0.1)
