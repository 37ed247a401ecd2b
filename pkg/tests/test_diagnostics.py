import math
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hedonic_esg import reference_data as ref
from hedonic_esg.diagnostics import (QUADRANT_PROXIES, ResidualMatrix, decay_plot_rows,
                                     fit_decay, pca, quadrant_analysis, relative_change, zeta)
from hedonic_esg.errors import DomainError, InsufficientDataError, ValidationError
from hedonic_esg.panel import CITY_META, builtin_residuals


@pytest.mark.parametrize("model", ["glm", "gam"])
def test_pca_reproduces_published_proportions(model):
    start = time.perf_counter()
    res = pca(builtin_residuals(model))
    elapsed = time.perf_counter() - start
    assert np.max(np.abs(res.explained - ref.PUBLISHED_EXPLAINED[model])) <= 0.01
    assert elapsed < 1.0


def test_pca_eigenpairs_match_lapack():
    R = builtin_residuals("glm").values
    X = R / np.linalg.norm(R, axis=0)
    res = pca(R)
    assert np.allclose(res.eigenvalues, np.linalg.eigvalsh(X.T @ X)[::-1], atol=1e-10)
    assert np.allclose(res.components.T @ res.components, np.eye(8), atol=1e-10)
    assert np.all(np.diff(res.eigenvalues) <= 0)


def test_literal_cross_product_on_orthogonal_columns():
    M = np.zeros((4, 2))
    M[0, 0], M[1, 1] = 2.0, 1.0
    assert pca(M, standardize=False).explained == pytest.approx([0.8, 0.2], abs=1e-12)
    assert pca(M).explained == pytest.approx([0.5, 0.5], abs=1e-12)


def test_pca_options():
    R = builtin_residuals("gam")
    raw = pca(R, standardize=False)
    centered = pca(R, centered=True)
    assert raw.eigenvalues.sum() == pytest.approx(np.sum(R.values ** 2))
    assert centered.centered and not raw.standardized
    assert pca(R).eigenvalues.sum() == pytest.approx(8.0)


matrices = st.integers(2, 6).flatmap(
    lambda k: st.integers(k, 12).flatmap(
        lambda n: arrays(np.float64, (n, k), elements=st.floats(-10, 10, width=32))))


@given(matrices)
def test_explained_is_on_the_simplex(M):
    try:
        res = pca(M, standardize=False)
    except ValidationError:
        return  # identically zero matrix
    assert np.all(res.explained >= 0)
    assert res.explained.sum() == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 10_000), st.integers(2, 8), st.data())
def test_explained_is_invariant_to_city_order(seed, k, data):
    M = np.random.default_rng(seed).standard_normal((k + 5, k))
    perm = data.draw(st.permutations(range(k)))
    a = pca(M)
    b = pca(M[:, perm])
    assert np.allclose(a.explained, b.explained, atol=1e-12)


@given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
def test_standardized_pca_ignores_column_scale(seed, c):
    M = np.random.default_rng(seed).standard_normal((10, 4))
    S = M.copy()
    S[:, 0] *= c
    assert np.allclose(pca(M).explained, pca(S).explained, atol=1e-12)


def test_pca_errors():
    with pytest.raises(InsufficientDataError):
        pca(np.ones((3, 4)))
    with pytest.raises(ValidationError):
        pca(np.column_stack([np.ones(5), np.zeros(5)]))
    with pytest.raises(ValidationError):
        ResidualMatrix(np.ones((3, 2)), (1, 2, 3), ("SEA", "ATL"))


def test_residual_matrix_from_columns_sorts_cities():
    m = ResidualMatrix.from_columns({"SEA": [1.0, 2.0], "ATL": [3.0, 4.0]}, (2001, 2002))
    assert m.city_labels == ("ATL", "SEA")
    assert m[2002, "SEA"] == 2.0
    assert m.column("ATL").tolist() == [3.0, 4.0]


def test_zeta_closed_forms():
    assert zeta(2) == pytest.approx(math.pi ** 2 / 6, abs=1e-9)
    assert zeta(4) == pytest.approx(math.pi ** 4 / 90, abs=1e-9)
    assert zeta(1.05) == pytest.approx(20.5808, abs=1e-4)
    with pytest.raises(DomainError):
        zeta(1.0)


def test_zeta_agrees_with_scipy():
    special = pytest.importorskip("scipy.special")
    for b in (1.1, 1.5, 2.5, 3.0, 7.0, 30.0):
        assert zeta(b) == pytest.approx(special.zeta(b), rel=1e-13)


@pytest.mark.parametrize("model", ["glm", "gam"])
def test_published_proportions_decay_exponentially(model):
    report = fit_decay(ref.PUBLISHED_EXPLAINED[model])
    assert report.exponential.r2 > report.power.r2
    assert report.verdict == "exponential"
    assert report.interpretation.startswith("systemic")


def test_geometric_sequence_is_exponential():
    c = 0.6
    f = (1 - c) * c ** np.arange(8) / (1 - c ** 8)
    report = fit_decay(f)
    assert report.exponential.r2 >= 0.999
    assert report.exponential.params["c"] == pytest.approx(c, rel=1e-10)
    assert report.exponential.params["beta"] == pytest.approx(1 - c, rel=1e-10)
    assert report.verdict == "exponential"


@pytest.mark.parametrize("b", [1.5, 2.0, 3.0])
def test_truncated_zeta_sequence_is_power(b):
    x = np.arange(1, 9)
    f = x ** -b / zeta(b)
    report = fit_decay(f)
    assert report.verdict == "power"
    assert report.power.params["b"] == pytest.approx(b, rel=1e-10)
    assert report.interpretation.startswith("noise")


def test_decay_errors_and_plot_rows():
    with pytest.raises(InsufficientDataError):
        fit_decay([0.5, 0.3, 0.2])
    with pytest.raises(DomainError):
        fit_decay([0.5, 0.3, 0.2, 0.0])
    f = ref.PUBLISHED_EXPLAINED["glm"]
    rows = decay_plot_rows(f, fit_decay(f))
    assert [r[0] for r in rows] == list(range(1, 9))
    assert rows[0][2] == pytest.approx(math.log(0.453))


@given(st.floats(1.01, 10.0), st.integers(1, 500))
def test_power_relative_change_shrinks_with_rank(b, x):
    a = relative_change("power", b, x)
    nxt = relative_change("power", b, x + 1)
    assert -1.0 < a < nxt < 0.0


@given(st.floats(0.01, 0.99), st.integers(1, 500))
def test_exponential_relative_change_is_constant(beta, x):
    assert relative_change("exponential", beta, x) == -beta
    assert relative_change("exponential", beta, x + 7) == -beta


def test_relative_change_domain():
    for args in (("power", 0.9, 1), ("exponential", 1.2, 1), ("power", 2.0, 0), ("log", 2.0, 1)):
        with pytest.raises(DomainError):
            relative_change(*args)


def _quadrants(factor):
    attr, cut = QUADRANT_PROXIES[factor]
    p = ref.published_pvalues("gam")
    return quadrant_analysis({c: p[c][factor] for c in ref.CITIES},
                             {c: getattr(CITY_META[c], attr) for c in ref.CITIES}, cut)


def test_waterfront_quadrants():
    q = _quadrants("waterfront")
    assert set(q.members("LH")) == {"ATL", "AUS", "OKC"}
    assert set(q.members("HL")) == {"COL", "JAX", "NAS"}
    assert set(q.members("HH")) == {"POR", "SEA"}
    assert q.members("LL") == ()


def test_accessible_quadrants():
    q = _quadrants("accessible")
    assert set(q.members("LH")) == {"ATL", "AUS", "SEA"}
    assert set(q.members("HL")) == {"COL", "JAX", "OKC"}
    assert q.entries[0].levels == ("low", "high")


def test_quadrant_cities_must_match():
    with pytest.raises(ValidationError):
        quadrant_analysis({"ATL": 0.5}, {"SEA": 1.0}, 1.0)
