import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from jlphase import tails
from jlphase.bounds import C_EXISTENCE
from jlphase.errors import DomainError
from jlphase.rng import substream
from jlphase.transforms import (
    DistortionEstimate,
    Kind,
    ProjectionMatrix,
    achlioptas_k,
    achlioptas_matrix,
    apply,
    baseline_k,
    estimate_distortion_prob,
    gaussian_matrix,
    haar_rows,
    kmn_bracket,
    kmn_upper_k,
    make_matrix,
    orthogonal_projection_matrix,
    read_matrix,
    squared_norm_samples,
    write_matrix,
)


# -- dimension formulas ---------------------------------------------------------

def test_achlioptas_k_examples():
    # 2 ln 4 / (1/8 - 1/24) = 33.27..., 2 ln 200 / (0.005 - 0.001/3) = 2270.7...
    assert achlioptas_k(0.5, 0.5) == 34
    assert achlioptas_k(0.1, 0.01) == 2271


@given(e1=st.floats(0.01, 0.5), e2=st.floats(0.01, 0.5), d1=st.floats(1e-9, 0.5), d2=st.floats(1e-9, 0.5))
def test_achlioptas_k_monotone(e1, e2, d1, d2):
    if e1 <= e2:
        assert achlioptas_k(e1, d1) >= achlioptas_k(e2, d1)
    if d1 <= d2:
        assert achlioptas_k(e1, d1) >= achlioptas_k(e1, d2)


@pytest.mark.parametrize("eps,delta", [(0.0, 0.1), (0.6, 0.1), (0.1, 0.0), (0.1, 0.7)])
def test_dimension_formula_domain(eps, delta):
    with pytest.raises(DomainError):
        achlioptas_k(eps, delta)
    with pytest.raises(DomainError):
        kmn_upper_k(eps, delta)


def test_kmn_example():
    # bracket 1.39320007600504549, times 400 ln 1000 = 3849.554...
    assert kmn_bracket(0.1, 0.001, 3.9619) == pytest.approx(1.3932000760050455, rel=1e-14)
    assert kmn_upper_k(0.1, 0.001, 3.9619) == 3850
    with pytest.raises(DomainError):
        kmn_upper_k(0.1, 0.001, 0.5)


def test_kmn_default_constant():
    assert kmn_upper_k(0.25, 0.05) == kmn_upper_k(0.25, 0.05, C_EXISTENCE) == 529


@given(eps=st.floats(1e-4, 0.5), delta=st.floats(1e-12, 0.5), c=st.floats(1.0, 100.0))
def test_kmn_bracket_exceeds_one(eps, delta, c):
    assert kmn_bracket(eps, delta, c) > 1.0
    assert kmn_upper_k(eps, delta, c) > baseline_k(eps, delta)


def test_kmn_ratio_tends_to_one_from_above():
    ratios = [kmn_upper_k(2.0 ** -j, 2.0 ** -(4 * j)) / baseline_k(2.0 ** -j, 2.0 ** -(4 * j)) for j in range(2, 12)]
    assert all(r > 1.0 for r in ratios)
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    # the log(2C)/log(1/delta) term decays slowly
    assert ratios[-1] < 1.15


def test_existence_side_realized():
    k = kmn_upper_k(0.25, 0.05)
    assert tails.failure_probability(tails.query(k, 4 * k, 0.25)) <= 0.05


# -- constructions ----------------------------------------------------------------

def test_gaussian_trivial_case():
    a = gaussian_matrix(1, 1, substream(1, 2))
    assert a.entries.shape == (1, 1) and a.scale == 1.0


def test_constructions_reproducible():
    for kind in ("achlioptas", "gaussian", "orthogonal"):
        a = make_matrix(kind, 4, 30, substream(5, 2))
        b = make_matrix(kind, 4, 30, substream(5, 2))
        assert np.array_equal(a.entries, b.entries)
    with pytest.raises(DomainError):
        make_matrix("custom", 2, 3, substream(5, 2))


def test_achlioptas_entries_and_probabilities():
    a = achlioptas_matrix(200, 300, substream(9, 2))
    vals = a.entries / a.scale
    assert set(np.unique(vals)) <= {-1.0, 0.0, 1.0}
    n = vals.size
    freq = [np.mean(vals == v) for v in (-1.0, 0.0, 1.0)]
    for f, p in zip(freq, (1 / 6, 2 / 3, 1 / 6)):
        assert abs(f - p) <= 4 * math.sqrt(p * (1 - p) / n)
    assert a.scale == pytest.approx(math.sqrt(3 / 200))


@pytest.mark.parametrize("k,d", [(1, 2), (3, 10), (20, 21), (50, 400)])
def test_orthogonal_rows(k, d):
    a = orthogonal_projection_matrix(k, d, substream(k, d))
    gram = a.entries @ a.entries.T
    assert np.allclose(gram, np.eye(k) * d / k, atol=1e-10 * d / k)
    raw = haar_rows(k, d, substream(k, d))
    assert np.allclose(raw @ raw.T, np.eye(k), atol=1e-12)


def test_orthogonal_domain():
    with pytest.raises(DomainError):
        orthogonal_projection_matrix(3, 3, substream(1))


def test_haar_first_column_is_uniform():
    # the (0, 0) entry of a Haar matrix in dimension d has (x + 1)/2 ~ Beta((d-1)/2, (d-1)/2)
    d = 6
    vals = np.array([haar_rows(1, d, substream(3, i))[0, 0] for i in range(3000)])
    res = stats.kstest((vals + 1) / 2, stats.beta((d - 1) / 2, (d - 1) / 2).cdf)
    assert res.pvalue > 0.01


def test_matrix_entries_immutable():
    a = gaussian_matrix(2, 3, substream(1))
    with pytest.raises(ValueError):
        a.entries[0, 0] = 0.0
    with pytest.raises(DomainError):
        ProjectionMatrix(Kind.CUSTOM, 2, 2, np.zeros((3, 2)), 1.0)


# -- apply ------------------------------------------------------------------------

def test_apply_scalar_case():
    a = ProjectionMatrix.from_array([[3.0]])
    assert np.array_equal(apply(a, [2.0]), [6.0])


@given(alpha=st.floats(-5, 5), beta=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_apply_is_linear(alpha, beta, seed):
    r = substream(seed)
    a = gaussian_matrix(3, 7, r)
    x, y = r.standard_normal(7), r.standard_normal(7)
    lhs = apply(a, alpha * x + beta * y)
    rhs = alpha * apply(a, x) + beta * apply(a, y)
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


def test_apply_batch_and_dimension_check():
    a = gaussian_matrix(3, 7, substream(1))
    x = substream(2).standard_normal((5, 7))
    assert np.allclose(apply(a, x), np.stack([apply(a, row) for row in x]))
    with pytest.raises(DomainError):
        apply(a, np.ones(6))


def test_orthogonal_image_norm_range():
    a = orthogonal_projection_matrix(5, 40, substream(1))
    w = substream(2).standard_normal((1000, 40))
    w /= np.linalg.norm(w, axis=1)[:, None]
    sq = np.sum(apply(a, w) ** 2, axis=1)
    assert sq.min() >= 0.0 and sq.max() <= 40 / 5 + 1e-12


# -- distortion estimates ------------------------------------------------------------

def test_identity_never_fails():
    est = estimate_distortion_prob(ProjectionMatrix.from_array(np.eye(6)), 1e-6, 5000, seed=1)
    assert est.p_hat == 0.0 and est.std_error == 0.0


def test_zero_matrix_always_fails():
    est = estimate_distortion_prob(ProjectionMatrix.from_array(np.zeros((2, 6))), 0.5, 3000, seed=1)
    assert est.p_hat == 1.0


def test_estimate_is_deterministic():
    a = estimate_distortion_prob("gaussian", 0.2, 10_000, seed=4, k=20, d=50)
    b = estimate_distortion_prob("gaussian", 0.2, 10_000, seed=4, k=20, d=50)
    assert a == b


def test_estimate_needs_shape_for_constructions():
    with pytest.raises(DomainError):
        estimate_distortion_prob("gaussian", 0.2, 10, seed=4)
    with pytest.raises(DomainError):
        estimate_distortion_prob("gaussian", 0.2, 10, seed=4, k=2, d=3, method="other")


def test_distortion_estimate_within():
    est = DistortionEstimate.from_count(0, 1000, 0.1)
    assert est.within(0.001) and not est.within(0.05)


@pytest.mark.slow
def test_orthogonal_failure_matches_exact_tails():
    est = estimate_distortion_prob("orthogonal", 0.1, 1_000_000, seed=7, k=100, d=1000)
    exact = tails.failure_probability(tails.query(100, 1000, 0.1))
    assert abs(est.p_hat - exact) <= 4 * est.std_error


@pytest.mark.parametrize("kind", ["gaussian", "achlioptas", "orthogonal"])
def test_constructions_are_unbiased(kind):
    sq = squared_norm_samples(kind, 100_000, seed=11, k=10, d=60)
    se = sq.std(ddof=1) / math.sqrt(sq.size)
    assert abs(sq.mean() - 1.0) <= 4 * se


@pytest.mark.parametrize("kind", ["gaussian", "achlioptas", "orthogonal"])
def test_column_sampler_matches_full_matrices(kind):
    col = squared_norm_samples(kind, 3000, seed=2, k=6, d=25, method="column")
    full = squared_norm_samples(kind, 3000, seed=3, k=6, d=25, method="matrix")
    if kind == "achlioptas":
        # discrete law: compare the atoms directly
        vals = np.unique(np.concatenate([col, full]))
        c = np.array([np.sum(np.isclose(col, v)) for v in vals])
        f = np.array([np.sum(np.isclose(full, v)) for v in vals])
        keep = (c + f) >= 10
        assert stats.chi2_contingency(np.vstack([c[keep], f[keep]]))[1] > 0.01
    else:
        assert stats.ks_2samp(col, full).pvalue > 0.01


def test_orthogonal_norm_is_scaled_split_statistic():
    k, d = 4, 15
    sq = squared_norm_samples("orthogonal", 20_000, seed=5, k=k, d=d)
    params = tails.query(k, d, 0.1).params
    res = stats.kstest(sq * (k / d), lambda t: tails.cdf(params, np.clip(t, 0.0, 1.0)))
    assert res.pvalue > 0.01


def test_haar_invariance_in_w():
    # a fixed orthogonal matrix against random w, versus fresh matrices against e1
    k, d = 5, 30
    fixed = orthogonal_projection_matrix(k, d, substream(8))
    by_w = squared_norm_samples(fixed, 4000, seed=1)
    by_matrix = squared_norm_samples("orthogonal", 4000, seed=2, k=k, d=d, method="matrix")
    assert stats.ks_2samp(by_w, by_matrix).pvalue > 0.01
    w = substream(9).standard_normal(d)
    w /= np.linalg.norm(w)
    rows = [orthogonal_projection_matrix(k, d, substream(10, i)).entries for i in range(4000)]
    at_w = np.array([np.sum((m @ w) ** 2) for m in rows])
    assert stats.ks_2samp(at_w, by_matrix).pvalue > 0.01


# -- files ----------------------------------------------------------------------------

def test_matrix_file_roundtrip(tmp_path):
    a = achlioptas_matrix(3, 5, substream(1))
    path = tmp_path / "m.txt"
    write_matrix(path, a)
    b = read_matrix(path)
    assert b.kind is Kind.ACHLIOPTAS and (b.k, b.d) == (3, 5) and b.scale == a.scale
    assert np.array_equal(a.entries, b.entries)
    assert path.read_text().splitlines()[0].startswith("3 5 achlioptas ")


def test_matrix_file_errors(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("2 3 gaussian 1.0\n1 2 3\n")
    with pytest.raises(DomainError):
        read_matrix(path)
    path.write_text("")
    with pytest.raises(DomainError):
        read_matrix(path)
