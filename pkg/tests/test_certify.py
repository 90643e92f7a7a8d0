import json
import math

import mpmath
import numpy as np
import pytest
from scipy import stats

from jlphase import tails
from jlphase.certify import (
    CertVerdict,
    certify_no_jld,
    empirical_failure_prob,
    eta_k,
    eta_threshold_scan,
    exact_failure_floor,
    spectral_profile,
)
from jlphase.errors import DomainError
from jlphase.rng import substream
from jlphase.transforms import (
    gaussian_matrix,
    haar_rows,
    orthogonal_projection_matrix,
    write_matrix,
)


# -- spectral profile -----------------------------------------------------------

def test_diagonal_profile():
    a = np.zeros((2, 4))
    a[0, 0], a[1, 1] = 2.0, 3.0
    prof = spectral_profile(a)
    assert np.allclose(prof.singular_values, [3.0, 2.0])
    assert prof.rank == 2 and (prof.k, prof.d) == (2, 4)


def test_orthogonal_profile_is_flat():
    a = orthogonal_projection_matrix(7, 50, substream(1))
    prof = spectral_profile(a)
    assert np.allclose(prof.singular_values, math.sqrt(50 / 7), atol=1e-8)


def test_profile_matches_high_precision_gram_eigenvalues():
    a = gaussian_matrix(3, 10, substream(4)).entries
    with mpmath.workdps(50):
        gram = mpmath.matrix(a.tolist()) * mpmath.matrix(a.T.tolist())
        ev = mpmath.eigsy(gram)[0]
        exact = sorted((float(mpmath.sqrt(v)) for v in ev), reverse=True)
    assert np.allclose(spectral_profile(a).singular_values, exact, rtol=1e-12)


def test_profile_from_file(tmp_path):
    a = gaussian_matrix(3, 8, substream(2))
    path = tmp_path / "a.txt"
    write_matrix(path, a)
    assert np.allclose(spectral_profile(path).singular_values, spectral_profile(a).singular_values)


def test_profile_reconstructs_squared_norms():
    a = gaussian_matrix(6, 40, substream(5)).entries
    prof = spectral_profile(a)
    w = substream(6).standard_normal((200, 40))
    direct = np.sum((w @ a.T) ** 2, axis=1)
    assert np.allclose(prof.squared_norm(w), direct, rtol=1e-8)


def test_profile_rank_detection():
    g = substream(3).standard_normal((5, 2)) @ substream(4).standard_normal((2, 20))
    assert spectral_profile(g).rank == 2
    assert spectral_profile(np.zeros((2, 5))).rank == 0


def test_profile_domain():
    with pytest.raises(DomainError):
        spectral_profile(np.ones((4, 3)))
    bad = np.ones((2, 3))
    bad[0, 1] = np.inf
    with pytest.raises(DomainError):
        spectral_profile(bad)


def test_profile_invariant_under_right_rotation():
    a = gaussian_matrix(4, 12, substream(1)).entries
    q = haar_rows(12, 12, substream(2))
    assert np.allclose(spectral_profile(a).singular_values, spectral_profile(a @ q).singular_values, atol=1e-8)


def test_failure_law_invariant_under_right_rotation():
    from jlphase.transforms import squared_norm_samples, ProjectionMatrix
    a = gaussian_matrix(4, 12, substream(1)).entries
    q = haar_rows(12, 12, substream(2))
    x = squared_norm_samples(ProjectionMatrix.from_array(a), 5000, seed=1)
    y = squared_norm_samples(ProjectionMatrix.from_array(a @ q), 5000, seed=2)
    assert stats.ks_2samp(x, y).pvalue > 0.01


# -- exact floor ------------------------------------------------------------------

def test_floor_uniform_case():
    assert exact_failure_floor(2, 4, 0.2) == pytest.approx(0.4, abs=1e-15)


def test_floor_frozen_value():
    # min(0.22253381545528101, 0.23317422585703690) from mpmath
    assert exact_failure_floor(100, 1000, 0.1) == pytest.approx(0.22253381545528101, abs=1e-12)
    val, _ = tails.tail_quadrature_with_error(tails.query(100, 1000, 0.1), "above")
    assert exact_failure_floor(100, 1000, 0.1) == pytest.approx(val, abs=1e-12)


def test_floor_nonincreasing_in_eps():
    vals = [exact_failure_floor(30, 500, e) for e in (0.01, 0.05, 0.1, 0.2, 0.4, 0.8)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


# -- empirical failure ------------------------------------------------------------

def test_identity_never_fails():
    for method in ("direct", "decomposed"):
        assert empirical_failure_prob(np.eye(5), 0.01, 3000, seed=1, method=method).p_hat == 0.0


def test_orthogonal_matches_exact_tails():
    a = orthogonal_projection_matrix(10, 80, substream(3))
    exact = tails.failure_probability(tails.query(10, 80, 0.2))
    for method in ("direct", "decomposed"):
        est = empirical_failure_prob(a, 0.2, 40_000, seed=5, method=method)
        assert abs(est.p_hat - exact) <= 4 * est.std_error


@pytest.mark.parametrize("which", range(4))
def test_direct_and_decomposed_agree(which):
    r = substream(20, which)
    k, d = 6, 30
    mats = [
        r.standard_normal((k, d)) / math.sqrt(k),
        np.diag(np.logspace(0, -3, k)) @ haar_rows(k, d, r) * math.sqrt(d / k),
        r.standard_normal((k, 2)) @ r.standard_normal((2, d)) / math.sqrt(2 * k),
        orthogonal_projection_matrix(k, d, r).entries * 0.9,
    ]
    a = mats[which]
    x = empirical_failure_prob(a, 0.25, 40_000, seed=1, method="direct")
    y = empirical_failure_prob(a, 0.25, 40_000, seed=1, method="decomposed")
    se = math.hypot(x.std_error, y.std_error)
    assert abs(x.p_hat - y.p_hat) <= 4 * max(se, 1e-12)


def test_floor_holds_for_random_matrices():
    k, d, eps = 8, 80, 0.2
    floor = exact_failure_floor(k, d, eps)
    for i in range(20):
        r = substream(30, i)
        a = r.standard_normal((k, d)) * r.uniform(0.05, 3.0) / math.sqrt(k)
        est = empirical_failure_prob(a, eps, 5000, seed=i, method="decomposed")
        assert est.p_hat >= floor - 4 * est.std_error


def test_empirical_domain():
    with pytest.raises(DomainError):
        empirical_failure_prob(np.eye(3), 0.0, 10)
    with pytest.raises(DomainError):
        empirical_failure_prob(np.eye(3), 0.1, 10, method="nope")


# -- certificate -------------------------------------------------------------------

def test_certificate_uniform_cases():
    v = certify_no_jld(2, 4, 0.2, 0.3)
    assert v.L == pytest.approx(0.4) and v.no_jld and v.margin == pytest.approx(0.1)
    assert not certify_no_jld(2, 4, 0.2, 0.45).no_jld


def test_verdict_invariant_and_record():
    v = certify_no_jld(200, 5000, 0.1, 0.01)
    assert v.no_jld == (v.L > v.delta)
    assert v.margin == v.L - v.delta
    rec = json.loads(v.to_record())
    for key in ("k", "d", "eps", "delta", "L", "margin", "no_jld", "eta", "gamma1", "gamma2", "analytic_floor"):
        assert key in rec
    assert "\n" not in v.to_record()
    assert v.eta == pytest.approx(200 * 0.01 / math.log(100))


def test_certificate_monotone_in_k_at_large_d():
    d, eps, delta = 100_000, 0.1, 0.01
    ks = list(range(1, 3000, 7))
    fires = [certify_no_jld(k, d, eps, delta).no_jld for k in ks]
    first_false = fires.index(False)
    assert all(fires[:first_false]) and not any(fires[first_false:])


def test_certificate_not_monotone_at_smallest_k():
    # the floor at k = 1 is below the floor at k = 2..7 when d = 40, eps = 0.2
    fires = [certify_no_jld(k, 40, 0.2, 0.3).no_jld for k in range(1, 10)]
    assert fires == [False, True, True, True, True, True, True, False, False]


def test_certificate_domain():
    with pytest.raises(DomainError):
        certify_no_jld(2, 4, 0.0, 0.1)
    with pytest.raises(DomainError):
        certify_no_jld(2, 4, 0.1, 0.6)
    with pytest.raises(DomainError):
        certify_no_jld(4, 4, 0.1, 0.1)


# -- eta scan ------------------------------------------------------------------------

def test_eta_scan_example():
    assert eta_k(2, 0.1, 1e-3) == 1381
    v = eta_threshold_scan(2, 0.1, 1e-3, 10**6)
    assert v.k == 1381 and v.eta == 2.0
    assert v.L == pytest.approx(exact_failure_floor(1381, 10**6, 0.1))
    assert v.analytic_floor == min(v.floor_above, v.floor_below)


def test_eta_scan_domain():
    with pytest.raises(DomainError):
        eta_threshold_scan(2, 0.1, 1e-3, 1000)
    with pytest.raises(DomainError):
        eta_threshold_scan(0.0, 0.1, 1e-3, 1000)


def test_small_eta_fires():
    ls = [eta_threshold_scan(eta, 0.1, 1e-8, 10**5).L for eta in (0.4, 0.2, 0.1, 0.05)]
    assert ls == sorted(ls) and ls[-1] > 0.2
    assert eta_threshold_scan(0.05, 0.1, 1e-8, 10**5).no_jld


@pytest.mark.parametrize("eta", [0.5, 1.0, 2.0, 3.0, 3.9])
@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("delta", [0.1, 1e-3, 1e-6])
def test_analytic_floor_below_exact(eta, eps, delta):
    try:
        v = eta_threshold_scan(eta, eps, delta, 10**5)
    except DomainError:
        pytest.skip("k outside (0, d)")
    assert v.analytic_floor <= v.L


def test_large_s0_leaves_analytic_fields_empty():
    v = certify_no_jld(20, 40, 0.2, 0.1)
    assert v.gamma1 is None and v.analytic_floor is None
    assert isinstance(v, CertVerdict)
