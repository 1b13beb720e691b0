"""Tests for the EDMD / gEDMD fits, moment matrices, and diagnostics."""

import numpy as np
import pytest

from koopsos.koopman import (analytic_circle_moments, apply_lie,
                             circle_moment, convergence_study,
                             divergence_indicator, fit_edmd, fit_gedmd,
                             loglog_slope, moment_matrices, pinv)
from koopsos.polybasis import (MONOMIAL, Poly, evaluate, inclusion_matrix,
                               total_degree_dictionary)
from koopsos.snapshots import GENERATOR, KOOPMAN, SnapshotSet
from koopsos.systems import (CIRCULAR_ORBIT, STOCHASTIC_LOGISTIC, VAN_DER_POL,
                             SystemSpec, exact_lie_values, make_rng,
                             sample_snapshots)
from koopsos.auxfn import exact_lie_matrix


# -- pseudoinverse ----------------------------------------------------------

def test_pinv_diagonal():
    M = np.diag([2.0, 0.0, 0.5])
    np.testing.assert_allclose(pinv(M), np.diag([0.5, 0.0, 2.0]), atol=1e-14)


def test_pinv_rank_one():
    M = np.full((2, 2), 0.25)
    np.testing.assert_allclose(pinv(M), np.ones((2, 2)), atol=1e-12)


def test_pinv_moore_penrose_axioms():
    rng = np.random.default_rng(0)
    for _ in range(5):
        M = rng.standard_normal((6, 4)) @ rng.standard_normal((4, 5))
        P = pinv(M)
        np.testing.assert_allclose(M @ P @ M, M, atol=1e-10)
        np.testing.assert_allclose(P @ M @ P, P, atol=1e-10)
        np.testing.assert_allclose((M @ P).T, M @ P, atol=1e-10)
        np.testing.assert_allclose((P @ M).T, P @ M, atol=1e-10)


def test_pinv_truncates_small_singular_values():
    M = np.diag([1.0, 1e-15])
    P = pinv(M, rel_tol=1e-12)
    np.testing.assert_allclose(P, np.diag([1.0, 0.0]), atol=1e-14)


# -- fits and identities ------------------------------------------------------

def _random_snapshots(rng, n=60, kind=KOOPMAN, q=2):
    X = rng.uniform(-1, 1, size=(n, 2))
    Y = (rng.uniform(-1, 1, size=(n, 2)) if kind == KOOPMAN
         else rng.standard_normal((n, q)))
    return SnapshotSet(t=np.arange(n, dtype=float), X=X, Y=Y, tau=0.1,
                       kind=kind)


def test_moment_identities_randomized():
    # K = A B^+, G = C B^+, L = D B^+ + (1/tau) Theta (B B^+ - I)
    rng = np.random.default_rng(42)
    phi = total_degree_dictionary(MONOMIAL, 2, 2)
    psi = total_degree_dictionary(MONOMIAL, 2, 3)
    theta = inclusion_matrix(phi, psi)
    for trial in range(15):
        s = _random_snapshots(rng, n=rng.integers(8, 80))
        ops = fit_edmd(s, phi, psi)
        mm = moment_matrices(s, phi, psi)
        Bp = pinv(mm.B)
        scale = 1.0 + np.linalg.norm(ops.K)
        assert np.linalg.norm(ops.K - mm.A_tau @ Bp) / scale < 1e-9
        L_id = mm.D_tau @ Bp + (theta @ (mm.B @ Bp - np.eye(psi.size))) / s.tau
        assert (np.linalg.norm(ops.L - L_id)
                / (1.0 + np.linalg.norm(ops.L)) < 1e-9)

        g = _random_snapshots(rng, n=rng.integers(8, 80), kind=GENERATOR,
                              q=phi.size)
        gops = fit_gedmd(g, phi, psi)
        gm = moment_matrices(g, phi, psi)
        assert (np.linalg.norm(gops.G - gm.C @ pinv(gm.B))
                / (1.0 + np.linalg.norm(gops.G)) < 1e-9)


def test_identity_dynamics_gives_theta_and_zero_lie():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(200, 2))
    s = SnapshotSet(t=np.zeros(200), X=X, Y=X.copy(), tau=0.5, kind=KOOPMAN)
    phi = total_degree_dictionary(MONOMIAL, 2, 2)
    psi = total_degree_dictionary(MONOMIAL, 2, 3)
    ops = fit_edmd(s, phi, psi)
    np.testing.assert_allclose(ops.K, ops.theta, atol=1e-9)
    np.testing.assert_allclose(ops.L, 0.0, atol=1e-9)


def test_linear_map_koopman_oracle():
    # for y = M x and phi = psi = (1, x1, x2), row j of K holds the exact
    # coefficients of phi_j composed with M
    rng = np.random.default_rng(7)
    dic = total_degree_dictionary(MONOMIAL, 2, 1)
    for _ in range(5):
        M = rng.standard_normal((2, 2))
        X = rng.uniform(-1, 1, size=(100, 2))
        s = SnapshotSet(t=np.zeros(100), X=X, Y=X @ M.T, tau=1.0,
                        kind=KOOPMAN)
        ops = fit_edmd(s, dic, dic)
        expected = np.zeros((3, 3))
        expected[0, 0] = 1.0
        expected[1, 1:] = M[0]
        expected[2, 1:] = M[1]
        np.testing.assert_allclose(ops.K, expected, atol=1e-9)


def test_gedmd_recovers_exact_generator():
    # Lie images of degree-2 monomials under the van der Pol field live in
    # the degree-4 dictionary, so the fit is residual-free and exact
    spec = SystemSpec(VAN_DER_POL)
    phi = total_degree_dictionary(MONOMIAL, 2, 2)
    psi = total_degree_dictionary(MONOMIAL, 2, 4)
    s = sample_snapshots(spec, "iid_uniform_box", 1e-3, 300, rng=make_rng(3),
                         snapshot_kind=GENERATOR, phi=phi,
                         bounds=[(-2, 2), (-2, 2)])
    ops = fit_gedmd(s, phi, psi)
    np.testing.assert_allclose(ops.G, exact_lie_matrix(spec, phi, psi),
                               atol=1e-8)


def test_apply_lie_matches_matrix():
    rng = np.random.default_rng(5)
    phi = total_degree_dictionary(MONOMIAL, 2, 2)
    psi = total_degree_dictionary(MONOMIAL, 2, 3)
    s = _random_snapshots(rng, n=50)
    ops = fit_edmd(s, phi, psi)
    p = Poly(phi, rng.standard_normal(phi.size))
    np.testing.assert_allclose(apply_lie(ops, "edmd", p).coeffs,
                               p.coeffs @ ops.L, atol=1e-14)


def test_fit_invariant_under_row_reorder_and_duplication():
    rng = np.random.default_rng(9)
    phi = total_degree_dictionary(MONOMIAL, 2, 2)
    psi = total_degree_dictionary(MONOMIAL, 2, 3)
    s = _random_snapshots(rng, n=40)
    perm = rng.permutation(s.n)
    s_perm = SnapshotSet(t=s.t[perm], X=s.X[perm], Y=s.Y[perm], tau=s.tau,
                         kind=s.kind)
    s_dup = SnapshotSet(t=np.concatenate([s.t, s.t]),
                        X=np.vstack([s.X, s.X]), Y=np.vstack([s.Y, s.Y]),
                        tau=s.tau, kind=s.kind)
    K = fit_edmd(s, phi, psi).K
    np.testing.assert_allclose(fit_edmd(s_perm, phi, psi).K, K, atol=1e-10)
    np.testing.assert_allclose(fit_edmd(s_dup, phi, psi).K, K, atol=1e-10)


# -- circle moments ------------------------------------------------------------

def test_circle_moment_wallis_vs_quadrature():
    thetas = np.linspace(0.0, 2 * np.pi, 20001)[:-1]
    for a in range(0, 7):
        for b in range(0, 7):
            quad = float(np.mean(np.cos(thetas) ** a * np.sin(thetas) ** b))
            assert circle_moment(a, b) == pytest.approx(quad, abs=1e-10)


def test_analytic_circle_moments_match_equispaced_data():
    # n equispaced angles integrate trigonometric polynomials exactly
    spec = SystemSpec(CIRCULAR_ORBIT)
    psi = total_degree_dictionary(MONOMIAL, 2, 2)
    n = 100
    s = sample_snapshots(spec, "limit_cycle", 2 * np.pi / n, n)
    B_emp = moment_matrices(s, psi, psi).B
    B_exact = analytic_circle_moments(psi).B
    np.testing.assert_allclose(B_emp, B_exact, atol=1e-10)


def test_pinv_of_empirical_moments_converges():
    # pinv(B_n) approaches pinv(B) when the empirical measure converges and
    # the rank stabilizes
    spec = SystemSpec(CIRCULAR_ORBIT)
    psi = total_degree_dictionary(MONOMIAL, 2, 2)
    B_exact = analytic_circle_moments(psi).B
    n = 1_000_000
    s = sample_snapshots(spec, "limit_cycle", 2 * np.pi / n, n)
    B_n = moment_matrices(s, psi, psi).B
    assert np.linalg.norm(pinv(B_n) - pinv(B_exact)) < 1e-3


def test_divergence_indicator_vanishes_on_data_support():
    # the indicator polynomial is zero wherever psi(x) lies in range(B)
    spec = SystemSpec(CIRCULAR_ORBIT)
    phi = total_degree_dictionary(MONOMIAL, 2, 2)
    psi = total_degree_dictionary(MONOMIAL, 2, 4)
    n = 64
    s = sample_snapshots(spec, "limit_cycle", 2 * np.pi / n, n)
    mm = moment_matrices(s, phi, psi)
    theta = inclusion_matrix(phi, psi)
    p = Poly(phi, np.ones(phi.size))
    ind = divergence_indicator(mm.B, theta, p, psi)
    np.testing.assert_allclose(ind(s.X), 0.0, atol=1e-8)
    # off the circle the indicator is nonzero
    assert abs(ind(np.array([0.5, 0.0]))) > 1e-3


# -- convergence ---------------------------------------------------------------

def test_loglog_slope_exact_power_law():
    ns = np.array([1e2, 1e3, 1e4])
    dists = 3.0 * ns ** -0.5
    assert loglog_slope(ns, dists) == pytest.approx(-0.5, abs=1e-12)


def test_convergence_study_shapes_and_decay():
    spec = SystemSpec(STOCHASTIC_LOGISTIC)
    from koopsos.polybasis import CHEBYSHEV
    box = ((0.0, 1.0),)
    phi = total_degree_dictionary(CHEBYSHEV, 1, 2, box)
    psi = total_degree_dictionary(CHEBYSHEV, 1, 4, box)

    def sample(n, seed):
        return sample_snapshots(spec, "trajectory", 1.0, n,
                                rng=make_rng(seed))

    ns, dists, table = convergence_study(sample, phi, psi,
                                         [500, 5000, 50000], [0, 1], 200000)
    assert table.shape == (2, 3)
    assert dists[0] > dists[-1]
