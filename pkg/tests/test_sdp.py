"""Tests for the interior-point conic solver and KKT verification."""

import numpy as np
import pytest

from koopsos.sdp import (FREE, NONNEG, PSD, SdpProblem, smat, solve, svec,
                         verify_kkt)


def test_svec_round_trip_and_inner_product():
    rng = np.random.default_rng(0)
    for s in (1, 2, 5):
        A = rng.standard_normal((s, s))
        A = A + A.T
        B = rng.standard_normal((s, s))
        B = B + B.T
        np.testing.assert_allclose(smat(svec(A)), A, atol=1e-14)
        assert svec(A) @ svec(B) == pytest.approx(np.sum(A * B), abs=1e-10)


def _random_feasible(rng, blocks, m):
    """Strictly feasible primal-dual pair by construction."""
    dim = 0
    x0 = []
    s0 = []
    for kind, size in blocks:
        if kind == NONNEG:
            x0.append(rng.uniform(0.5, 2.0, size))
            s0.append(rng.uniform(0.5, 2.0, size))
            dim += size
        else:
            for store in (x0, s0):
                Q = rng.standard_normal((size, size))
                store.append(svec(Q @ Q.T + 0.5 * np.eye(size)))
            dim += size * (size + 1) // 2
    x0 = np.concatenate(x0)
    s0 = np.concatenate(s0)
    A = rng.standard_normal((m, dim))
    y0 = rng.standard_normal(m)
    return SdpProblem(blocks, A.T @ y0 + s0, A, A @ x0)


def test_random_feasible_suite():
    rng = np.random.default_rng(2024)
    choices = [
        [(PSD, 3)],
        [(PSD, 5), (NONNEG, 4)],
        [(PSD, 10)],
        [(PSD, 20)],
        [(NONNEG, 8), (PSD, 7), (PSD, 2)],
    ]
    for trial in range(50):
        blocks = choices[trial % len(choices)]
        m = int(rng.integers(2, 8))
        prob = _random_feasible(rng, blocks, m)
        sol = solve(prob, tol=1e-8)
        assert sol.status == "Optimal", f"trial {trial}: {sol.status}"
        primal, cone, gap = verify_kkt(prob, sol)
        assert gap <= 1e-8, f"trial {trial}: gap {gap}"
        assert primal <= 1e-8 and cone <= 1e-7


def test_constructed_infeasible_suite():
    # force a negative value on a coordinate that must be nonnegative
    rng = np.random.default_rng(7)
    for trial in range(10):
        size = int(rng.integers(2, 6))
        dim = size * (size + 1) // 2
        # first constraint pins a diagonal entry of the PSD block to -1
        E = np.outer(_unit(size, trial % size), _unit(size, trial % size))
        rows = [svec(E)]
        b = [-1.0]
        for _ in range(int(rng.integers(0, 3))):
            M = rng.standard_normal((size, size))
            rows.append(svec(M + M.T))
            b.append(float(rng.standard_normal()))
        prob = SdpProblem([(PSD, size)], rng.standard_normal(dim),
                          np.array(rows), np.array(b))
        sol = solve(prob, tol=1e-9)
        assert sol.status == "Infeasible", f"trial {trial}: {sol.status}"


def _unit(size, j):
    u = np.zeros(size)
    u[j] = 1.0
    return u


def test_simple_lp_optimum():
    # minimize x1 + 2 x2 subject to x1 + x2 = 1, x >= 0  ->  x = (1, 0)
    prob = SdpProblem([(NONNEG, 2)], np.array([1.0, 2.0]),
                      np.array([[1.0, 1.0]]), np.array([1.0]))
    sol = solve(prob)
    assert sol.status == "Optimal"
    assert sol.objective == pytest.approx(1.0, abs=1e-7)
    np.testing.assert_allclose(sol.z, [1.0, 0.0], atol=1e-6)


def test_simple_sdp_optimum():
    # minimize tr(X) subject to X11 = 1, X PSD  ->  tr(X) = 1
    I2 = svec(np.eye(2))
    E11 = svec(np.diag([1.0, 0.0]))
    prob = SdpProblem([(PSD, 2)], I2, E11[None, :], np.array([1.0]))
    sol = solve(prob)
    assert sol.status == "Optimal"
    assert sol.objective == pytest.approx(1.0, abs=1e-7)


def test_unbounded_detection():
    # minimize -x1 with only x1 - x2 = 0: ray (t, t) drives objective down
    prob = SdpProblem([(NONNEG, 2)], np.array([-1.0, 0.0]),
                      np.array([[1.0, -1.0]]), np.array([0.0]))
    assert solve(prob).status == "Unbounded"


def test_free_variable_elimination():
    # minimize x_free^2-like: free var fixed by equality, cone part solves
    prob = SdpProblem([(FREE, 1), (NONNEG, 2)], np.array([1.0, 1.0, 1.0]),
                      np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]]),
                      np.array([3.0, 1.0]))
    sol = solve(prob)
    assert sol.status == "Optimal"
    assert sol.z[0] == pytest.approx(3.0, abs=1e-7)
    assert sol.objective == pytest.approx(4.0, abs=1e-7)


def test_inconsistent_free_rows_infeasible():
    prob = SdpProblem([(FREE, 1)], np.array([0.0]),
                      np.array([[1.0], [1.0]]), np.array([0.0, 1.0]))
    assert solve(prob).status == "Infeasible"


def test_weak_duality_on_random_instances():
    rng = np.random.default_rng(5)
    for _ in range(10):
        prob = _random_feasible(rng, [(PSD, 4), (NONNEG, 3)], 4)
        sol = solve(prob, tol=1e-9)
        assert sol.status == "Optimal"
        # b^T y <= c^T x for any feasible pair; at optimum they coincide
        assert prob.b @ sol.y <= prob.c @ sol.z + 1e-7


def test_block_order_permutation_equivalence():
    rng = np.random.default_rng(11)
    prob = _random_feasible(rng, [(NONNEG, 3), (PSD, 3)], 3)
    n1, dpsd = 3, 6
    # swap the two blocks, permuting columns accordingly
    perm = np.concatenate([np.arange(n1, n1 + dpsd), np.arange(n1)])
    prob2 = SdpProblem([(PSD, 3), (NONNEG, 3)], prob.c[perm],
                       prob.A[:, perm], prob.b)
    s1 = solve(prob, tol=1e-9)
    s2 = solve(prob2, tol=1e-9)
    assert s1.status == s2.status == "Optimal"
    assert s1.objective == pytest.approx(s2.objective, abs=1e-6)


def test_json_round_trip():
    rng = np.random.default_rng(3)
    prob = _random_feasible(rng, [(PSD, 3), (NONNEG, 2)], 3)
    again = SdpProblem.from_json(prob.to_json())
    assert again.blocks == prob.blocks
    np.testing.assert_allclose(again.A, prob.A)
    np.testing.assert_allclose(again.b, prob.b)
    np.testing.assert_allclose(again.c, prob.c)


def test_rejects_bad_data():
    with pytest.raises(ValueError):
        SdpProblem([(NONNEG, 2)], np.array([1.0]), np.zeros((1, 2)),
                   np.array([0.0]))
    with pytest.raises(ValueError):
        SdpProblem([("cone", 2)], np.zeros(2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        SdpProblem([(NONNEG, 2)], np.array([np.nan, 0.0]), np.zeros((0, 2)),
                   np.zeros(0))


def test_never_optimal_without_meeting_tolerance():
    rng = np.random.default_rng(21)
    prob = _random_feasible(rng, [(PSD, 6)], 5)
    sol = solve(prob, tol=1e-9, max_iter=3)
    if sol.status == "Optimal":
        assert max(verify_kkt(prob, sol)) <= 1e-8
