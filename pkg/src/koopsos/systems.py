"""Built-in example systems, their exact Lie derivatives, and snapshot sampling.

Four systems are provided:

* ``MapLyap2D``: discrete map (x, y) -> (0.3 x, -x + 0.5 y + (7/18) x^2).
* ``VanDerPol``: dx/dt = y, dy/dt = mu (1 - x^2) y - x with mu = 0.1.
* ``StochasticLogistic``: x -> lam x (1 - x) with lam ~ Uniform[0, 4].
* ``CircularOrbit``: dx1/dt = -x2 + x1 (1 - r^2), dx2/dt = x1 + x2 (1 - r^2).

Exact Lie derivatives use f . grad for ODEs, p o f - p for deterministic maps,
and the closed-form moments E[lam^k] = 4^k / (k + 1) for the stochastic map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .polybasis import (CHEBYSHEV, MONOMIAL, Dictionary, Poly, TargetTooSmall,
                        cheb_to_monomial, monomial_to_cheb, poly_from_index,
                        sparse_compose, sparse_gradient, sparse_product,
                        sparse_to_poly, to_sparse, total_degree_dictionary)
from .snapshots import GENERATOR, KOOPMAN, SnapshotSet

MAP_LYAP_2D = "MapLyap2D"
VAN_DER_POL = "VanDerPol"
STOCHASTIC_LOGISTIC = "StochasticLogistic"
CIRCULAR_ORBIT = "CircularOrbit"

DISCRETE = "discrete"
CONTINUOUS = "continuous"

_TIME_KIND = {
    MAP_LYAP_2D: DISCRETE,
    VAN_DER_POL: CONTINUOUS,
    STOCHASTIC_LOGISTIC: DISCRETE,
    CIRCULAR_ORBIT: CONTINUOUS,
}
_DIMENSION = {
    MAP_LYAP_2D: 2,
    VAN_DER_POL: 2,
    STOCHASTIC_LOGISTIC: 1,
    CIRCULAR_ORBIT: 2,
}


class WrongSystemKind(ValueError):
    pass


class StateOutOfDomain(ValueError):
    pass


@dataclass(frozen=True)
class SystemSpec:
    """One of the built-in systems plus its parameters."""

    id: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in _TIME_KIND:
            raise WrongSystemKind(f"unknown system {self.id!r}")
        if self.id == VAN_DER_POL:
            object.__setattr__(
                self, "parameters", {"mu": float(self.parameters.get("mu", 0.1))})
        elif self.parameters:
            raise WrongSystemKind(f"{self.id} takes no parameters")

    @property
    def time_kind(self) -> str:
        return _TIME_KIND[self.id]

    @property
    def dimension(self) -> int:
        return _DIMENSION[self.id]

    @property
    def mu(self) -> float:
        return self.parameters.get("mu", 0.1)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; identical seed gives an identical stream."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def step_map(spec: SystemSpec, x: np.ndarray) -> np.ndarray:
    """One step of a deterministic discrete map."""
    if spec.id != MAP_LYAP_2D:
        raise WrongSystemKind(f"{spec.id} is not a deterministic discrete map")
    x = np.asarray(x, dtype=float)
    a, b = x[..., 0], x[..., 1]
    return np.stack([0.3 * a, -a + 0.5 * b + (7.0 / 18.0) * a * a], axis=-1)


def step_stochastic(spec: SystemSpec, x, rng: np.random.Generator):
    """One step x -> lam x (1 - x) with lam drawn uniformly from [0, 4]."""
    if spec.id != STOCHASTIC_LOGISTIC:
        raise WrongSystemKind(f"{spec.id} is not the stochastic logistic map")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise StateOutOfDomain("logistic state must lie in [0, 1]")
    lam = rng.uniform(0.0, 4.0, size=x.shape)
    return lam * x * (1.0 - x)


def integrate_ode(spec: SystemSpec, x0, tau: float, n_steps: int) -> np.ndarray:
    """Fixed-step RK4 trajectory; returns (n_steps + 1, d) including x0."""
    if spec.time_kind != CONTINUOUS:
        raise WrongSystemKind(f"{spec.id} is not an ODE system")
    kind = _kernels.VDP if spec.id == VAN_DER_POL else _kernels.CIRCLE
    out = _kernels.rk4_trajectory(kind, x0, tau, n_steps, mu=spec.mu)
    if not np.all(np.isfinite(out)):
        raise StateOutOfDomain("trajectory left the finite domain")
    return out


# -- exact Lie derivatives -----------------------------------------------------

def _vector_field_sparse(spec: SystemSpec) -> list[dict]:
    if spec.id == VAN_DER_POL:
        mu = spec.mu
        return [{(0, 1): 1.0},
                {(0, 1): mu, (2, 1): -mu, (1, 0): -1.0}]
    if spec.id == CIRCULAR_ORBIT:
        return [{(0, 1): -1.0, (1, 0): 1.0, (3, 0): -1.0, (1, 2): -1.0},
                {(1, 0): 1.0, (0, 1): 1.0, (2, 1): -1.0, (0, 3): -1.0}]
    raise WrongSystemKind(f"{spec.id} has no polynomial vector field")


def _map_components_sparse(spec: SystemSpec) -> list[dict]:
    if spec.id == MAP_LYAP_2D:
        return [{(1, 0): 0.3},
                {(1, 0): -1.0, (0, 1): 0.5, (2, 0): 7.0 / 18.0}]
    raise WrongSystemKind(f"{spec.id} is not a deterministic discrete map")


def _lie_sparse(spec: SystemSpec, sp: dict) -> dict:
    """Exact Lie derivative of a sparse monomial polynomial."""
    if spec.time_kind == CONTINUOUS:
        f = _vector_field_sparse(spec)
        out: dict = {}
        for j in range(spec.dimension):
            term = sparse_product(MONOMIAL, f[j], sparse_gradient(sp, j))
            for idx, c in term.items():
                out[idx] = out.get(idx, 0.0) + c
        return {k: v for k, v in out.items() if v != 0.0}
    if spec.id == MAP_LYAP_2D:
        composed = sparse_compose(sp, _map_components_sparse(spec))
        for idx, c in sp.items():
            composed[idx] = composed.get(idx, 0.0) - c
        return {k: v for k, v in composed.items() if v != 0.0}
    # stochastic logistic: E[p(lam x (1-x))] - p(x) with E[lam^k] = 4^k/(k+1)
    base = {(1,): 1.0, (2,): -1.0}
    out = {}
    power = {(0,): 1.0}
    max_deg = max((idx[0] for idx in sp), default=0)
    for k in range(max_deg + 1):
        c = sp.get((k,), 0.0)
        if c != 0.0:
            moment = 4.0 ** k / (k + 1)
            for idx, w in power.items():
                out[idx] = out.get(idx, 0.0) + c * moment * w
            out[(k,)] = out.get((k,), 0.0) - c
        if k < max_deg:
            power = sparse_product(MONOMIAL, power, base)
    return {k: v for k, v in out.items() if v != 0.0}


def _logistic_cheb_lie(p: Poly, target: Dictionary) -> Poly:
    """Exact logistic Lie derivative of a Chebyshev polynomial, built by
    Chebyshev interpolation of quadrature-exact point values.

    Going through the monomial basis loses all accuracy above degree ten or
    so (the conversion coefficients grow like 4^deg and cancel), while every
    quantity here is evaluated where it is O(1).  The u-integrand is a
    polynomial of degree deg(p) in u, so Gauss-Legendre quadrature with
    deg(p)//2 + 1 nodes is exact, and the result is a polynomial of degree
    2 deg(p) recovered exactly from its values at Chebyshev points.
    """
    degp = p.basis.max_degree
    N = max(2 * degp, 1)
    zs = np.cos(np.pi * np.arange(N + 1) / N)
    lo, hi = (p.basis.box or ((0.0, 1.0),))[0]
    xs = lo + (zs + 1.0) * (hi - lo) / 2.0
    nodes, wts = np.polynomial.legendre.leggauss(degp // 2 + 1)
    u = (nodes + 1.0) / 2.0
    w = wts / 2.0
    vals = -p(xs[:, None])
    for ui, wi in zip(u, w):
        vals = vals + wi * p((4.0 * ui * xs * (1.0 - xs))[:, None])
    coeffs = np.polynomial.chebyshev.chebfit(zs, vals, N)
    out = np.zeros(target.size)
    spill = 0.0
    for k, ck in enumerate(coeffs):
        idx = (k,)
        if idx in target.indices:
            out[target.position(idx)] = ck
        else:
            spill = max(spill, abs(ck))
    if spill > 1e-9 * (1.0 + np.max(np.abs(coeffs))):
        raise TargetTooSmall([(k,) for k in range(target.max_degree + 1,
                                                  N + 1)])
    return Poly(target, out)


def exact_lie_apply(spec: SystemSpec, p: Poly, target: Dictionary) -> Poly:
    """Exact Lie derivative of p, expressed in the target dictionary."""
    if p.basis.dimension != spec.dimension:
        raise WrongSystemKind("polynomial dimension does not match system")
    if (p.basis.family == CHEBYSHEV and target.family == CHEBYSHEV
            and spec.id == STOCHASTIC_LOGISTIC):
        if p.basis.box != target.box:
            raise WrongSystemKind("source and target boxes must agree")
        return _logistic_cheb_lie(p, target)
    if p.basis.family == CHEBYSHEV:
        deg = p.basis.max_degree
        mono = total_degree_dictionary(MONOMIAL, p.basis.dimension, deg)
        sp = to_sparse(cheb_to_monomial(p, mono))
    else:
        sp = to_sparse(p)
    out = _lie_sparse(spec, sp)
    if target.family == MONOMIAL:
        return sparse_to_poly(out, target)
    deg = max((sum(i) for i in out), default=0)
    mono = total_degree_dictionary(MONOMIAL, target.dimension, deg)
    return monomial_to_cheb(sparse_to_poly(out, mono), target)


def exact_lie_values(spec: SystemSpec, phi: Dictionary, X: np.ndarray
                     ) -> np.ndarray:
    """Exact Lie derivative of every element of phi evaluated at rows of X;
    returns shape (n, phi.size)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cols = []
    for j in range(phi.size):
        lie = _lie_sparse(spec, to_sparse(
            cheb_to_monomial(
                poly_from_index(phi, phi.indices[j]),
                total_degree_dictionary(MONOMIAL, phi.dimension,
                                        phi.max_degree))
            if phi.family == CHEBYSHEV else poly_from_index(phi, phi.indices[j])))
        if lie:
            expo = np.array(list(lie.keys()), dtype=np.int64)
            coeffs = np.array(list(lie.values()))
            cols.append(coeffs @ _kernels.monomial_eval(X, expo))
        else:
            cols.append(np.zeros(X.shape[0]))
    return np.column_stack(cols)


# -- snapshot sampling ---------------------------------------------------------

def sample_snapshots(spec: SystemSpec, mode: str, tau: float, n: int,
                     rng: np.random.Generator | None = None,
                     snapshot_kind: str = KOOPMAN,
                     x0=None, bounds=None, phi: Dictionary | None = None,
                     seed: int | None = None) -> SnapshotSet:
    """Generate n snapshots.

    Modes: ``trajectory`` (iterate from x0), ``iid_uniform_box`` (x_i uniform
    in bounds), ``limit_cycle`` (x_i on the unit circle at angles i*tau,
    CircularOrbit only).  For ``generator`` kind the y rows hold exact Lie
    derivative values of each element of phi at x_i.
    """
    if rng is None:
        rng = make_rng(0 if seed is None else seed)
    if snapshot_kind not in (KOOPMAN, GENERATOR):
        raise ValueError(f"unknown snapshot kind {snapshot_kind!r}")
    if snapshot_kind == GENERATOR and phi is None:
        raise ValueError("generator snapshots require a phi dictionary")

    if mode == "limit_cycle":
        if spec.id != CIRCULAR_ORBIT:
            raise WrongSystemKind("limit_cycle sampling needs CircularOrbit")
        angles = tau * np.arange(n)
        t = angles
        X = np.column_stack([np.cos(angles), np.sin(angles)])
        Y = np.column_stack([np.cos(angles + tau), np.sin(angles + tau)])
    elif mode == "trajectory":
        if spec.id == STOCHASTIC_LOGISTIC:
            start = 0.51 if x0 is None else float(x0)
            states = _kernels.logistic_trajectory(start, rng.uniform(0.0, 4.0, n))
            t = np.arange(n, dtype=float)
            X = states[:n, None]
            Y = states[1:, None]
        elif spec.time_kind == CONTINUOUS:
            start = np.array([0.1, 0.2]) if x0 is None else np.asarray(x0, float)
            states = integrate_ode(spec, start, tau, n)
            t = tau * np.arange(n)
            X = states[:n]
            Y = states[1:]
        else:
            start = np.array([1.0, 0.0]) if x0 is None else np.asarray(x0, float)
            X = np.empty((n, 2))
            Y = np.empty((n, 2))
            s = start
            for i in range(n):
                X[i] = s
                s = step_map(spec, s)
                Y[i] = s
            t = np.arange(n, dtype=float)
    elif mode == "iid_uniform_box":
        if bounds is None:
            raise ValueError("iid_uniform_box sampling requires bounds")
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
        X = rng.uniform(lo, hi, size=(n, spec.dimension))
        t = np.zeros(n)
        if spec.id == MAP_LYAP_2D:
            Y = step_map(spec, X)
        elif spec.id == STOCHASTIC_LOGISTIC:
            Y = step_stochastic(spec, X[:, 0], rng)[:, None]
        else:
            n_sub = max(1, math.ceil(tau / 1e-3))
            Y = np.array([integrate_ode(spec, x, tau / n_sub, n_sub)[-1]
                          for x in X])
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")

    if snapshot_kind == GENERATOR:
        Y = exact_lie_values(spec, phi, X)

    meta = {"system": spec.id, "mode": mode, "tau": float(tau), "n": int(n),
            "seed": seed, "snapshot_kind": snapshot_kind}
    return SnapshotSet(t=t, X=X, Y=Y, tau=float(tau), kind=snapshot_kind,
                       metadata=meta)
