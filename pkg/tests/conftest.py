"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from dirichletforms import Edge, EnergySpec, KillTerm, MeasureSpace


def random_connected_spec(
    n: int,
    seed: int,
    p_range=(2.0, 2.0),
    extra_edges: int | None = None,
    n_kill: int = 0,
    n_boundary: int = 0,
    q_range=None,
    mu_range=(0.5, 2.0),
    w_range=(0.5, 2.0),
    kappa_range=(0.5, 2.0),
) -> EnergySpec:
    """Random spec whose non-boundary subgraph is connected.

    Built from a random spanning tree plus extra edges; boundary points are
    attached as extra leaves so removing them never disconnects the rest.
    """
    rng = np.random.default_rng(seed)
    q_range = p_range if q_range is None else q_range
    pts = [f"v{i}" for i in range(n)]
    edges = []
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.append(
            Edge(pts[i], pts[j], float(rng.uniform(*w_range)), float(rng.uniform(*p_range)))
        )
    extra = n if extra_edges is None else extra_edges
    for _ in range(extra):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            edges.append(
                Edge(
                    pts[int(i)],
                    pts[int(j)],
                    float(rng.uniform(*w_range)),
                    float(rng.uniform(*p_range)),
                )
            )
    boundary = []
    for b in range(n_boundary):
        name = f"b{b}"
        pts.append(name)
        j = int(rng.integers(0, n))
        edges.append(
            Edge(name, pts[j], float(rng.uniform(*w_range)), float(rng.uniform(*p_range)))
        )
        boundary.append(name)
    kill = tuple(
        KillTerm(
            pts[int(i)],
            float(rng.uniform(*kappa_range)),
            float(rng.uniform(*q_range)),
        )
        for i in rng.choice(n, size=min(n_kill, n), replace=False)
    )
    space = MeasureSpace(tuple(pts), rng.uniform(*mu_range, size=len(pts)))
    return EnergySpec(space, tuple(edges), kill, frozenset(boundary))


def path_spec(n_edges: int, p: float = 2.0, dirichlet_right: bool = True) -> EnergySpec:
    """Unit-weight path with n_edges edges, optional Dirichlet right end."""
    pts = tuple(str(i) for i in range(n_edges + 1))
    space = MeasureSpace(pts, np.ones(n_edges + 1))
    edges = tuple(Edge(str(i), str(i + 1), 1.0, p) for i in range(n_edges))
    boundary = frozenset({str(n_edges)}) if dirichlet_right else frozenset()
    return EnergySpec(space, edges, (), boundary)


def single_vertex_spec(kappa: float = 1.0, q: float = 2.0, mu: float = 1.0) -> EnergySpec:
    space = MeasureSpace(("x",), np.array([mu]))
    return EnergySpec(space, (), (KillTerm("x", kappa, q),))


def two_vertex_spec(w: float = 1.0, p: float = 2.0, mu=(1.0, 1.0)) -> EnergySpec:
    space = MeasureSpace(("a", "b"), np.asarray(mu, dtype=float))
    return EnergySpec(space, (Edge("a", "b", w, p),))


# -- quadratic oracles (independent of the iterative solvers) --------------


def quadratic_matrix(spec: EnergySpec) -> np.ndarray:
    """Euclidean gradient matrix A with grad E(g) = A g / mu (all exponents 2)."""
    n = spec.space.n
    A = np.zeros((n, n))
    for e in spec.edges:
        assert e.exponent == 2.0
        i, j = spec.space.index(e.u), spec.space.index(e.v)
        A[i, i] += e.weight
        A[j, j] += e.weight
        A[i, j] -= e.weight
        A[j, i] -= e.weight
    for k in spec.kill:
        assert k.exponent == 2.0
        i = spec.space.index(k.point)
        A[i, i] += k.kappa * spec.space.mu[i]
    return A


def prox_oracle(spec: EnergySpec, alpha: float, f) -> np.ndarray:
    """Direct linear solve of the quadratic prox optimality system."""
    A = quadratic_matrix(spec)
    mu = spec.space.mu
    free = spec.free_mask
    g = np.zeros(spec.space.n)
    M = A + alpha * np.diag(mu)
    g[free] = np.linalg.solve(M[np.ix_(free, free)], (mu * f)[free])
    return g


def green_oracle(spec: EnergySpec, f) -> np.ndarray:
    """Direct solve of the quadratic Green system A g = mu f (subcritical)."""
    A = quadratic_matrix(spec)
    free = spec.free_mask
    g = np.zeros(spec.space.n)
    g[free] = np.linalg.solve(A[np.ix_(free, free)], (spec.space.mu * f)[free])
    return g


def central_difference_gradient(fn, f, h: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(f)
    for i in range(len(f)):
        e = np.zeros_like(f)
        e[i] = h
        g[i] = (fn(f + e) - fn(f - e)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
