import math

import numpy as np
import pytest

from dirichletforms import (
    InconclusiveError,
    NonConvergenceError,
    ParameterError,
    ProxConfig,
    green,
    green_on_nonneg,
    markov_property_checks,
    perturbed_prox,
    prox,
    resolvent_identity_check,
)
from dirichletforms.energy import energy, energy_gradient
from dirichletforms.resolvent import energy_hessian
from conftest import (
    green_oracle,
    path_spec,
    prox_oracle,
    random_connected_spec,
    single_vertex_spec,
    two_vertex_spec,
)

CFG = ProxConfig()


def test_prox_two_vertex_closed_form():
    # minimize (g1-g2)^2/2 + (1/2)(|g - (1,0)|^2): g = (2/3, 1/3)
    spec = two_vertex_spec()
    g, report = prox(spec, 1.0, np.array([1.0, 0.0]))
    assert np.allclose(g, [2.0 / 3.0, 1.0 / 3.0], atol=1e-9)
    assert report.converged and report.residual <= CFG.residual_tolerance


@pytest.mark.parametrize("seed", range(6))
def test_prox_matches_linear_oracle(seed):
    spec = random_connected_spec(8, seed=seed, n_kill=2, n_boundary=1)
    rng = np.random.default_rng(seed)
    f = rng.normal(size=spec.space.n)
    alpha = float(rng.uniform(0.2, 3.0))
    g, _ = prox(spec, alpha, f)
    assert np.max(np.abs(g - prox_oracle(spec, alpha, f))) < 1e-8


def test_prox_residual_certificate_nonquadratic():
    spec = random_connected_spec(7, seed=2, p_range=(1.6, 3.5), n_kill=1)
    rng = np.random.default_rng(2)
    f = rng.normal(size=spec.space.n)
    g, report = prox(spec, 0.7, f)
    r = energy_gradient(spec, g) + 0.7 * g - f
    r[spec.boundary_mask] = 0.0
    assert spec.space.norm(r) <= CFG.residual_tolerance
    assert report.residual == pytest.approx(spec.space.norm(r), abs=1e-12)


def test_prox_boundary_pinned():
    spec = path_spec(3, p=2.5)
    g, _ = prox(spec, 1.0, np.ones(4))
    assert g[-1] == 0.0


def test_prox_parameter_validation():
    spec = two_vertex_spec()
    with pytest.raises(ParameterError):
        prox(spec, 0.0, np.zeros(2))
    with pytest.raises(ParameterError):
        ProxConfig(residual_tolerance=0.0)
    with pytest.raises(ParameterError):
        ProxConfig(shrink=1.5)


def test_prox_nonconvergence_reports_best():
    spec = two_vertex_spec(p=3.0)
    cfg = ProxConfig(residual_tolerance=1e-12, max_iterations=0)
    with pytest.raises(NonConvergenceError) as exc:
        prox(spec, 1.0, np.array([1.0, -1.0]), cfg)
    assert exc.value.report.converged is False
    assert exc.value.best is not None


def test_energy_hessian_matches_gradient_difference():
    spec = random_connected_spec(5, seed=4, p_range=(2.5, 3.5), n_kill=1)
    rng = np.random.default_rng(4)
    g0 = rng.normal(size=spec.space.n) + 1.0
    H = energy_hessian(spec, g0)
    h = 1e-6
    for i in range(spec.space.n):
        e = np.zeros(spec.space.n)
        e[i] = h
        col = (
            spec.space.mu * energy_gradient(spec, g0 + e)
            - spec.space.mu * energy_gradient(spec, g0 - e)
        ) / (2 * h)
        assert np.allclose(H[:, i], col, rtol=1e-4, atol=1e-4)


def test_resolvent_identity():
    spec = random_connected_spec(6, seed=5, p_range=(1.7, 3.0), n_kill=1)
    rng = np.random.default_rng(5)
    f = rng.normal(size=spec.space.n)
    ok, residual = resolvent_identity_check(spec, 0.6, 2.3, f)
    assert ok, residual


def test_markov_properties():
    spec = random_connected_spec(6, seed=6, p_range=(1.6, 3.2), n_kill=1, n_boundary=1)
    rng = np.random.default_rng(6)
    pairs = [
        (
            spec.project_feasible(rng.normal(size=spec.space.n)),
            spec.project_feasible(rng.normal(size=spec.space.n)),
        )
        for _ in range(4)
    ]
    report = markov_property_checks(spec, 1.1, pairs)
    assert report["pass"], report["margins"]


def test_lipschitz_bound():
    spec = random_connected_spec(6, seed=7, p_range=(1.6, 3.0), n_kill=1)
    rng = np.random.default_rng(7)
    f = rng.normal(size=spec.space.n)
    g = rng.normal(size=spec.space.n)
    for alpha in (0.3, 1.0, 5.0):
        gf, _ = prox(spec, alpha, f)
        gg, _ = prox(spec, alpha, g)
        assert spec.space.norm(gf - gg) <= spec.space.norm(f - g) / alpha + 1e-8


def test_alpha_galpha_approaches_identity():
    spec = random_connected_spec(5, seed=8, p_range=(2.0, 2.0), n_kill=2)
    rng = np.random.default_rng(8)
    f = rng.normal(size=spec.space.n)
    for alpha, tol in ((1e2, 0.1), (1e4, 1e-3)):
        g, _ = prox(spec, alpha, alpha * f)
        assert np.max(np.abs(g - f)) < tol


def test_perturbed_prox_fixed_point_and_exchange():
    spec = random_connected_spec(5, seed=9, p_range=(1.8, 3.0))
    rng = np.random.default_rng(9)
    w = rng.uniform(0.2, 1.0, size=spec.space.n)
    w2 = rng.uniform(0.2, 1.0, size=spec.space.n)
    f = rng.normal(size=spec.space.n)
    g, report = perturbed_prox(spec, w, 1.0, f, second_weight=w2)
    assert report.extras["fixed_point_residual"] < 1e-7
    assert report.extras["exchange_residual"] < 1e-7


def test_perturbed_resolvent_bounded_by_one():
    # Lemma II(a) analogue: G^w(w) takes values in [0, 1]
    spec = random_connected_spec(5, seed=10)
    rng = np.random.default_rng(10)
    w = rng.uniform(0.2, 1.0, size=spec.space.n)
    from dirichletforms.energy import perturb

    result = green(perturb(spec, w), w)
    assert result.finite
    assert np.all(result.value >= -1e-9) and np.all(result.value <= 1.0 + 1e-9)
    # Lemma II(b) analogue: the perturbed Green potential has energy
    # bounded by the pairing with the data
    e = energy(perturb(spec, w), result.value)
    pairing = float(np.sum(spec.space.mu * w * result.value))
    assert e <= pairing + 1e-7


def test_green_matches_linear_oracle():
    spec = random_connected_spec(6, seed=11, n_kill=2)
    rng = np.random.default_rng(11)
    f = rng.uniform(0.0, 1.0, size=spec.space.n)
    out = green_on_nonneg(spec, f)
    assert np.max(np.abs(out - green_oracle(spec, f))) < 1e-6


def test_green_trace_monotone_and_finite():
    spec = single_vertex_spec(kappa=2.0)
    result = green(spec, np.array([1.0]))
    assert result.finite
    sups = [s for _, s in result.alpha_trace]
    assert all(b >= a - 1e-9 for a, b in zip(sups, sups[1:]))
    assert result.value[0] == pytest.approx(0.5, abs=1e-6)  # kappa g = f


def test_green_divergence_on_critical():
    spec = two_vertex_spec()
    result = green(spec, np.array([1.0, 1.0]), divergence_threshold=1e4)
    assert not result.finite
    assert result.scale_at_exit > 1e4


def test_green_kernel_component_is_infinite():
    spec = two_vertex_spec()
    out = green_on_nonneg(spec, np.array([1.0, 0.0]))
    assert np.all(np.isinf(out))
    out0 = green_on_nonneg(spec, np.zeros(2))
    assert np.allclose(out0, 0.0)


def test_green_inconclusive_when_schedule_exhausted():
    spec = path_spec(2)
    with pytest.raises(InconclusiveError):
        green(spec, np.ones(3), depth=0)


def test_green_rejects_negative_data():
    spec = path_spec(2)
    with pytest.raises(ParameterError):
        green(spec, np.array([1.0, -1.0, 0.0]))
