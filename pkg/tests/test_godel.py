import numpy as np
import pytest

from app.services.godel import (
    GodelError,
    fiber_conservation_residual,
    godel_E0,
    godel_reconstruct_u,
    hessian_index_E0,
    lifted_action,
    mode_base,
    straight_base,
)
from app.services.manifolds import build_manifold


def godel(rho):
    return build_manifold("godel", {"base_dim": 1, "fiber_dim": 1, "base_metric": "1", "rho": rho})


@pytest.fixture(scope="module")
def flat_godel():
    return godel("-1")


def test_constant_rho_gives_linear_fiber(flat_godel):
    base = straight_base([0.0], [1.0], (0.0, 1.0))
    fiber = godel_reconstruct_u(flat_godel, base, [0.0], [1.0])
    assert np.allclose(fiber.momentum, [-1.0])
    assert np.allclose(fiber.position(0.5), [0.5])
    assert np.allclose(fiber.position(1.0), [1.0])
    assert fiber_conservation_residual(flat_godel, base, fiber) <= 1e-6


def test_reduced_action_formula(flat_godel):
    base = straight_base([0.0], [1.0], (0.0, 1.0))
    assert abs(godel_E0(flat_godel, base, [0.0], [1.0])) < 1e-12
    assert abs(godel_E0(flat_godel, base, [0.0], [0.0]) - 0.5) < 1e-12


@pytest.fixture(scope="module")
def curved_godel():
    return godel("-(1 + x1**2)")


def test_lifted_action_matches_reduced_action(curved_godel):
    manifold = curved_godel
    base = straight_base([0.0], [1.0], (0.0, 1.0))
    e0 = godel_E0(manifold, base, [0.0], [2.0])
    assert abs(lifted_action(manifold, base, [0.0], [2.0]) - e0) < 1e-6


@pytest.mark.parametrize("seed", range(10))
def test_lifted_action_matches_reduced_action_on_perturbed_bases(curved_godel, seed):
    rng = np.random.default_rng(seed)
    amplitudes = rng.uniform(-0.3, 0.3, (3, 1))
    base = mode_base([0.0], [1.0], (0.0, 1.0), amplitudes)
    u1 = [rng.uniform(0.5, 3.0)]
    e0 = godel_E0(curved_godel, base, [0.0], u1)
    assert abs(lifted_action(curved_godel, base, [0.0], u1) - e0) <= 1e-6 * max(1.0, abs(e0))


def test_flat_godel_hessian_is_positive(flat_godel):
    center = straight_base([0.0], [1.0], (0.0, 1.0))
    n_minus, _, degeneracy = hessian_index_E0(flat_godel, center, [0.0], [1.0], elements=8)
    assert (n_minus, degeneracy) == (0, 0)


def test_curved_godel_hessian_index():
    manifold = godel("-(1 + x1**2)")
    center = straight_base([0.0], [0.0], (0.0, 1.0))
    n_minus, _, degeneracy = hessian_index_E0(manifold, center, [0.0], [2.5 * np.pi])
    assert (n_minus, degeneracy) == (2, 0)


def test_straight_base_in_non_godel_manifold():
    sphere = build_manifold("sphere", {})
    with pytest.raises(GodelError):
        godel_E0(sphere, straight_base([0.0], [1.0], (0.0, 1.0)), [0.0], [1.0])
