import numpy as np
import pytest

from app.services.geodesics import (
    GeodesicError,
    constraint_system_check,
    geodesic_system,
    jacobi_to_morse_sturm,
    killing_frame_data,
    shoot_geodesics,
    stationary_index_check,
    submanifold_initial_data,
    trace_geodesic,
)
from app.services.manifolds import Geometry, NonKillingFieldError, UnsupportedManifoldError, build_manifold
from app.services.maslov import maslov_index


@pytest.fixture(scope="module")
def flat():
    return Geometry(build_manifold("flat", {"signature": [1, -1]}))


@pytest.fixture(scope="module")
def sphere():
    return Geometry(build_manifold("sphere", {"radius": 1}))


@pytest.fixture(scope="module")
def stationary():
    return Geometry(build_manifold("stationary_sphere", {"radius": 1, "fibers": 1}))


def test_unknown_manifold():
    with pytest.raises(UnsupportedManifoldError):
        build_manifold("torus", {})


def test_flat_geodesic_is_straight_with_zero_curvature(flat):
    curve = trace_geodesic(flat, [0.0, 0.0], [1.0, 2.0], (0.0, 1.0), samples=101)
    assert np.allclose(curve.positions[-1], [1.0, 2.0], atol=1e-10)
    g, R = jacobi_to_morse_sturm(flat, curve)
    assert sorted(np.diag(g.entries)) == [-1.0, 1.0]
    assert np.allclose(R(0.5), 0.0)


def test_sphere_jacobi_operator_on_equator(sphere):
    curve = trace_geodesic(sphere, [np.pi / 2, 0.0], [0.0, 1.0], (0.0, 1.0))
    g, R = jacobi_to_morse_sturm(sphere, curve)
    assert np.allclose(g.entries, np.eye(2))
    assert np.allclose(np.linalg.eigvalsh(R(0.5)), [-1.0, 0.0], atol=1e-6)


def test_sphere_conjugate_points_give_the_maslov_index(sphere):
    curve = trace_geodesic(sphere, [np.pi / 2, 0.0], [0.0, 3.5 * np.pi], (0.0, 1.0))
    gsys = geodesic_system(sphere, curve)
    assert maslov_index(gsys.system, gsys.ell0).total == 3


def test_killing_fields(sphere):
    assert sphere.check_killing([sphere.field("phi")])
    with pytest.raises(NonKillingFieldError):
        sphere.check_killing([sphere.field("theta")])


def test_point_and_totally_geodesic_initial_submanifolds(flat):
    curve = trace_geodesic(flat, [0.0, 0.0], [1.0, 0.0], (0.0, 1.0), samples=101)
    assert submanifold_initial_data(flat, curve).P.dim == 0
    ell0 = submanifold_initial_data(flat, curve, ["0", "p1"], (0.0,))
    assert ell0.P.dim == 1
    assert np.allclose(ell0.S.entries, 0.0)


def test_initial_submanifold_must_be_orthogonal(flat):
    curve = trace_geodesic(flat, [0.0, 0.0], [1.0, 1.0], (0.0, 1.0), samples=101)
    with pytest.raises(GeodesicError):
        submanifold_initial_data(flat, curve, ["0", "p1"], (0.0,))


def test_stationary_index_check(stationary):
    curve = trace_geodesic(stationary, [np.pi / 2, 0.0, 0.0], [0.0, 2.5 * np.pi, 1.0], (0.0, 1.0))
    gsys = geodesic_system(stationary, curve)
    report, consistent = stationary_index_check(stationary, gsys, ["s1"], [100, 200, 400])
    assert consistent
    assert report.lhs == 2
    assert report.rhs_terms["maslov_red"] == 0


def test_killing_reduction_constraints(stationary):
    curve = trace_geodesic(stationary, [np.pi / 2, 0.0, 0.0], [0.0, 0.5 * np.pi, 1.0], (0.0, 1.0))
    gsys = geodesic_system(stationary, curve)
    frame, reduced, bpath = killing_frame_data(stationary, gsys, ["s1"], 400)
    assert frame.is_solution_frame and frame.is_symmetric_frame
    assert reduced.index == 1
    assert bpath.instants == []
    check = constraint_system_check(stationary, gsys, ["s1"], frame, reduced)
    assert check["admissible"]
    assert check["a_residual"] < 1e-6
    assert check["c_residual"] < 1e-6


def test_shooting_on_stationary_sphere(stationary):
    result = shoot_geodesics(
        stationary,
        [np.pi / 2, 0.0, 0.0],
        [np.pi / 2, np.pi / 2, 1.0],
        (0.0, 1.0),
        grid={"phi": [-1.5 * np.pi, 0.5 * np.pi]},
        field_specs=["s1"],
    )
    assert len(result.geodesics) == 2
    assert result.counts() == {0: 1, 1: 1}
    assert all(record.maslov_red == 0 for record in result.geodesics)
