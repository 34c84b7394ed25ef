import numpy as np
import pytest

from app.models.matrix_function import MatrixFunction
from app.models.reduction import Frame
from app.models.system import Isomorphism
from app.services.expressions import parse_function
from app.services.maslov import maslov_index
from app.services.reduction import (
    DegenerateFamilyError,
    along_distribution_residual,
    b_integral,
    build_reduced,
    build_tilde_reduced,
    classify_frame,
    frame_change,
    lift,
    reduced_coefficients,
    reduced_maslov_shortcut,
)
from app.services.sds import apply_isomorphism, integrate_fundamental


def test_lorentz_reduced_coefficients(lorentz_diag, e2_frame):
    reduced = reduced_coefficients(lorentz_diag, e2_frame)
    assert reduced.index == 1
    assert np.allclose(reduced.frak_b(0.3), [[-1.0]])
    assert np.allclose(reduced.frak_a(0.3), [[0.0]])
    assert np.allclose(reduced.frak_c(0.3), [[(1.5 * np.pi) ** 2]])


def test_constant_e2_is_not_a_solution_frame(lorentz_diag, e2_frame):
    frame = classify_frame(lorentz_diag, e2_frame)
    assert not frame.is_solution_frame
    assert frame.is_symmetric_frame


def test_reduced_maslov_index(lorentz_diag, e2_frame, L0):
    X_red = build_reduced(lorentz_diag, e2_frame)
    assert X_red.n == 1
    report = maslov_index(X_red, L0(1))
    assert report.total == -1
    assert np.allclose([i.t for i in report.instants], [2 / 3], atol=1e-6)


def test_b_integral_without_degeneracy(lorentz_diag, e2_frame):
    bpath = b_integral(reduced_coefficients(lorentz_diag, e2_frame), steps=400)
    assert bpath.instants == []
    assert not bpath.endpoint_degenerate
    assert np.allclose(bpath.values[-1], [[-1.0]])


def test_rotating_frame_is_symmetric_solution_frame(rotating):
    frame = classify_frame(rotating, Frame(MatrixFunction.identity(2)))
    assert frame.is_solution_frame
    assert frame.is_symmetric_frame


def test_rotating_b_integral_and_shortcut(rotating, L0):
    frame = classify_frame(rotating, Frame(MatrixFunction.identity(2)))
    reduced = reduced_coefficients(rotating, frame)
    bpath = b_integral(reduced)
    assert len(bpath.instants) == 1
    assert abs(bpath.instants[0].t - 1.0) < 1e-6
    assert bpath.instants[0].multiplicity == 2
    assert reduced_maslov_shortcut(reduced, bpath) == 0

    X_tilde = build_tilde_reduced(rotating, frame, reduced)
    assert maslov_index(X_tilde, L0(2)).total == 0
    assert maslov_index(build_reduced(rotating, frame, reduced), L0(2)).total == 0


def test_tilde_reduction_without_antisymmetric_part(lorentz_diag, e2_frame, L0):
    X_tilde = build_tilde_reduced(lorentz_diag, classify_frame(lorentz_diag, e2_frame))
    assert np.allclose(X_tilde.C(0.5), [[(1.5 * np.pi) ** 2]])
    assert maslov_index(X_tilde, L0(1)).total == -1


def test_degenerate_family_is_rejected(lorentz_diag):
    light = Frame(MatrixFunction.constant(np.array([[1.0], [1.0]])))
    with pytest.raises(DegenerateFamilyError):
        reduced_coefficients(lorentz_diag, light)


def test_frame_change_keeps_the_family(lorentz_diag, e2_frame):
    changed = frame_change(e2_frame, parse_function("1 + t", (1, 1)))
    reduced = reduced_coefficients(lorentz_diag, changed)
    assert reduced.index == 1
    assert np.allclose(reduced.frak_b(1.0), [[-4.0]])


def test_solution_along_distribution(rotating, lorentz_diag, e2_frame):
    identity = Frame(MatrixFunction.identity(2))
    constant = MatrixFunction.constant(np.array([[1.0], [0.0]]))
    assert along_distribution_residual(rotating, identity, constant) < 1e-10
    e2 = MatrixFunction.constant(np.array([[0.0], [1.0]]))
    assert along_distribution_residual(lorentz_diag, e2_frame, e2) > 0.1


@pytest.fixture
def tilted_frame():
    return Frame(parse_function("3*sin(t)/10; 1", (2, 1)))


@pytest.mark.parametrize("seed", range(3))
def test_lifted_reduced_solutions_solve_along_the_family(lorentz_diag, tilted_frame, seed):
    X_red = build_reduced(lorentz_diag, tilted_frame)
    path = integrate_fundamental(X_red, steps=2000)
    state0 = np.random.default_rng(seed).normal(size=2)
    f = MatrixFunction.tabulated(path.times, (path.values @ state0)[:, :1, None])
    v = lift(tilted_frame, f)
    assert v.shape == (2, 1)
    assert along_distribution_residual(lorentz_diag, tilted_frame, v) < 1e-5


def test_lift_of_a_non_solution_leaves_a_residual(lorentz_diag, tilted_frame):
    v = lift(tilted_frame, parse_function("t", (1, 1)))
    assert along_distribution_residual(lorentz_diag, tilted_frame, v) > 1e-3


def test_frame_change_keeps_the_reduced_maslov_index(lorentz_diag, e2_frame, L0):
    changed = frame_change(e2_frame, parse_function("1 + t", (1, 1)))
    original = maslov_index(build_reduced(lorentz_diag, e2_frame), L0(1))
    report = maslov_index(build_reduced(lorentz_diag, changed), L0(1))
    assert report.total == original.total == -1
    assert np.allclose([i.t for i in report.instants], [i.t for i in original.instants], atol=1e-6)


def test_tilde_reduced_is_the_image_of_the_symmetric_shift(lorentz_diag, L0):
    frame = Frame(parse_function("1, t/2; sin(t)/5, 1", (2, 2)))
    reduced = reduced_coefficients(lorentz_diag, frame)
    assert np.max(np.abs(reduced.a_ant(0.7))) > 1e-3

    X_red = build_reduced(lorentz_diag, frame, reduced)
    shift = Isomorphism(MatrixFunction.identity(2), -reduced.a_sym)
    X_shifted, _ = apply_isomorphism(shift, X_red)
    X_tilde = build_tilde_reduced(lorentz_diag, frame, reduced)
    for t in (0.1, 0.45, 0.9):
        for block in ("A", "B", "C"):
            expected = getattr(X_tilde, block)(t)
            scale = max(1.0, float(np.max(np.abs(expected))))
            assert np.max(np.abs(getattr(X_shifted, block)(t) - expected)) <= 1e-5 * scale
    assert maslov_index(X_tilde, L0(2)).total == maslov_index(X_red, L0(2)).total
