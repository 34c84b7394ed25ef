import numpy as np
import pytest

from app.models.forms import SymForm
from app.models.matrix_function import MatrixFunction
from app.models.reduction import Frame
from app.services.bilinear import inertia
from app.services.expressions import parse_function
from app.services.indexform import (
    IndexFormError,
    IndexTheoremPreconditionError,
    assemble_index_form,
    kd_constraints,
    kernel_dimension_check,
    reduced_form_carry,
    verify_additivity,
    verify_decomposition,
    verify_index_theorem,
    verify_old_index_theorem,
    verify_orthogonality,
)
from app.services.sds import integrate_fundamental, solution_residual

MESHES = [100, 200, 400]
HALF_TURNS = [0.5, 1.5, 2.5, 3.5, 4.5]


@pytest.mark.parametrize("ratio", [0.3, 0.5, 1.2, 1.5, 2.7, 3.5, 4.1, 5.5, 6.8, 7.5])
def test_discrete_index_counts_conjugate_points(diagonal, L0, ratio):
    X = diagonal([1.0], [ratio * np.pi])
    form = assemble_index_form(X, L0(1), 200)
    k = int(np.floor(ratio))
    assert form.space.ndof == 199
    assert inertia(SymForm(form.matrix)) == (k, 199 - k, 0)


@pytest.mark.parametrize("w1", HALF_TURNS)
@pytest.mark.parametrize("w2", HALF_TURNS)
def test_index_theorems_on_lorentz_sweep(diagonal, L0, e2_frame, w1, w2):
    X = diagonal([1.0, -1.0], [w1 * np.pi, w2 * np.pi])
    n1, n2 = int(w1), int(w2)
    report = verify_index_theorem(X, L0(2), e2_frame, MESHES)
    assert report.rhs_terms == {"maslov": n1 - n2, "maslov_red": -n2, "correction": 0}
    assert report.lhs == n1
    old = verify_old_index_theorem(X, L0(2), e2_frame, MESHES)
    assert old.lhs == n1 - n2


def test_mesh_must_have_enough_intervals(oscillator, L0):
    with pytest.raises(IndexFormError):
        assemble_index_form(oscillator, L0(1), 4)


def test_index_theorem_lorentz(lorentz_diag, L0, e2_frame):
    report = verify_index_theorem(lorentz_diag, L0(2), e2_frame, MESHES)
    assert report.rhs_terms == {"maslov": 1, "maslov_red": -1, "correction": 0}
    assert report.lhs == 2
    assert report.rhs == 2
    assert report.verdict == "holds"
    assert [r.N for r in report.eigenflow] == report.meshes


def test_index_theorem_without_frame_is_morse_theorem(oscillator, L0):
    report = verify_index_theorem(oscillator, L0(1), Frame.empty(1), MESHES)
    assert report.lhs == 3
    assert report.verdict == "holds"


def test_index_theorem_refuses_endpoint_focal(diagonal, L0):
    X = diagonal([1.0], [3.5 * np.pi], (0.0, 2 / 3.5))
    with pytest.raises(IndexTheoremPreconditionError):
        verify_index_theorem(X, L0(1), Frame.empty(1), MESHES)


def test_old_index_theorem_lorentz(lorentz_diag, L0, e2_frame):
    report = verify_old_index_theorem(lorentz_diag, L0(2), e2_frame, MESHES)
    assert report.lhs == 1
    assert report.maslov == 1
    assert report.verdict == "holds"


def test_old_index_theorem_needs_maximal_negative_frame(lorentz_diag, L0):
    e1 = Frame(MatrixFunction.constant(np.array([[1.0], [0.0]])))
    with pytest.raises(IndexTheoremPreconditionError):
        verify_old_index_theorem(lorentz_diag, L0(2), e1, MESHES)


def test_kd_is_orthogonal_to_sd(lorentz_diag, L0, e2_frame):
    assert verify_orthogonality(lorentz_diag, L0(2), e2_frame, 100) <= 1e-8


def test_orthogonality_converges_for_a_rotating_frame(lorentz_diag, L0):
    frame = Frame(parse_function("cos(3*t); sin(3*t)", (2, 1)))
    coarse = verify_orthogonality(lorentz_diag, L0(2), frame, 100)
    fine = verify_orthogonality(lorentz_diag, L0(2), frame, 200)
    assert coarse > 1e-12
    assert fine < 0.6 * coarse
    assert fine <= 1e-2


def test_kd_functionals_shape(lorentz_diag, e2_frame):
    constraints = kd_constraints(lorentz_diag, e2_frame, 100)
    assert constraints.rows.shape == (99, 198)
    assert constraints.f_lambda.shape == (99, 99)
    assert constraints.rank == 99
    assert constraints.kernel.shape == (198, 99)


def test_kd_functionals_vanish_on_solutions(lorentz_diag, e2_frame):
    X = lorentz_diag
    constraints = kd_constraints(X, e2_frame, 100)
    path = integrate_fundamental(X, steps=2000)
    state0 = np.array([0.0, 0.0, 1.0, 1.0])
    assert solution_residual(X, path, state0) <= 1e-6

    states = np.array([path.at(t) @ state0 for t in constraints.points])
    flows = np.array([(X.matrix(t) @ z)[:2] for t, z in zip(constraints.points, states)])
    assert constraints.residual(states[:, :2], flows) <= 1e-6

    t = constraints.points
    curve = np.stack([np.zeros_like(t), np.sin(3 * t)], axis=1)
    slope = np.stack([np.zeros_like(t), 3 * np.cos(3 * t)], axis=1)
    assert constraints.residual(curve, slope) >= 1e-3

    # a single hat on the constrained component
    assert np.max(np.abs(constraints.rows[:, 99])) > 1.0


def test_lifted_sections_carry_the_reduced_form(lorentz_diag, e2_frame):
    assert reduced_form_carry(lorentz_diag, e2_frame, 50) <= 1e-10


def test_decomposition_holds_off_reduced_conjugate_points(lorentz_diag, L0, e2_frame):
    report = verify_decomposition(lorentz_diag, L0(2), e2_frame, 50)
    assert report.decomposes
    assert report.reduced_conjugate is False


def test_decomposition_fails_at_reduced_conjugate_endpoint(diagonal, L0, e2_frame):
    X = diagonal([1.0, -1.0], [2.5 * np.pi, 1.5 * np.pi], (0.0, 2 / 3))
    report = verify_decomposition(X, L0(2), e2_frame, 50)
    assert not report.decomposes
    assert report.sigma <= 1e-8
    assert report.reduced_conjugate


def test_kernel_is_trivial_off_focal_endpoint(diagonal, L0, e2_frame):
    X = diagonal([1.0, -1.0], [2.5 * np.pi, 1.5 * np.pi], (0.0, 0.9))
    report = kernel_dimension_check(X, L0(2), e2_frame, 100)
    assert report.degeneracy == 0
    assert report.multiplicity == 0
    assert report.matches


def test_kernel_dimension_matches_endpoint_multiplicity(diagonal, L0, e2_frame):
    X = diagonal([1.0, -1.0], [2.5 * np.pi, 1.5 * np.pi], (0.0, 0.8))
    report = kernel_dimension_check(X, L0(2), e2_frame, 100)
    assert report.degeneracy == 1
    assert report.multiplicity == 1
    assert report.matches


def test_kernel_dimension_at_double_focal_endpoint(diagonal, L0):
    X = diagonal([1.0, 1.0, -1.0], [2.5 * np.pi, 1.25 * np.pi, 1.5 * np.pi], (0.0, 0.8))
    e3 = Frame(MatrixFunction.constant(np.array([[0.0], [0.0], [1.0]])))
    report = kernel_dimension_check(X, L0(3), e3, 100)
    assert report.multiplicity == 2
    assert report.degeneracy == 2
    assert report.matches


def test_additivity_of_negative_indices(diagonal, L0):
    X = diagonal([1.0, 1.0, -1.0], [2.5 * np.pi, 1.5 * np.pi, 0.5 * np.pi])
    frame = Frame(MatrixFunction.constant(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])))
    report = verify_additivity(X, L0(3), frame, 1, 200)
    assert report.holds
