import numpy as np
import pytest

from app.models.forms import SymForm, Subspace
from app.models.matrix_function import MatrixFunction
from app.models.system import InitialData, Isomorphism, canonical_j
from app.services.expressions import parse_function
from app.services.maslov import maslov_index
from app.services.sds import (
    SystemDefinitionError,
    apply_isomorphism,
    coefficient_index,
    initial_condition_index,
    initial_data_from_frame,
    integrate_fundamental,
    isomorphism_residual,
    lagrangian_frame,
    lagrangian_residual,
    make_system,
    relative_symplectic_residual,
    symplectic_residual,
)


def closed_form(omega, t):
    c, s = np.cos(omega * t), np.sin(omega * t)
    return np.array([[c, s / omega], [-omega * s, c]])


def test_morse_sturm_coefficients(lorentz_diag):
    assert np.allclose(lorentz_diag.A(0.2), 0.0)
    assert np.allclose(lorentz_diag.B(0.2), np.diag([1.0, -1.0]))
    assert np.allclose(lorentz_diag.C(0.2), np.diag([-(2.5 * np.pi) ** 2, (1.5 * np.pi) ** 2]))
    assert coefficient_index(lorentz_diag) == 1


def test_oscillator_matches_closed_form(oscillator):
    path = integrate_fundamental(oscillator, steps=2000)
    assert np.allclose(path.values[-1], closed_form(3.5 * np.pi, 1.0), atol=1e-6)
    assert path.max_residual <= 1e-8


def test_long_interval_stays_symplectic(diagonal):
    X = diagonal([1.0], [1.0], (0.0, 10.0))
    path = integrate_fundamental(X, steps=2000)
    assert path.max_residual <= 1e-8
    assert np.allclose(path.values[-1], closed_form(1.0, 10.0), atol=1e-6)


def test_symplectic_residual_is_absolute():
    phi = np.diag([1e4, 1.1e-3])
    j = canonical_j(1)
    assert symplectic_residual(phi, j) == pytest.approx(10.0)
    assert relative_symplectic_residual(phi, j) == pytest.approx(1e-7)


def test_residuals_recorded_per_node(oscillator):
    path = integrate_fundamental(oscillator, steps=2000)
    assert path.residuals.shape == path.relative_residuals.shape == (2001,)
    assert np.all(path.relative_residuals <= path.residuals)


def test_dense_output_between_nodes(oscillator):
    path = integrate_fundamental(oscillator, steps=400)
    assert np.allclose(path.at(0.3337), closed_form(3.5 * np.pi, 0.3337), atol=1e-4)


def test_lagrangian_frames_stay_isotropic(lorentz_diag, L0):
    path = integrate_fundamental(lorentz_diag, steps=1000)
    frames = lagrangian_frame(path, L0(2)).node_frames()
    assert max(lagrangian_residual(f) for f in frames) <= 1e-6


def test_initial_data_round_trip():
    ell0 = InitialData(Subspace(np.array([[1.0], [0.0]])), SymForm(np.array([[2.0]])))
    recovered = initial_data_from_frame(ell0.frame())
    assert recovered.P.dim == 1
    assert np.allclose(np.abs(recovered.P.basis[:, 0]), [1.0, 0.0])
    assert np.allclose(recovered.S.entries, [[2.0]])


def test_zero_top_block_gives_L0():
    frame = InitialData.lagrangian_zero(2).frame()
    assert initial_data_from_frame(frame).P.dim == 0


def test_initial_condition_index(lorentz_diag):
    ell0 = InitialData(Subspace(np.array([[0.0], [1.0]])), SymForm(np.zeros((1, 1))))
    assert initial_condition_index(lorentz_diag, ell0) == (1, True)


def test_changing_index_of_B_is_rejected():
    zero = MatrixFunction.zeros((1, 1))
    with pytest.raises(SystemDefinitionError):
        make_system(zero, parse_function("t - 0.3", (1, 1)), zero, (0.0, 1.0))


def test_nonsymmetric_B_is_rejected():
    zero = MatrixFunction.zeros((2, 2))
    with pytest.raises(SystemDefinitionError):
        make_system(zero, parse_function("1, 1; 0, 1", (2, 2)), zero, (0.0, 1.0))


def test_empty_interval_is_rejected():
    one = MatrixFunction.identity(1)
    with pytest.raises(SystemDefinitionError):
        make_system(one, one, one, (1.0, 1.0))


def test_isomorphism_preserves_maslov_index(oscillator, L0):
    phi = Isomorphism(parse_function("1 + t/2", (1, 1)), parse_function("3*t/10", (1, 1)))
    X_tilde, ell0_tilde = apply_isomorphism(phi, oscillator, L0(1))
    assert ell0_tilde.P.dim == 0
    assert maslov_index(X_tilde, ell0_tilde).total == 3

    path = integrate_fundamental(oscillator, steps=2000)
    path_tilde = integrate_fundamental(X_tilde, steps=2000)
    assert isomorphism_residual(phi, path, path_tilde) <= 1e-5
