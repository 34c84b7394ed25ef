import numpy as np
import pytest

from app.models.forms import SymForm
from app.models.matrix_function import MatrixFunction
from app.models.reduction import Frame
from app.models.system import InitialData
from app.services.expressions import parse_function
from app.services.sds import make_morse_sturm, make_system


def diagonal_system(signs, omegas, interval=(0.0, 1.0), label=""):
    """Morse-Sturm system with g = diag(signs) and R = diag(-omega^2)."""
    g = SymForm(np.diag(np.asarray(signs, dtype=float)))
    R = MatrixFunction.constant(np.diag(-np.asarray(omegas, dtype=float) ** 2))
    return make_morse_sturm(g, R, interval, label=label)


@pytest.fixture
def diagonal():
    return diagonal_system


@pytest.fixture
def oscillator():
    return diagonal_system([1.0], [3.5 * np.pi], label="oscillator")


@pytest.fixture
def lorentz_diag():
    return diagonal_system([1.0, -1.0], [2.5 * np.pi, 1.5 * np.pi], label="lorentz")


@pytest.fixture
def e2_frame():
    return Frame(MatrixFunction.constant(np.array([[0.0], [1.0]])))


@pytest.fixture
def L0():
    return InitialData.lagrangian_zero


@pytest.fixture
def rotating():
    B = parse_function("cos(2*pi*t), sin(2*pi*t); sin(2*pi*t), -cos(2*pi*t)", (2, 2), (0.0, 1.25), label="B")
    return make_system(MatrixFunction.zeros((2, 2)), B, MatrixFunction.zeros((2, 2)), (0.0, 1.25), label="rotating")
