import numpy as np
import pytest

from app.models.focal import FocalOptions
from app.models.matrix_function import MatrixFunction
from app.models.system import Isomorphism
from app.services.indexform import assemble_index_form, restricted_inertia
from app.services.maslov import (
    EndpointFocalError,
    endpoint_multiplicity,
    find_focal_instants,
    maslov_index,
    perturbation_stability,
)
from app.services.sds import apply_isomorphism, make_system


def test_oscillator_focal_instants(oscillator, L0):
    instants = find_focal_instants(oscillator, L0(1))
    assert np.allclose([i.t for i in instants], [1 / 3.5, 2 / 3.5, 3 / 3.5], atol=1e-6)
    assert all(i.multiplicity == 1 and i.signature == 1 and i.nondegenerate for i in instants)


def test_oscillator_maslov_index(oscillator, L0):
    report = maslov_index(oscillator, L0(1))
    assert report.valid
    assert report.total == 3
    assert report.count == 3
    assert 0.0 < report.epsilon < 1 / 3.5


def test_sturm_count(diagonal, L0):
    for k in range(4):
        X = diagonal([1.0], [(k + 0.5) * np.pi])
        assert maslov_index(X, L0(1)).total == k


def test_lorentz_crossings_carry_metric_signs(lorentz_diag, L0):
    report = maslov_index(lorentz_diag, L0(2))
    assert report.total == 1
    assert np.allclose([i.t for i in report.instants], [0.4, 2 / 3, 0.8], atol=1e-6)
    assert [i.signature for i in report.instants] == [1, -1, 1]


def test_endpoint_focal_is_refused(diagonal, L0):
    X = diagonal([1.0], [3.5 * np.pi], (0.0, 2 / 3.5))
    with pytest.raises(EndpointFocalError):
        maslov_index(X, L0(1))
    assert endpoint_multiplicity(X, L0(1)) == 1


def test_non_focal_endpoint(oscillator, L0):
    assert endpoint_multiplicity(oscillator, L0(1)) == 0


def test_index_survives_small_perturbations(oscillator, L0):
    assert perturbation_stability(oscillator, L0(1), 1e-6, trials=2)


def test_scan_trace_is_recorded(oscillator, L0):
    report = maslov_index(oscillator, L0(1))
    times = [row[0] for row in report.trace]
    assert len(times) > 100
    assert times == sorted(times)


@pytest.mark.parametrize("rank_tol", [1e-14, 1e-8, 1e-7])
def test_endpoint_decision_ignores_rank_tol(diagonal, L0, rank_tol):
    X = diagonal([1.0], [3.5 * np.pi], (0.0, 2 / 3.5))
    opts = FocalOptions(rank_tol=rank_tol)
    assert endpoint_multiplicity(X, L0(1), opts) == 1
    with pytest.raises(EndpointFocalError):
        maslov_index(X, L0(1), opts)


def test_flat_system_has_no_focal_instants(L0):
    zero = MatrixFunction.zeros((2, 2))
    X = make_system(zero, MatrixFunction.identity(2), zero, (0.0, 1.0), label="flat")
    report = maslov_index(X, L0(2))
    assert report.instants == []
    assert report.total == 0
    assert perturbation_stability(X, L0(2), 1e-3, trials=2)


def test_riemannian_signature_equals_multiplicity(diagonal, L0):
    X = diagonal([1.0, 1.0], [2.5 * np.pi, 2.5 * np.pi])
    report = maslov_index(X, L0(2))
    assert np.allclose([i.t for i in report.instants], [0.4, 0.8], atol=1e-6)
    assert [i.multiplicity for i in report.instants] == [2, 2]
    assert all(i.signature == i.multiplicity for i in report.instants)
    assert report.total == 4


def _random_isomorphism(n: int, seed: int) -> Isomorphism:
    """Z = I + eps (M0 + t M1) and symmetric W = S0 + t S1, with |eps (M0 + t M1)| < 1."""
    rng = np.random.default_rng(seed)
    m0, m1 = rng.uniform(-1.0, 1.0, (2, n, n))
    s0, s1 = rng.uniform(-0.5, 0.5, (2, n, n))
    s0, s1 = s0 + s0.T, s1 + s1.T
    eps = 0.15 / n
    Z = MatrixFunction.from_callable(lambda t: np.eye(n) + eps * (m0 + t * m1), (n, n))
    W = MatrixFunction.from_callable(lambda t: s0 + t * s1, (n, n))
    return Isomorphism(Z, W)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("system", ["oscillator", "lorentz_diag"])
def test_isomorphism_invariance(request, L0, system, seed):
    X = request.getfixturevalue(system)
    ell0 = L0(X.n)
    X_tilde, ell0_tilde = apply_isomorphism(_random_isomorphism(X.n, seed), X, ell0)

    report = maslov_index(X, ell0)
    report_tilde = maslov_index(X_tilde, ell0_tilde)
    assert len(report_tilde.instants) == len(report.instants)
    for inst, inst_tilde in zip(report.instants, report_tilde.instants):
        assert abs(inst.t - inst_tilde.t) <= 1e-6 * X.length
        assert inst_tilde.multiplicity == inst.multiplicity
        assert inst_tilde.signature == inst.signature
    assert report_tilde.total == report.total

    form = assemble_index_form(X, ell0, 100)
    form_tilde = assemble_index_form(X_tilde, ell0_tilde, 100)
    assert restricted_inertia(form_tilde, np.eye(form_tilde.space.ndof)) == restricted_inertia(form, np.eye(form.space.ndof))
