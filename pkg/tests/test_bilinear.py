import numpy as np
import pytest

from app.models.forms import SymForm, Subspace
from app.services.bilinear import (
    BilinearError,
    DegenerateFormError,
    inertia,
    is_nondegenerate,
    orth_complement,
    restrict,
    signature_on_complement,
)


def test_inertia_counts_signs_and_kernel():
    assert inertia(SymForm(np.diag([1.0, -2.0, 0.0]))) == (1, 1, 1)


def test_inertia_of_empty_form():
    assert inertia(SymForm(np.zeros((0, 0)))) == (0, 0, 0)


def test_inertia_rejects_negative_tolerance():
    with pytest.raises(BilinearError):
        inertia(SymForm(np.eye(2)), tol=-1.0)


def test_entries_are_symmetrized():
    form = SymForm(np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert np.array_equal(form.entries, form.entries.T)
    assert form.entries[0, 1] == 1.0


def test_restrict_to_negative_direction():
    form = SymForm(np.diag([1.0, 1.0, -1.0]))
    restricted = restrict(form, Subspace(np.array([[0.0], [0.0], [1.0]])))
    assert inertia(restricted) == (1, 0, 0)


def test_restrict_dimension_mismatch():
    with pytest.raises(BilinearError):
        restrict(SymForm(np.eye(2)), Subspace(np.eye(3)))


def test_lightlike_complement_contains_the_line():
    form = SymForm(np.diag([1.0, -1.0]))
    light = Subspace.span(np.array([1.0, 1.0]))
    complement = orth_complement(form, light)
    assert complement.dim == 1
    assert abs(abs(complement.basis[:, 0] @ light.basis[:, 0]) - 1.0) < 1e-12
    assert inertia(restrict(form, light))[2] == 1


def test_complement_of_zero_and_full():
    form = SymForm(np.diag([1.0, -1.0, 2.0]))
    assert orth_complement(form, Subspace.zero(3)).dim == 3
    assert orth_complement(form, Subspace.full(3)).dim == 0


def test_signature_on_complement_of_zero_image():
    assert signature_on_complement(SymForm(np.diag([1.0, 1.0, -1.0])), Subspace.zero(3)) == (1, True)


def test_complement_needs_nondegenerate_form():
    form = SymForm(np.diag([1.0, 0.0]))
    assert not is_nondegenerate(form)
    with pytest.raises(DegenerateFormError):
        orth_complement(form, Subspace.span(np.array([1.0, 0.0])))


def _form_with_spectrum(spectrum, seed=0):
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.normal(size=(len(spectrum), len(spectrum))))
    return u @ np.diag(spectrum) @ u.T


@pytest.mark.parametrize("seed", range(3))
def test_inertia_is_congruence_invariant(seed):
    m = _form_with_spectrum([3.0, 1.0, -2.0, -0.5, 0.0], seed)
    q = 2.0 * np.eye(5) + np.random.default_rng(seed + 10).uniform(-0.5, 0.5, (5, 5))
    assert inertia(SymForm(m)) == (2, 2, 1)
    assert inertia(SymForm(q.T @ m @ q)) == (2, 2, 1)


def test_negating_swaps_plus_and_minus():
    m = _form_with_spectrum([4.0, 1.5, -1.0, 0.0])
    n_minus, n_plus, degeneracy = inertia(SymForm(m))
    assert inertia(SymForm(-m)) == (n_plus, n_minus, degeneracy)


@pytest.mark.parametrize("axis, expected", [(0, (-1, True)), (1, (1, True))])
def test_signature_on_complement_of_a_line(axis, expected):
    form = SymForm(np.diag([1.0, -1.0]))
    image = Subspace.span(np.eye(2)[:, axis])
    assert signature_on_complement(form, image) == expected


def test_restrict_to_full_basis_keeps_inertia():
    m = _form_with_spectrum([2.0, -1.0, -3.0, 0.0], seed=4)
    basis = np.eye(4) + np.random.default_rng(5).uniform(-0.3, 0.3, (4, 4))
    assert inertia(restrict(SymForm(m), Subspace(basis))) == inertia(SymForm(m)) == (2, 1, 1)
