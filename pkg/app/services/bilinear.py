# --------------------------------------------------
# Inertia algebra for symmetric bilinear forms
#
# Features:
# - index / coindex / degeneracy by symmetric eigenvalue counting
# - restriction of a form to a subspace (pull-back to its basis)
# - form-orthogonal complements and signatures on them
# --------------------------------------------------

import logging
from typing import Tuple

import numpy as np
from scipy.linalg import eigvalsh, null_space

from app.core.config import INERTIA_TOL
from app.core.errors import SymplecticError
from app.models.forms import SymForm, Subspace

logger = logging.getLogger(__name__)


class BilinearError(SymplecticError):
    pass


class DegenerateFormError(BilinearError):
    pass


def inertia(form: SymForm, tol: float = INERTIA_TOL) -> Tuple[int, int, int]:
    """Return (n_minus, n_plus, degeneracy); eigenvalues within +-tol*scale count as zero."""
    if tol < 0:
        raise BilinearError("inertia tolerance must be non-negative")
    if form.dim == 0:
        return (0, 0, 0)
    eigenvalues = eigvalsh(form.entries)
    threshold = tol * form.scale
    n_minus = int(np.sum(eigenvalues < -threshold))
    n_plus = int(np.sum(eigenvalues > threshold))
    return (n_minus, n_plus, form.dim - n_minus - n_plus)


def restrict(form: SymForm, sub: Subspace) -> SymForm:
    if sub.ambient_dim != form.dim:
        raise BilinearError(f"subspace lives in R^{sub.ambient_dim} but the form acts on R^{form.dim}")
    basis = sub.basis
    return SymForm(basis.T @ form.entries @ basis, scale=form.scale)


def is_nondegenerate(form: SymForm, tol: float = INERTIA_TOL) -> bool:
    return inertia(form, tol)[2] == 0


def orth_complement(form: SymForm, sub: Subspace, tol: float = INERTIA_TOL) -> Subspace:
    """
    {w : form(w, v) = 0 for all v in sub}.

    The ambient form must be nondegenerate. When the restriction to `sub` is
    degenerate (lightlike directions) the result may intersect `sub`.
    """
    if sub.ambient_dim != form.dim:
        raise BilinearError(f"subspace lives in R^{sub.ambient_dim} but the form acts on R^{form.dim}")
    if not is_nondegenerate(form, tol):
        raise DegenerateFormError("orthogonal complement requested for a degenerate form")
    if sub.dim == 0:
        return Subspace.full(form.dim)
    functionals = sub.basis.T @ form.entries
    if sub.dim == form.dim:
        return Subspace.zero(form.dim)
    return Subspace(null_space(functionals))


def signature_on_complement(form: SymForm, image: Subspace, tol: float = INERTIA_TOL) -> Tuple[int, bool]:
    """Signature of `form` on the form-orthogonal complement of `image`, plus its nondegeneracy flag."""
    complement = orth_complement(form, image, tol)
    n_minus, n_plus, degeneracy = inertia(restrict(form, complement), tol)
    return (n_plus - n_minus, degeneracy == 0)
