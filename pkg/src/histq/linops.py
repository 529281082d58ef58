"""Dense complex linear algebra on small Hilbert spaces.

Operators are square ``complex128`` arrays and state vectors are 1-d
``complex128`` arrays. Tensor products follow the row-major convention:
the leftmost factor is the most significant index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import DimensionMismatch, NonIsometricPairs, NonOrthonormalInput

TOL_ORTH = 1e-10
TOL_NORM = 1e-10
TOL_EQ = 1e-10

# residual norm below which a canonical basis vector is treated as
# already spanned during Gram-Schmidt completion
_GS_SKIP = 1e-9


def as_operator(a) -> np.ndarray:
    op = np.asarray(a, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionMismatch(f"operator must be square, got shape {op.shape}")
    if not np.all(np.isfinite(op)):
        raise ValueError("operator has non-finite entries")
    return op


def as_state(v) -> np.ndarray:
    vec = np.asarray(v, dtype=complex)
    if vec.ndim != 1:
        raise DimensionMismatch(f"state must be 1-d, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("state has non-finite entries")
    return vec


def ket(dim: int, index: int) -> np.ndarray:
    """Canonical basis vector ``|index>`` of a ``dim``-dimensional space."""
    if not 0 <= index < dim:
        raise IndexError(f"basis index {index} out of range for dim {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def tensor(a, b) -> np.ndarray:
    """Kronecker product of two operators or two state vectors."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != b.ndim:
        raise DimensionMismatch("cannot tensor a state vector with an operator")
    return np.kron(a, b)


def tensor_all(items: Sequence) -> np.ndarray:
    out = np.asarray(items[0], dtype=complex)
    for item in items[1:]:
        out = tensor(out, item)
    return out


def adjoint(a) -> np.ndarray:
    return np.conj(np.asarray(a, dtype=complex)).T


def trace(a) -> complex:
    return complex(np.trace(as_operator(a)))


def outer(u, v=None) -> np.ndarray:
    """``|u><v|``; ``v`` defaults to ``u``."""
    u = as_state(u)
    v = u if v is None else as_state(v)
    return np.outer(u, np.conj(v))


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def unitarity_defect(u) -> float:
    """``max |U^dag U - I|``."""
    u = as_operator(u)
    return max_abs(adjoint(u) @ u - np.eye(u.shape[0]))


def is_unitary(u, tol: float = TOL_EQ) -> bool:
    return unitarity_defect(u) <= tol


def is_projector(p, tol: float = TOL_EQ) -> bool:
    p = as_operator(p)
    return max_abs(p @ p - p) <= tol and max_abs(p - adjoint(p)) <= tol


def rank(a, tol: float = 1e-8) -> int:
    """Numerical rank from singular values."""
    s = np.linalg.svd(as_operator(a), compute_uv=False)
    return int(np.sum(s > tol))


def _columns(states: Sequence, dim: int | None = None) -> np.ndarray:
    if len(states) == 0:
        return np.zeros((dim or 0, 0), dtype=complex)
    cols = [as_state(s) for s in states]
    d = cols[0].shape[0]
    if dim is not None and d != dim:
        raise DimensionMismatch(f"states have dim {d}, expected {dim}")
    if any(c.shape[0] != d for c in cols):
        raise DimensionMismatch("states have differing dimensions")
    return np.stack(cols, axis=1)


def gram_defect(states: Sequence) -> float:
    """``max |G - I|`` for the Gram matrix of ``states``."""
    m = _columns(states)
    if m.shape[1] == 0:
        return 0.0
    return max_abs(adjoint(m) @ m - np.eye(m.shape[1]))


def projector_from_states(states: Sequence, tol: float = TOL_ORTH) -> np.ndarray:
    """Projector ``sum_i |v_i><v_i|`` onto the span of orthonormal states.

    Raises
    ------
    NonOrthonormalInput
        If the Gram matrix of ``states`` deviates from the identity by
        more than ``tol``.
    """
    if len(states) == 0:
        raise ValueError("projector_from_states needs at least one state")
    m = _columns(states)
    defect = gram_defect(states)
    if defect > tol:
        raise NonOrthonormalInput(
            f"states are not orthonormal (Gram defect {defect:.3g} > {tol:g})")
    return m @ adjoint(m)


@dataclass(frozen=True)
class IsometryPair:
    """One prescribed action ``U @ input == output`` of a partial isometry."""

    input: np.ndarray
    output: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "input", as_state(self.input))
        object.__setattr__(self, "output", as_state(self.output))
        if self.input.shape != self.output.shape:
            raise DimensionMismatch("isometry pair sides differ in dimension")


def orthonormal_complement(basis: np.ndarray, dim: int) -> np.ndarray:
    """Extend the orthonormal columns of ``basis`` with canonical vectors.

    Candidates are the canonical basis vectors in index order; a candidate
    whose residual after projection has norm below 1e-9 is skipped.
    Returns only the new columns.
    """
    q = [basis[:, j] for j in range(basis.shape[1])]
    extra = []
    for i in range(dim):
        if len(q) == dim:
            break
        r = ket(dim, i)
        # two passes of classical Gram-Schmidt for full double precision
        for _ in range(2):
            for v in q:
                r = r - v * np.vdot(v, r)
        n = np.linalg.norm(r)
        if n < _GS_SKIP:
            continue
        r = r / n
        q.append(r)
        extra.append(r)
    if len(q) != dim:
        raise RuntimeError("Gram-Schmidt completion failed to span the space")
    if not extra:
        return np.zeros((dim, 0), dtype=complex)
    return np.stack(extra, axis=1)


def complete_partial_isometry(pairs: Sequence, dim: int, rng=None,
                              tol: float = TOL_ORTH) -> np.ndarray:
    """Extend a map given on orthonormal inputs to a unitary on ``dim``.

    Parameters
    ----------
    pairs : sequence of IsometryPair or (input, output) tuples
        Prescribed actions. Inputs must be pairwise orthonormal, and so
        must outputs.
    dim : int
        Dimension of the space the unitary acts on.
    rng : numpy.random.Generator, optional
        When given, the complement of the inputs is mapped onto the
        complement of the outputs through a Haar-random unitary instead
        of the deterministic Gram-Schmidt matching.

    Returns
    -------
    numpy.ndarray
        A ``dim x dim`` unitary ``U`` with ``U @ p.input == p.output``.
    """
    pairs = [p if isinstance(p, IsometryPair) else IsometryPair(*p) for p in pairs]
    for p in pairs:
        if p.input.shape[0] != dim:
            raise DimensionMismatch(
                f"pair vectors have dim {p.input.shape[0]}, expected {dim}")
    if len(pairs) > dim:
        raise NonIsometricPairs(f"{len(pairs)} pairs cannot fit in dim {dim}")
    ins = _columns([p.input for p in pairs], dim)
    outs = _columns([p.output for p in pairs], dim)
    for side, m in (("inputs", ins), ("outputs", outs)):
        if m.shape[1]:
            defect = max_abs(adjoint(m) @ m - np.eye(m.shape[1]))
            if defect > tol:
                raise NonIsometricPairs(
                    f"{side} are not orthonormal (Gram defect {defect:.3g})")
    comp_in = orthonormal_complement(ins, dim)
    comp_out = orthonormal_complement(outs, dim)
    if rng is not None and comp_out.shape[1] > 1:
        comp_out = comp_out @ unitary_group.rvs(comp_out.shape[1], random_state=rng)
    elif rng is not None and comp_out.shape[1] == 1:
        comp_out = comp_out * np.exp(2j * np.pi * rng.random())
    full_in = np.concatenate([ins, comp_in], axis=1)
    full_out = np.concatenate([outs, comp_out], axis=1)
    return full_out @ adjoint(full_in)


def random_unitary(dim: int, rng) -> np.ndarray:
    if dim == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    return unitary_group.rvs(dim, random_state=rng)
