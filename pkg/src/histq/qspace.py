"""Labeled tensor-product Hilbert spaces.

A :class:`CompositeSpace` is an ordered list of :class:`Factor` objects.
Vectors and operators on it are plain numpy arrays in the mixed-radix
order of :mod:`histq.linops` (first factor most significant).  Local
operators and states defined on a subset of factors, in any order, are
moved into the full space by :func:`lift` and :func:`embed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (DimensionMismatch, SpaceMismatch, UnknownFactor,
                     UnknownLabel, WrongArity, NotNormalized)
from .linops import TOL_NORM, as_operator, as_state, projector_from_states


@dataclass(frozen=True)
class Factor:
    name: str
    dim: int
    basis_labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "basis_labels", tuple(self.basis_labels))
        if self.dim < 1:
            raise ValueError(f"factor {self.name!r}: dim must be >= 1")
        if len(self.basis_labels) != self.dim:
            raise WrongArity(
                f"factor {self.name!r}: {len(self.basis_labels)} labels for dim {self.dim}")
        if len(set(self.basis_labels)) != self.dim:
            raise ValueError(f"factor {self.name!r}: basis labels must be distinct")

    def index(self, label: str) -> int:
        try:
            return self.basis_labels.index(label)
        except ValueError:
            raise UnknownLabel(f"label {label!r} not in factor {self.name!r}") from None


@dataclass(frozen=True)
class CompositeSpace:
    factors: tuple[Factor, ...]
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise ValueError(f"factor names must be unique: {names}")
        object.__setattr__(self, "_pos", {n: i for i, n in enumerate(names)})

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def index(self, name: str) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise UnknownFactor(f"unknown factor {name!r}") from None

    def factor(self, name: str) -> Factor:
        return self.factors[self.index(name)]

    def canonical(self, names: Iterable[str]) -> tuple[str, ...]:
        """Sort factor names into the space's factor order."""
        names = list(names)
        if len(set(names)) != len(names):
            raise ValueError(f"repeated factor in {names}")
        return tuple(sorted(names, key=self.index))

    def subdim(self, names: Iterable[str]) -> int:
        return math.prod(self.factor(n).dim for n in names)

    def flat_index(self, labels: Sequence[str]) -> int:
        if len(labels) != len(self.factors):
            raise WrongArity(
                f"expected {len(self.factors)} labels, got {len(labels)}")
        idx = 0
        for f, lab in zip(self.factors, labels):
            idx = idx * f.dim + f.index(lab)
        return idx

    def labels_of(self, index: int) -> tuple[str, ...]:
        out = []
        for f in reversed(self.factors):
            index, r = divmod(index, f.dim)
            out.append(f.basis_labels[r])
        return tuple(reversed(out))

    def factors_with_label(self, label: str, among: Iterable[str] | None = None) -> list[str]:
        pool = self.names if among is None else among
        return [n for n in pool if label in self.factor(n).basis_labels]


def basis_state(space: CompositeSpace, labels: Sequence[str]) -> np.ndarray:
    """Canonical product basis vector selected by one label per factor."""
    v = np.zeros(space.total_dim, dtype=complex)
    v[space.flat_index(labels)] = 1.0
    return v


def superpose(terms, require_normalized: bool = False, dim: int | None = None) -> np.ndarray:
    """Linear combination ``sum_i c_i |v_i>``; no normalization is applied.

    ``dim`` fixes the dimension of the zero vector returned for an empty
    term list.
    """
    terms = list(terms)
    if not terms:
        return np.zeros(dim or 0, dtype=complex)
    d = as_state(terms[0][1]).shape[0]
    out = np.zeros(d, dtype=complex)
    for c, v in terms:
        v = as_state(v)
        if v.shape[0] != d:
            raise SpaceMismatch(f"cannot superpose states of dim {v.shape[0]} and {d}")
        out = out + complex(c) * v
    if require_normalized:
        n = np.linalg.norm(out)
        if abs(n - 1.0) > TOL_NORM:
            raise NotNormalized(f"superposition has norm {n:.12g}")
    return out


def inner(u, v) -> complex:
    """``<u|v>``, conjugate-linear in ``u``."""
    u, v = as_state(u), as_state(v)
    if u.shape != v.shape:
        raise SpaceMismatch(f"inner product of dims {u.shape[0]} and {v.shape[0]}")
    return complex(np.vdot(u, v))


def _permute_state(vec: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    # axis j of the result is axis perm[j] of the input
    return vec.reshape(tuple(dims)).transpose(tuple(perm)).reshape(-1)


def _permute_operator(op: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    k = len(dims)
    t = op.reshape(tuple(dims) + tuple(dims))
    t = t.transpose(tuple(perm) + tuple(k + p for p in perm))
    d = math.prod(dims)
    return t.reshape(d, d)


def _completion_order(space: CompositeSpace, on_factors: Sequence[str]):
    names = list(on_factors)
    pos = [space.index(n) for n in names]
    if len(set(pos)) != len(pos):
        raise ValueError(f"repeated factor in {names}")
    rest = [i for i in range(len(space.factors)) if i not in pos]
    order = pos + rest
    perm = [order.index(j) for j in range(len(space.factors))]
    dims = [space.factors[i].dim for i in order]
    return rest, dims, perm


def lift(op, space: CompositeSpace, on_factors: Sequence[str]) -> np.ndarray:
    """Embed a local operator into the full space with identities elsewhere.

    ``op`` acts on the tensor product of ``on_factors`` taken in the given
    order; the factors need not be contiguous in ``space``.
    """
    op = as_operator(op)
    names = list(on_factors)
    if op.shape[0] != space.subdim(names):
        raise DimensionMismatch(
            f"operator dim {op.shape[0]} does not match factors {names} "
            f"(dim {space.subdim(names)})")
    rest, dims, perm = _completion_order(space, names)
    rest_dim = math.prod(space.factors[i].dim for i in rest)
    big = np.kron(op, np.eye(rest_dim, dtype=complex))
    return _permute_operator(big, dims, perm)


def reorder_state(vec, space: CompositeSpace, from_order: Sequence[str],
                  to_order: Sequence[str]) -> np.ndarray:
    """Relabel the tensor slots of a local vector from one factor order to another."""
    vec = as_state(vec)
    from_order, to_order = list(from_order), list(to_order)
    if sorted(from_order) != sorted(to_order):
        raise SpaceMismatch(f"factor sets differ: {from_order} vs {to_order}")
    dims = [space.factor(n).dim for n in from_order]
    if vec.shape[0] != math.prod(dims):
        raise DimensionMismatch(f"vector dim {vec.shape[0]} does not match {from_order}")
    perm = [from_order.index(n) for n in to_order]
    return _permute_state(vec, dims, perm)


def reorder_operator(op, space: CompositeSpace, from_order: Sequence[str],
                     to_order: Sequence[str]) -> np.ndarray:
    op = as_operator(op)
    from_order, to_order = list(from_order), list(to_order)
    if sorted(from_order) != sorted(to_order):
        raise SpaceMismatch(f"factor sets differ: {from_order} vs {to_order}")
    dims = [space.factor(n).dim for n in from_order]
    perm = [from_order.index(n) for n in to_order]
    return _permute_operator(op, dims, perm)


@dataclass(frozen=True, eq=False)
class LocalState:
    """A vector on a subset of factors, stored in the space's factor order."""

    space: CompositeSpace
    factors: tuple[str, ...]
    vector: np.ndarray

    def __post_init__(self):
        factors = tuple(self.factors)
        canon = self.space.canonical(factors)
        vec = as_state(self.vector)
        if vec.shape[0] != self.space.subdim(factors):
            raise DimensionMismatch(
                f"vector dim {vec.shape[0]} does not match factors {factors}")
        if factors != canon:
            vec = reorder_state(vec, self.space, factors, canon)
        object.__setattr__(self, "factors", canon)
        object.__setattr__(self, "vector", vec)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def __add__(self, other: "LocalState") -> "LocalState":
        if not isinstance(other, LocalState):
            return NotImplemented
        if other.space is not self.space and other.space != self.space:
            raise SpaceMismatch("states live on different spaces")
        if other.factors != self.factors:
            raise SpaceMismatch(
                f"cannot add states on {self.factors} and {other.factors}")
        return LocalState(self.space, self.factors, self.vector + other.vector)

    def __sub__(self, other: "LocalState") -> "LocalState":
        return self + (-1) * other

    def __rmul__(self, c) -> "LocalState":
        return LocalState(self.space, self.factors, complex(c) * self.vector)

    def __neg__(self) -> "LocalState":
        return (-1) * self

    def otimes(self, other: "LocalState") -> "LocalState":
        """Tensor product with a state on a disjoint set of factors."""
        if set(self.factors) & set(other.factors):
            raise SpaceMismatch(
                f"tensor of overlapping factor sets {self.factors} and {other.factors}")
        order = self.factors + other.factors
        return LocalState(self.space, order, np.kron(self.vector, other.vector))

    def full(self) -> np.ndarray:
        """The vector on the whole space; requires every factor to be covered."""
        if self.factors != self.space.names:
            missing = set(self.space.names) - set(self.factors)
            raise SpaceMismatch(f"state does not cover factors {sorted(missing)}")
        return self.vector

    def expansion(self, tol: float = 0.0):
        """Nonzero ``(coefficient, labels)`` pairs in basis order."""
        sub = CompositeSpace(tuple(self.space.factor(n) for n in self.factors))
        return [(complex(c), sub.labels_of(i))
                for i, c in enumerate(self.vector) if abs(c) > tol]


def local_ket(space: CompositeSpace, labels: Mapping[str, str]) -> LocalState:
    """Basis ket on the named factors, e.g. ``local_ket(s, {"C": "h"})``."""
    names = space.canonical(labels)
    sub = CompositeSpace(tuple(space.factor(n) for n in names))
    v = basis_state(sub, [labels[n] for n in names])
    return LocalState(space, names, v)


def local_tensor(*states: LocalState) -> LocalState:
    out = states[0]
    for s in states[1:]:
        out = out.otimes(s)
    return out


def embed(space: CompositeSpace, parts: Sequence[LocalState]) -> np.ndarray:
    """Full-space product state from local states covering every factor once."""
    return local_tensor(*parts).full()


def local_operator(space: CompositeSpace, state_list: Sequence[LocalState]):
    """``(factors, sum |v><v|)`` for local states sharing one factor set."""
    factors = state_list[0].factors
    for s in state_list:
        if s.factors != factors:
            raise SpaceMismatch(
                f"projector terms on different factors: {factors} vs {s.factors}")
    return factors, projector_from_states([s.vector for s in state_list])
