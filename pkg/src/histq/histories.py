"""Consistent histories: contexts, families, chain operators and the
decoherence functional.

A family is a time-ordered list of contexts (resolutions of the identity).
Its atomic histories are the index tuples of the product grid, and a
general history is a subset of that grid. Probabilities are only handed
out on families whose decoherence functional is diagonal.

For an atomic history ``alpha = (k_1, ..., k_n)`` at times
``t_1 < ... < t_n`` the chain operator is::

    C(alpha) = U(t_0, t_1) P_{k_1} U(t_1, t_2) ... P_{k_n} U(t_n, t_0)

where ``U(a, b)`` carries states from ``b`` back to ``a``, and

    D(alpha, beta) = Tr[C(alpha)^dag rho_0 C(beta)].
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import UnitarySchedule
from .errors import (ConditionOnNull, FamilyMismatch, InconsistentFamily,
                     InvariantViolation, UnknownIndex, UnknownLabel)
from .linops import TOL_EQ, adjoint, as_operator, max_abs

DEFAULT_TOL = 1e-10
# slack for clamping probabilities and for treating Pr(B) as null
NULL_TOL = 1e-12
# |D| values within this of the maximum are ties for the witness
WITNESS_TIE = 1e-12


@dataclass(frozen=True, eq=False)
class Context:
    """Named, mutually orthogonal projectors summing to the identity."""

    time: str
    names: tuple[str, ...]
    projectors: tuple[np.ndarray, ...]
    tol: float = TOL_EQ

    def __post_init__(self):
        names = tuple(self.names)
        projs = tuple(as_operator(p) for p in self.projectors)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "projectors", projs)
        if not projs:
            raise InvariantViolation(f"context at {self.time} has no projectors")
        if len(names) != len(projs):
            raise ValueError("one name per projector required")
        if len(set(names)) != len(names):
            raise InvariantViolation(f"context at {self.time}: duplicate projector names {names}")
        dim = projs[0].shape[0]
        if any(p.shape[0] != dim for p in projs):
            raise InvariantViolation(f"context at {self.time}: projectors differ in dimension")
        for n, p in zip(names, projs):
            if max_abs(p - adjoint(p)) > self.tol:
                raise InvariantViolation(f"projector {n!r} at {self.time} is not Hermitian")
        # real projectors (the common case) are checked in real arithmetic
        checked = [np.ascontiguousarray(p.real) if not p.imag.any() else p for p in projs]
        # P_b P_a = (P_a P_b)^dag, so the upper triangle suffices
        for (i, (a, p)), (j, (b, q)) in itertools.combinations_with_replacement(
                enumerate(zip(names, checked)), 2):
            target = p if i == j else 0.0
            if max_abs(p @ q - target) > self.tol:
                what = "is not idempotent" if a == b else f"is not orthogonal to {b!r}"
                raise InvariantViolation(f"projector {a!r} at {self.time} {what}")
        total = sum(projs)
        if max_abs(total - np.eye(dim)) > self.tol:
            raise InvariantViolation(
                f"context at {self.time} does not sum to identity "
                f"(defect {max_abs(total - np.eye(dim)):.3g})")

    @classmethod
    def with_rest(cls, time: str, items: Sequence[tuple[str, np.ndarray]],
                  rest: str | None = None, tol: float = TOL_EQ) -> "Context":
        """Build a context, optionally closing it with ``I - sum P``."""
        names = [n for n, _ in items]
        projs = [as_operator(p) for _, p in items]
        if rest is not None:
            dim = projs[0].shape[0]
            names.append(rest)
            projs.append(np.eye(dim, dtype=complex) - sum(projs))
        return cls(time, tuple(names), tuple(projs), tol)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownLabel(f"no projector {name!r} in context at {self.time}") from None

    def __len__(self) -> int:
        return len(self.projectors)


@dataclass(frozen=True, eq=False)
class Family:
    contexts: tuple[Context, ...]
    name: str = ""
    _grid: tuple = field(init=False, repr=False)
    _flat: dict = field(init=False, repr=False)

    def __post_init__(self):
        contexts = tuple(self.contexts)
        object.__setattr__(self, "contexts", contexts)
        if not contexts:
            raise InvariantViolation("a family needs at least one context")
        times = [c.time for c in contexts]
        if len(set(times)) != len(times):
            raise InvariantViolation(f"family {self.name!r}: repeated context time in {times}")
        grid = tuple(itertools.product(*(range(len(c)) for c in contexts)))
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(self, "_flat", {a: i for i, a in enumerate(grid)})

    def check_times(self, schedule: UnitarySchedule) -> None:
        idx = [schedule.grid.index(c.time) for c in self.contexts]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvariantViolation(
                f"family {self.name!r}: context times {self.times} are not increasing")

    @property
    def times(self) -> tuple[str, ...]:
        return tuple(c.time for c in self.contexts)

    @property
    def atomic_grid(self) -> tuple[tuple[int, ...], ...]:
        return self._grid

    @property
    def size(self) -> int:
        return len(self._grid)

    def flat_index(self, alpha: Sequence[int]) -> int:
        try:
            return self._flat[tuple(alpha)]
        except KeyError:
            raise UnknownIndex(f"{tuple(alpha)} is not an atomic history of {self.name!r}") from None

    def context_at(self, time: str) -> Context:
        for c in self.contexts:
            if c.time == time:
                return c
        raise UnknownIndex(f"family {self.name!r} has no context at {time}")

    def position(self, time: str) -> int:
        return self.times.index(self.context_at(time).time)

    def labels(self, alpha: Sequence[int]) -> tuple[str, ...]:
        return tuple(f"{c.names[k]}@{c.time}" for c, k in zip(self.contexts, alpha))

    def atomic(self, *names: str) -> tuple[int, ...]:
        """Index tuple from one projector name per context."""
        if len(names) != len(self.contexts):
            raise UnknownIndex(f"expected {len(self.contexts)} projector names")
        return tuple(c.index(n) for c, n in zip(self.contexts, names))

    def history(self, lam) -> "History":
        return History(self, frozenset(tuple(a) for a in lam))

    def event(self, name: str, time: str) -> "History":
        """All atomic histories with projector ``name`` at ``time``."""
        pos = self.position(time)
        k = self.contexts[pos].index(name)
        return History(self, frozenset(a for a in self._grid if a[pos] == k))

    def full(self) -> "History":
        return History(self, frozenset(self._grid))

    def empty(self) -> "History":
        return History(self, frozenset())


@dataclass(frozen=True)
class History:
    family: Family
    lam: frozenset

    def __post_init__(self):
        bad = [a for a in self.lam if a not in self.family._flat]
        if bad:
            raise UnknownIndex(f"{bad[0]} is not in the atomic grid of {self.family.name!r}")

    def _check(self, other: "History") -> None:
        if other.family is not self.family:
            raise FamilyMismatch("histories belong to different families")

    def __and__(self, other: "History") -> "History":
        self._check(other)
        return History(self.family, self.lam & other.lam)

    def __or__(self, other: "History") -> "History":
        self._check(other)
        return History(self.family, self.lam | other.lam)

    def __invert__(self) -> "History":
        return History(self.family, frozenset(self.family._grid) - self.lam)

    def __len__(self) -> int:
        return len(self.lam)


def history_and(*hs: History) -> History:
    out = hs[0]
    for h in hs[1:]:
        out = out & h
    return out


def history_or(*hs: History) -> History:
    out = hs[0]
    for h in hs[1:]:
        out = out | h
    return out


def history_not(h: History) -> History:
    return ~h


def _as_density(rho0) -> np.ndarray:
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        return np.outer(rho, np.conj(rho))
    return as_operator(rho)


def _pure_components(rho0):
    """``[(weight, vector)]`` with ``rho0 = sum w |v><v|``."""
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        return [(1.0, rho)]
    rho = as_operator(rho)
    if max_abs(rho - adjoint(rho)) > TOL_EQ:
        raise InvariantViolation("density operator is not Hermitian")
    w, v = np.linalg.eigh(rho)
    if w.min() < -TOL_EQ:
        raise InvariantViolation(f"density operator has negative eigenvalue {w.min():.3g}")
    return [(float(w[i]), v[:, i]) for i in range(len(w)) if w[i] > NULL_TOL]


def chain_operator(family: Family, alpha: Sequence[int],
                   schedule: UnitarySchedule) -> np.ndarray:
    """Explicit chain operator ``C(alpha)`` as a full-space matrix."""
    family.check_times(schedule)
    alpha = tuple(alpha)
    family.flat_index(alpha)
    t0 = schedule.grid.start
    c = np.eye(schedule.space.total_dim, dtype=complex)
    prev = t0
    for ctx, k in zip(family.contexts, alpha):
        c = c @ schedule.propagator(ctx.time, prev) @ ctx.projectors[k]
        prev = ctx.time
    return c @ schedule.propagator(t0, prev)


def chain_vectors(family: Family, psi0, schedule: UnitarySchedule) -> np.ndarray:
    """Rows ``C(alpha)^dag |psi0>`` for every atomic history, in grid order.

    Evaluated as forward evolution with projections, sharing prefixes,
    followed by propagation back to the initial time.
    """
    family.check_times(schedule)
    psi0 = np.asarray(psi0, dtype=complex)
    t0 = schedule.grid.start
    frontier = psi0[None, :]
    prev = t0
    for ctx in family.contexts:
        evolved = schedule.evolve_rows(frontier, prev, ctx.time)
        # projector index varies fastest, matching itertools.product order
        frontier = np.stack([evolved @ p.T for p in ctx.projectors], axis=1)
        frontier = frontier.reshape(-1, psi0.shape[0])
        prev = ctx.time
    return schedule.evolve_rows(frontier, prev, t0)


@dataclass(frozen=True, eq=False)
class DecoherenceReport:
    family: Family
    matrix: np.ndarray
    consistent: bool
    worst_offdiag: tuple | None
    tol: float

    @property
    def witness_labels(self):
        if self.worst_offdiag is None:
            return None
        a, b, _ = self.worst_offdiag
        return self.family.labels(a), self.family.labels(b)

    @property
    def max_offdiag(self) -> float:
        return 0.0 if self.worst_offdiag is None else self.worst_offdiag[2]

    def entry(self, alpha: Sequence[int], beta: Sequence[int]) -> complex:
        f = self.family
        return complex(self.matrix[f.flat_index(alpha), f.flat_index(beta)])

    def maximal_pairs(self, tie: float = WITNESS_TIE) -> list[tuple]:
        """All off-diagonal ``(alpha, beta)`` with ``|D|`` tied for the maximum."""
        if self.worst_offdiag is None:
            return []
        grid = self.family.atomic_grid
        mags = np.abs(self.matrix)
        np.fill_diagonal(mags, -1.0)
        rows, cols = np.nonzero(mags >= self.worst_offdiag[2] - tie)
        return [(grid[i], grid[j]) for i, j in zip(rows, cols)]

    def raw_probability(self, history: History) -> float:
        """``sum_{alpha, beta in Lambda} D(alpha, beta)`` without any gate."""
        if history.family is not self.family:
            raise FamilyMismatch("history does not belong to the reported family")
        idx = sorted(self.family.flat_index(a) for a in history.lam)
        if not idx:
            return 0.0
        sub = self.matrix[np.ix_(idx, idx)]
        return float(np.sum(sub).real)


def _witness(matrix: np.ndarray, grid) -> tuple | None:
    n = matrix.shape[0]
    if n < 2:
        return None
    mags = np.abs(matrix)
    np.fill_diagonal(mags, -1.0)
    top = float(mags.max())
    # grid order is lexicographic, so the first hit in row-major order is
    # the lexicographic minimum among the tied maxima
    rows, cols = np.nonzero(mags >= top - WITNESS_TIE)
    i, j = int(rows[0]), int(cols[0])
    return grid[i], grid[j], float(mags[i, j])


def decoherence_functional(family: Family, rho0, schedule: UnitarySchedule,
                           tol: float = DEFAULT_TOL) -> DecoherenceReport:
    """Full decoherence matrix of ``family`` with its consistency verdict.

    ``rho0`` is a state vector or a density operator at the initial grid
    time. ``consistent`` holds when every off-diagonal ``|D|`` is at most
    ``tol``.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    n = family.size
    d = np.zeros((n, n), dtype=complex)
    for w, psi in _pure_components(rho0):
        vecs = chain_vectors(family, psi, schedule)
        # D[a, b] = <c_b|c_a>
        d += w * (vecs @ np.conj(vecs).T)
    worst = _witness(d, family.atomic_grid)
    consistent = worst is None or worst[2] <= tol
    return DecoherenceReport(family, d, consistent, worst, tol)


def decoherence_entry(family: Family, alpha, beta, rho0,
                      schedule: UnitarySchedule) -> complex:
    """Single ``D(alpha, beta)`` from the trace of explicit chain operators."""
    rho = _as_density(rho0)
    ca = chain_operator(family, alpha, schedule)
    cb = chain_operator(family, beta, schedule)
    return complex(np.trace(adjoint(ca) @ rho @ cb))


def _gate(report: DecoherenceReport) -> None:
    if not report.consistent:
        a, b = report.witness_labels
        mag = report.worst_offdiag[2]
        raise InconsistentFamily(
            f"family {report.family.name!r} is inconsistent: "
            f"|D({', '.join(a)}; {', '.join(b)})| = {mag:.12g} > {report.tol:g}",
            witness=(a, b), magnitude=mag)


def _clamp(p: float) -> float:
    if -NULL_TOL <= p < 0.0:
        return 0.0
    if 1.0 < p <= 1.0 + NULL_TOL:
        return 1.0
    return p


def probability(history: History, rho0, schedule: UnitarySchedule,
                force: bool = False, tol: float = DEFAULT_TOL,
                report: DecoherenceReport | None = None) -> float:
    """``Tr[C(Lambda)^dag rho_0 C(Lambda)]`` for a history of a consistent family.

    Raises
    ------
    InconsistentFamily
        If the family fails the consistency check and ``force`` is off.
    """
    if report is None:
        report = decoherence_functional(history.family, rho0, schedule, tol)
    if not force:
        _gate(report)
    return _clamp(report.raw_probability(history))


def conditional(history_a: History, history_b: History, rho0,
                schedule: UnitarySchedule, force: bool = False,
                tol: float = DEFAULT_TOL,
                report: DecoherenceReport | None = None) -> float:
    """``Pr(A | B) = Pr(A and B) / Pr(B)`` within one consistent family."""
    history_a._check(history_b)
    if report is None:
        report = decoherence_functional(history_b.family, rho0, schedule, tol)
    if not force:
        _gate(report)
    pb = report.raw_probability(history_b)
    if pb <= NULL_TOL:
        raise ConditionOnNull(f"conditioning history has probability {pb:.3g}")
    return _clamp(report.raw_probability(history_a & history_b) / pb)


def born_probability(projector, psi_t) -> float:
    """``<psi_t|P|psi_t>`` for a state already evolved to the projector's time."""
    psi_t = np.asarray(psi_t, dtype=complex)
    return float(np.vdot(psi_t, as_operator(projector) @ psi_t).real)


def history_norm(history: History, psi0, schedule: UnitarySchedule) -> float:
    """``||C(Lambda)^dag |psi0>||``, the pure-state form of the probability."""
    vecs = chain_vectors(history.family, psi0, schedule)
    idx = [history.family.flat_index(a) for a in history.lam]
    if not idx:
        return 0.0
    return float(np.linalg.norm(vecs[idx].sum(axis=0)))
