"""Scenario model and the builder that assembles it.

Both the text parser and the programmatic constructions go through
:class:`ScenarioBuilder`, which validates every declaration as soon as it
is made so that errors can be reported at the offending statement.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from ..dynamics import TimeGrid, UnitarySchedule
from ..errors import (DuplicateStep, InvariantViolation, NotNormalized,
                      UnknownReference)
from ..histories import Context, Family
from ..linops import (TOL_NORM, IsometryPair, complete_partial_isometry,
                      projector_from_states)
from ..qspace import CompositeSpace, Factor, LocalState, lift, local_ket

RESERVED = {"i", "sqrt"}
QUERY_KINDS = ("prob", "condprob", "consistency", "amplitude")


@dataclass(frozen=True)
class StateRef:
    name: str


@dataclass(frozen=True)
class KetRef:
    """Basis ket given as ``((factor, label), ...)`` in factor order."""

    labels: tuple[tuple[str, str], ...]


Atom = Union[StateRef, KetRef]


@dataclass(frozen=True)
class ProjectorDecl:
    name: str
    terms: tuple = ()
    rest: bool = False


@dataclass(frozen=True)
class ContextDecl:
    name: str
    time: str
    items: tuple[ProjectorDecl, ...]


@dataclass(frozen=True, eq=False)
class IntervalDecl:
    start: str
    end: str
    factors: tuple[str, ...]
    pairs: tuple[tuple[LocalState, LocalState], ...]
    local_unitary: np.ndarray


@dataclass(frozen=True)
class Event:
    name: str
    time: str
    negated: bool = False

    def __str__(self):
        return f"{'~' if self.negated else ''}{self.name}@{self.time}"


@dataclass(frozen=True)
class Query:
    kind: str
    family: str | None = None
    events: tuple[Event, ...] = ()
    given: tuple[Event, ...] = ()
    time: str | None = None
    target: tuple = ()
    expected: float | complex | str | None = None

    def text(self, space: CompositeSpace | None = None) -> str:
        """Canonical one-line spelling, without the ``expect`` clause."""
        if self.kind == "prob":
            return f"prob {self.family} : {' & '.join(map(str, self.events))}"
        if self.kind == "condprob":
            a = " & ".join(map(str, self.events))
            b = " & ".join(map(str, self.given))
            return f"condprob {self.family} : {a} | {b}"
        if self.kind == "consistency":
            return f"consistency {self.family}"
        return f"amplitude {self.time} : {render_atoms(self.target, space)}"


def ket_text(ref: KetRef, space: CompositeSpace | None, scope=None) -> str:
    """``|l1,l2>`` with a ``factor:`` prefix on labels ambiguous in ``scope``."""
    parts = []
    for fac, lab in ref.labels:
        if space is not None and len(space.factors_with_label(lab, scope)) > 1:
            parts.append(f"{fac}:{lab}")
        else:
            parts.append(lab)
    return "|" + ",".join(parts) + ">"


def render_atoms(atoms, space: CompositeSpace | None = None) -> str:
    out = []
    for a in atoms:
        out.append(a.name if isinstance(a, StateRef) else ket_text(a, space))
    return " (x) ".join(out)


@dataclass(eq=False)
class ScenarioModel:
    name: str
    space: CompositeSpace
    grid: TimeGrid
    times_declared: bool
    states: dict[str, LocalState]
    initial_atoms: tuple
    initial: np.ndarray
    intervals: list[IntervalDecl]
    schedule: UnitarySchedule
    context_decls: dict[str, ContextDecl]
    contexts: dict[str, Context]
    family_decls: dict[str, tuple[str, ...]]
    families: dict[str, Family]
    queries: list[Query] = field(default_factory=list)

    def family(self, name: str) -> Family:
        try:
            return self.families[name]
        except KeyError:
            raise UnknownReference(f"unknown family {name!r}") from None

    def history(self, family: str, events: Sequence[Event]):
        fam = self.family(family)
        h = fam.full()
        for ev in events:
            e = fam.event(ev.name, ev.time)
            h = h & (~e if ev.negated else e)
        return h

    def state_vector(self, atoms) -> np.ndarray:
        parts = [self._atom_state(a) for a in atoms]
        out = parts[0]
        for p in parts[1:]:
            out = out.otimes(p)
        return out.full()

    def _atom_state(self, atom: Atom) -> LocalState:
        if isinstance(atom, StateRef):
            return self.states[atom.name]
        return local_ket(self.space, dict(atom.labels))


def _schedule(space, grid, intervals) -> UnitarySchedule:
    steps = {grid.index(d.start): lift(d.local_unitary, space, d.factors) for d in intervals}
    return UnitarySchedule(space, grid, steps)


def randomize_completions(model: ScenarioModel, rng) -> ScenarioModel:
    """Copy of ``model`` whose step unitaries use fresh random completions.

    Only the action outside the declared isometry pairs changes.
    """
    intervals = []
    for d in model.intervals:
        local = complete_partial_isometry(
            [IsometryPair(a.vector, b.vector) for a, b in d.pairs],
            model.space.subdim(d.factors), rng=rng)
        intervals.append(replace(d, local_unitary=local))
    return replace(model, intervals=intervals,
                   schedule=_schedule(model.space, model.grid, intervals))


class ScenarioBuilder:
    """Incremental, validating constructor for :class:`ScenarioModel`.

    The time grid is either declared up front with :meth:`set_times` or
    grown by chaining intervals ``a -> b`` starting from the first time
    mentioned.
    """

    def __init__(self, name: str = "scenario", rng=None):
        self.name = name
        self.rng = rng
        self._factors: list[Factor] = []
        self._space: CompositeSpace | None = None
        self._times: list[str] = []
        self._times_declared = False
        self.states: dict[str, LocalState] = {}
        self._initial_atoms = None
        self._initial = None
        self.intervals: list[IntervalDecl] = []
        self.context_decls: dict[str, ContextDecl] = {}
        self.contexts: dict[str, Context] = {}
        self.family_decls: dict[str, tuple[str, ...]] = {}
        self.families: dict[str, Family] = {}
        self.queries: list[Query] = []

    # -- space ---------------------------------------------------------

    def add_factor(self, name: str, dim: int, labels: Sequence[str]) -> None:
        if self._space is not None:
            raise InvariantViolation(f"factor {name!r} declared after the space was used")
        if any(f.name == name for f in self._factors):
            raise InvariantViolation(f"factor {name!r} declared twice")
        self._factors.append(Factor(name, dim, tuple(labels)))

    @property
    def space(self) -> CompositeSpace:
        if self._space is None:
            if not self._factors:
                raise InvariantViolation("no factors declared")
            self._space = CompositeSpace(tuple(self._factors))
        return self._space

    def resolve_ket(self, labels: Sequence[str], scope: Sequence[str] | None = None) -> KetRef:
        """Map raw ket labels (optionally ``factor:label``) onto factors."""
        space = self.space
        if scope is not None:
            for f in scope:
                space.index(f)
        assigned: dict[str, str] = {}
        for raw in labels:
            if ":" in raw:
                fac, lab = raw.split(":", 1)
                if fac not in space.names:
                    raise UnknownReference(f"unknown factor {fac!r}")
                space.factor(fac).index(lab)
                hits = [fac]
            else:
                lab = raw
                hits = space.factors_with_label(lab, scope)
            if not hits:
                where = f" in factors {list(scope)}" if scope is not None else ""
                raise UnknownReference(f"unknown basis label {lab!r}{where}")
            if len(hits) > 1:
                raise UnknownReference(
                    f"basis label {lab!r} is ambiguous between factors {hits}; "
                    f"qualify it as factor:label")
            if hits[0] in assigned:
                raise InvariantViolation(f"ket names factor {hits[0]!r} twice")
            assigned[hits[0]] = lab
        order = space.canonical(assigned)
        return KetRef(tuple((f, assigned[f]) for f in order))

    def atom_state(self, atom: Atom) -> LocalState:
        if isinstance(atom, StateRef):
            if atom.name not in self.states:
                raise UnknownReference(f"unknown state {atom.name!r}")
            return self.states[atom.name]
        return local_ket(self.space, dict(atom.labels))

    def product(self, atoms: Sequence[Atom]) -> LocalState:
        out = self.atom_state(atoms[0])
        for a in atoms[1:]:
            out = out.otimes(self.atom_state(a))
        return out

    def add_state(self, name: str, state: LocalState, scope: Sequence[str] | None = None) -> None:
        if name in RESERVED:
            raise InvariantViolation(f"{name!r} is reserved")
        if name in self.states:
            raise InvariantViolation(f"state {name!r} declared twice")
        if scope is not None and set(scope) != set(state.factors):
            raise InvariantViolation(
                f"state {name!r} lives on {list(state.factors)}, declared on {list(scope)}")
        self.states[name] = state

    def set_initial(self, atoms: Sequence[Atom]) -> None:
        if self._initial is not None:
            raise InvariantViolation("initial state declared twice")
        state = self.product(atoms)
        missing = set(self.space.names) - set(state.factors)
        if missing:
            raise InvariantViolation(
                f"initial state does not cover factors {sorted(missing, key=self.space.index)}")
        if abs(state.norm - 1.0) > TOL_NORM:
            raise NotNormalized(f"initial state has norm {state.norm:.12g}")
        self._initial_atoms = tuple(atoms)
        self._initial = state.full()

    # -- time grid and dynamics ----------------------------------------

    def set_times(self, times: Sequence[str]) -> None:
        if self._times:
            raise InvariantViolation("times must be declared before intervals and contexts")
        TimeGrid(tuple(times))
        self._times = list(times)
        self._times_declared = True

    def _use_time(self, t: str) -> None:
        if t in self._times:
            return
        if self._times_declared:
            raise UnknownReference(f"time {t!r} is not declared in times")
        if not self._times:
            self._times.append(t)
            return
        raise UnknownReference(f"time {t!r} is not on the grid {self._times}")

    def add_interval(self, start: str, end: str, factors: Sequence[str],
                     pairs: Sequence[tuple[LocalState, LocalState]]) -> None:
        space = self.space
        factors = space.canonical(factors)
        if not self._times_declared:
            if not self._times:
                self._times.append(start)
            if start != self._times[-1] or end in self._times:
                raise InvariantViolation(
                    f"interval {start} -> {end} does not extend the grid {self._times}")
            self._times.append(end)
        else:
            self._use_time(start)
            self._use_time(end)
            i, j = self._times.index(start), self._times.index(end)
            if j != i + 1:
                raise InvariantViolation(f"{start} -> {end} is not a grid step")
        if any(d.start == start for d in self.intervals):
            raise DuplicateStep(f"interval starting at {start} declared twice")
        for a, b in pairs:
            for side in (a, b):
                if side.factors != factors:
                    raise InvariantViolation(
                        f"interval on {list(factors)} has a state on {list(side.factors)}")
        local = complete_partial_isometry(
            [IsometryPair(a.vector, b.vector) for a, b in pairs],
            space.subdim(factors), rng=self.rng)
        self.intervals.append(IntervalDecl(start, end, factors, tuple(pairs), local))

    # -- histories -----------------------------------------------------

    def projector(self, decl: ProjectorDecl) -> np.ndarray:
        states = [self.atom_state(a) for a in decl.terms]
        factors = states[0].factors
        for s in states:
            if s.factors != factors:
                raise InvariantViolation(
                    f"projector {decl.name!r} mixes factor sets {list(factors)} and {list(s.factors)}")
        local = projector_from_states([s.vector for s in states])
        return lift(local, self.space, factors)

    def add_context(self, name: str, time: str, items: Sequence[ProjectorDecl]) -> None:
        if name in self.context_decls:
            raise InvariantViolation(f"context {name!r} declared twice")
        self._use_time(time)
        rests = [d for d in items if d.rest]
        if len(rests) > 1:
            raise InvariantViolation(f"context {name!r} has more than one rest projector")
        explicit = {d.name: self.projector(d) for d in items if not d.rest}
        dim = self.space.total_dim
        names, projs = [], []
        for d in items:
            names.append(d.name)
            if d.rest:
                projs.append(np.eye(dim, dtype=complex) - sum(explicit.values()))
            else:
                projs.append(explicit[d.name])
        try:
            ctx = Context(time, tuple(names), tuple(projs))
        except InvariantViolation as e:
            raise InvariantViolation(f"context {name!r}: {e}") from None
        self.context_decls[name] = ContextDecl(name, time, tuple(items))
        self.contexts[name] = ctx

    def add_family(self, name: str, context_names: Sequence[str]) -> None:
        if name in self.family_decls:
            raise InvariantViolation(f"family {name!r} declared twice")
        ctxs = []
        for c in context_names:
            if c not in self.contexts:
                raise UnknownReference(f"unknown context {c!r}")
            ctxs.append(self.contexts[c])
        idx = [self._times.index(c.time) for c in ctxs]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvariantViolation(
                f"family {name!r}: context times {[c.time for c in ctxs]} are not increasing")
        self.family_decls[name] = tuple(context_names)
        self.families[name] = Family(tuple(ctxs), name)

    def _check_events(self, family: str, events: Sequence[Event]) -> None:
        fam = self.families[family]
        for ev in events:
            ctx = next((c for c in fam.contexts if c.time == ev.time), None)
            if ctx is None:
                raise UnknownReference(f"family {family!r} has no context at {ev.time!r}")
            if ev.name not in ctx.names:
                raise UnknownReference(
                    f"no projector {ev.name!r} in the context of {family!r} at {ev.time}")

    def add_query(self, q: Query) -> None:
        if q.kind not in QUERY_KINDS:
            raise InvariantViolation(f"unknown query kind {q.kind!r}")
        if q.kind == "amplitude":
            if q.time not in self._times:
                raise UnknownReference(f"time {q.time!r} is not on the grid")
            state = self.product(q.target)
            state.full()
            if isinstance(q.expected, str):
                raise InvariantViolation("amplitude queries expect a number")
        else:
            if q.family not in self.families:
                raise UnknownReference(f"unknown family {q.family!r}")
            self._check_events(q.family, q.events)
            self._check_events(q.family, q.given)
        if q.kind in ("prob", "condprob"):
            e = q.expected
            if isinstance(e, str) and e != "inconsistent":
                raise InvariantViolation(f"{q.kind} queries expect a number or 'inconsistent'")
            if isinstance(e, complex):
                raise InvariantViolation(f"{q.kind} queries expect a real number")
            if isinstance(e, float) and not (0.0 <= e <= 1.0):
                raise InvariantViolation(f"expected probability {e} is outside [0, 1]")
        if q.kind == "consistency" and q.expected not in (None, "consistent", "inconsistent"):
            raise InvariantViolation("consistency queries expect 'consistent' or 'inconsistent'")
        self.queries.append(q)

    # -- assembly ------------------------------------------------------

    def build(self) -> ScenarioModel:
        space = self.space
        if self._initial is None:
            raise InvariantViolation("no initial state declared")
        times = self._times or ["t0"]
        grid = TimeGrid(tuple(times))
        schedule = _schedule(space, grid, self.intervals)
        return ScenarioModel(
            name=self.name, space=space, grid=grid,
            times_declared=self._times_declared, states=dict(self.states),
            initial_atoms=self._initial_atoms, initial=self._initial,
            intervals=list(self.intervals), schedule=schedule,
            context_decls=dict(self.context_decls), contexts=dict(self.contexts),
            family_decls=dict(self.family_decls), families=dict(self.families),
            queries=list(self.queries))
