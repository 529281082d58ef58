"""Time grids and piecewise-unitary schedules.

Times are ordinal labels. Each grid interval ``(t_i, t_{i+1})`` carries a
full-space step unitary (identity when nothing was specified), and
propagators between arbitrary grid times are products of steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DuplicateStep, NonUnitaryStep, UnknownTime
from .linops import (TOL_EQ, IsometryPair, adjoint, as_operator, as_state,
                     complete_partial_isometry, unitarity_defect)
from .qspace import CompositeSpace, lift


@dataclass(frozen=True)
class TimeGrid:
    times: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(self.times))
        if not self.times:
            raise ValueError("time grid needs at least one time")
        if len(set(self.times)) != len(self.times):
            raise ValueError(f"time labels must be unique: {self.times}")

    def index(self, t: str) -> int:
        try:
            return self.times.index(t)
        except ValueError:
            raise UnknownTime(f"time {t!r} is not on the grid {list(self.times)}") from None

    def __contains__(self, t) -> bool:
        return t in self.times

    def __len__(self) -> int:
        return len(self.times)

    @property
    def start(self) -> str:
        return self.times[0]


@dataclass(frozen=True, eq=False)
class UnitarySchedule:
    """Step unitaries on a :class:`TimeGrid`, keyed by interval start index.

    Instances are immutable; :meth:`add_step` returns a new schedule.
    """

    space: CompositeSpace
    grid: TimeGrid
    steps: Mapping[int, np.ndarray] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        steps = dict(self.steps)
        n = self.space.total_dim
        for i, u in steps.items():
            if not 0 <= i < len(self.grid) - 1:
                raise UnknownTime(f"step index {i} outside grid")
            u = as_operator(u)
            if u.shape[0] != n:
                raise NonUnitaryStep(f"step {self._label(i)} has dim {u.shape[0]}, expected {n}")
            defect = unitarity_defect(u)
            if defect > TOL_EQ:
                raise NonUnitaryStep(
                    f"step {self._label(i)} is not unitary (defect {defect:.3g})")
            steps[i] = u
        object.__setattr__(self, "steps", steps)

    def _label(self, i: int) -> str:
        return f"({self.grid.times[i]}, {self.grid.times[i + 1]})"

    def _interval_index(self, interval: Sequence[str]) -> int:
        a, b = interval
        i, j = self.grid.index(a), self.grid.index(b)
        if j != i + 1:
            raise UnknownTime(f"({a}, {b}) is not a grid step")
        return i

    def with_unitary(self, interval: Sequence[str], unitary) -> "UnitarySchedule":
        """New schedule with the full-space unitary set on a grid step."""
        i = self._interval_index(interval)
        if i in self.steps:
            raise DuplicateStep(f"step {self._label(i)} already defined")
        steps = dict(self.steps)
        steps[i] = unitary
        return UnitarySchedule(self.space, self.grid, steps)

    def add_step(self, interval: Sequence[str], factors: Sequence[str],
                 pairs: Sequence, rng=None) -> "UnitarySchedule":
        """Complete a partial isometry on ``factors`` and store it as a step.

        Pair vectors live on the product of ``factors`` in the order given.
        An empty ``pairs`` list yields an identity step.
        """
        local_dim = self.space.subdim(factors)
        pairs = [p if isinstance(p, IsometryPair) else IsometryPair(*p) for p in pairs]
        local = complete_partial_isometry(pairs, local_dim, rng=rng)
        return self.with_unitary(interval, lift(local, self.space, factors))

    def step(self, i: int) -> np.ndarray:
        if i in self.steps:
            return self.steps[i]
        return np.eye(self.space.total_dim, dtype=complex)

    def propagator(self, t_from: str, t_to: str) -> np.ndarray:
        """Operator taking a state at ``t_from`` to ``t_to``.

        Backward propagation is the adjoint of the forward product.
        """
        i, j = self.grid.index(t_from), self.grid.index(t_to)
        key = (i, j)
        if key in self._cache:
            return self._cache[key]
        if i == j:
            u = np.eye(self.space.total_dim, dtype=complex)
        elif i < j:
            u = self.step(i)
            for k in range(i + 1, j):
                u = self.step(k) @ u
        else:
            u = adjoint(self.propagator(t_to, t_from))
        self._cache[key] = u
        return u

    def evolve(self, state, t_from: str, t_to: str) -> np.ndarray:
        """Apply the propagator step by step to a state vector."""
        v = as_state(state)
        i, j = self.grid.index(t_from), self.grid.index(t_to)
        if i <= j:
            for k in range(i, j):
                if k in self.steps:
                    v = self.steps[k] @ v
        else:
            for k in range(i - 1, j - 1, -1):
                if k in self.steps:
                    v = adjoint(self.steps[k]) @ v
        return v

    def evolve_rows(self, rows: np.ndarray, t_from: str, t_to: str) -> np.ndarray:
        """Batch form of :meth:`evolve` for states stored as rows of ``rows``.

        Cheaper than forming the propagator when there are fewer rows than
        the dimension.
        """
        v = np.asarray(rows, dtype=complex)
        i, j = self.grid.index(t_from), self.grid.index(t_to)
        if i <= j:
            for k in range(i, j):
                if k in self.steps:
                    v = v @ self.steps[k].T
        else:
            for k in range(i - 1, j - 1, -1):
                if k in self.steps:
                    v = v @ self.steps[k].conj()
        return v


def identity_schedule(space: CompositeSpace, times: Sequence[str]) -> UnitarySchedule:
    return UnitarySchedule(space, TimeGrid(tuple(times)))
