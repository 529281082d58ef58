"""Random small models shared by the property tests."""

import numpy as np
from scipy.stats import unitary_group

from histq.dynamics import UnitarySchedule, TimeGrid
from histq.histories import Context, Family
from histq.qspace import CompositeSpace, Factor


def random_space(rng, max_factors=3, dims=(2, 3)):
    n = int(rng.integers(1, max_factors + 1))
    factors = []
    for k in range(n):
        d = int(rng.choice(dims))
        factors.append(Factor(f"f{k}", d, tuple(f"s{k}_{i}" for i in range(d))))
    return CompositeSpace(tuple(factors))


def haar(dim, rng):
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()) * np.eye(1)
    return unitary_group.rvs(dim, random_state=rng)


def random_state(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(dim, rng, rank=2):
    vs = [random_state(dim, rng) for _ in range(rank)]
    w = rng.random(rank)
    w = w / w.sum()
    return sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, vs))


def random_schedule(space, n_times, rng, identity_prob=0.2):
    times = tuple(f"t{i}" for i in range(n_times))
    steps = {}
    for i in range(n_times - 1):
        if rng.random() >= identity_prob:
            steps[i] = haar(space.total_dim, rng)
    return UnitarySchedule(space, TimeGrid(times), steps)


def random_context(time, dim, rng, n_parts=None):
    """Projectors onto a random partition of a random orthonormal basis."""
    u = haar(dim, rng)
    if n_parts is None:
        n_parts = int(rng.integers(1, dim + 1))
    cuts = np.sort(rng.choice(np.arange(1, dim), size=n_parts - 1, replace=False)) if n_parts > 1 else []
    groups = np.split(np.arange(dim), cuts)
    projs = [u[:, g] @ u[:, g].conj().T for g in groups]
    names = tuple(f"p{k}" for k in range(len(projs)))
    return Context(time, names, tuple(projs))


def random_family(schedule, rng, n_contexts=None, max_parts=3):
    times = schedule.grid.times[1:]
    if n_contexts is None:
        n_contexts = int(rng.integers(1, len(times) + 1))
    chosen = sorted(rng.choice(len(times), size=n_contexts, replace=False))
    dim = schedule.space.total_dim
    ctxs = [random_context(times[i], dim, rng, int(rng.integers(1, min(max_parts, dim) + 1)))
            for i in chosen]
    return Family(tuple(ctxs), "R")


def commuting_family(schedule, rng, n_contexts=2):
    """Family whose projectors are diagonal in the Heisenberg-evolved basis.

    With identity dynamics and contexts coarse-graining one fixed basis,
    the family is consistent for every initial state.
    """
    dim = schedule.space.total_dim
    u = haar(dim, rng)
    ctxs = []
    for t in schedule.grid.times[1:1 + n_contexts]:
        k = int(rng.integers(1, dim + 1))
        perm = rng.permutation(dim)
        cuts = np.sort(rng.choice(np.arange(1, dim), size=k - 1, replace=False)) if k > 1 else []
        groups = np.split(perm, cuts)
        projs = [u[:, g] @ u[:, g].conj().T for g in groups]
        ctxs.append(Context(t, tuple(f"p{j}" for j in range(k)), tuple(projs)))
    return Family(tuple(ctxs), "K")


def propagate_oracle(schedule, a, b):
    """Independent propagator from ``a`` to ``b`` built from the raw steps."""
    ia, ib = schedule.grid.index(a), schedule.grid.index(b)
    n = schedule.space.total_dim
    u = np.eye(n, dtype=complex)
    lo, hi = min(ia, ib), max(ia, ib)
    for k in range(lo, hi):
        step = schedule.steps.get(k, np.eye(n))
        u = step @ u
    return u if ia <= ib else u.conj().T
