import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histq.dynamics import TimeGrid, UnitarySchedule, identity_schedule
from histq.errors import DuplicateStep, NonUnitaryStep, UnknownTime
from histq.linops import is_unitary, max_abs
from histq.qspace import CompositeSpace, Factor

from _models import propagate_oracle, random_schedule, random_space, random_state

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture
def qubit_pair():
    return CompositeSpace((Factor("a", 2, ("0", "1")), Factor("b", 2, ("0", "1"))))


def test_time_grid():
    g = TimeGrid(("t0", "t1", "t2"))
    assert g.index("t1") == 1 and "t2" in g and len(g) == 3 and g.start == "t0"
    with pytest.raises(UnknownTime):
        g.index("t9")
    with pytest.raises(ValueError):
        TimeGrid(("t0", "t0"))


def test_add_step_and_errors(qubit_pair):
    s = identity_schedule(qubit_pair, ["t0", "t1", "t2"])
    x = np.array([[0, 1], [1, 0]])
    e = np.eye(2)
    s1 = s.add_step(("t0", "t1"), ["b"], [(e[0], e[1]), (e[1], e[0])])
    assert np.allclose(s1.step(0), np.kron(np.eye(2), x))
    with pytest.raises(DuplicateStep):
        s1.add_step(("t0", "t1"), ["a"], [])
    with pytest.raises(UnknownTime):
        s1.add_step(("t0", "t2"), ["a"], [])
    ident = s.add_step(("t1", "t2"), ["a"], [])
    assert np.allclose(ident.step(1), np.eye(4))
    with pytest.raises(NonUnitaryStep):
        UnitarySchedule(qubit_pair, s.grid, {0: 2 * np.eye(4)})


def test_step_twice_is_not_identity_but_unitary():
    sp = CompositeSpace((Factor("r", 3, ("0", "1", "2")),))
    e = np.eye(3)
    s = identity_schedule(sp, ["t0", "t1"]).add_step(("t0", "t1"), ["r"], [(e[0], e[1]), (e[1], e[2])])
    u = s.step(0)
    assert is_unitary(u)
    # the completion closes the cycle 2 -> 0, so U^2 moves |0> to |2>
    assert np.allclose(u @ u @ e[0], e[2])
    assert max_abs(u @ u - np.eye(3)) > 0.5


def test_propagator_conventions(qubit_pair):
    rng = np.random.default_rng(0)
    s = random_schedule(qubit_pair, 4, rng, identity_prob=0.0)
    assert np.array_equal(s.propagator("t2", "t2"), np.eye(4))
    fwd = s.propagator("t0", "t3")
    assert np.allclose(fwd, s.step(2) @ s.step(1) @ s.step(0))
    assert np.allclose(s.propagator("t3", "t0"), fwd.conj().T)
    with pytest.raises(UnknownTime):
        s.propagator("t0", "tx")


def test_evolve_identity_and_norm(qubit_pair):
    rng = np.random.default_rng(1)
    s = random_schedule(qubit_pair, 3, rng)
    v = random_state(4, rng)
    assert np.array_equal(s.evolve(v, "t1", "t1"), v)
    assert abs(np.linalg.norm(s.evolve(v, "t0", "t2")) - 1) < 1e-10
    back = s.evolve(s.evolve(v, "t0", "t2"), "t2", "t0")
    assert np.allclose(back, v, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 5))
def test_cocycle_and_unitarity(seed, n):
    rng = np.random.default_rng(seed)
    s = random_schedule(random_space(rng), n, rng)
    t = s.grid.times
    for a in range(n):
        for b in range(a, n):
            for c in range(b, n):
                lhs = s.propagator(t[a], t[c])
                rhs = s.propagator(t[b], t[c]) @ s.propagator(t[a], t[b])
                assert max_abs(lhs - rhs) <= 1e-10
            assert is_unitary(s.propagator(t[a], t[b]))
            assert max_abs(s.propagator(t[a], t[b]) - propagate_oracle(s, t[a], t[b])) <= 1e-10
            assert max_abs(s.propagator(t[b], t[a]) - propagate_oracle(s, t[b], t[a])) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_evolve_matches_propagator(seed):
    rng = np.random.default_rng(seed)
    s = random_schedule(random_space(rng), 4, rng)
    v = random_state(s.space.total_dim, rng)
    for a, b in (("t0", "t3"), ("t3", "t1"), ("t1", "t2")):
        assert max_abs(s.evolve(v, a, b) - s.propagator(a, b) @ v) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_evolve_rows_matches_propagator(seed):
    rng = np.random.default_rng(seed)
    s = random_schedule(random_space(rng), 4, rng)
    d = s.space.total_dim
    rows = np.stack([random_state(d, rng) for _ in range(3)])
    for a, b in (("t0", "t3"), ("t3", "t0"), ("t2", "t1"), ("t1", "t1")):
        assert max_abs(s.evolve_rows(rows, a, b) - rows @ propagate_oracle(s, a, b).T) <= 1e-10
