import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histq.errors import (DimensionMismatch, NotNormalized, SpaceMismatch,
                          UnknownFactor, UnknownLabel, WrongArity)
from histq.linops import adjoint, is_projector, is_unitary, max_abs
from histq.qspace import (CompositeSpace, Factor, LocalState, basis_state,
                          embed, inner, lift, local_ket, reorder_operator,
                          superpose)

from _models import haar, random_space

seeds = st.integers(0, 2**32 - 1)


@pytest.fixture
def fr_space():
    return CompositeSpace((
        Factor("C", 2, ("h", "t")),
        Factor("F1", 3, ("a0", "ah", "at")),
        Factor("q", 2, ("down", "up")),
        Factor("F2", 3, ("b0", "bdown", "bup")),
        Factor("W1", 3, ("w10", "w1fail", "w1ok")),
        Factor("W2", 3, ("w20", "w2fail", "w2ok")),
    ))


def test_factor_validation():
    with pytest.raises(WrongArity):
        Factor("x", 2, ("a",))
    with pytest.raises(ValueError):
        Factor("x", 2, ("a", "a"))
    with pytest.raises(ValueError):
        Factor("x", 0, ())


def test_dimension_product(fr_space):
    assert fr_space.total_dim == math.prod([2, 3, 2, 3, 3, 3]) == 324
    v = basis_state(fr_space, ("h", "a0", "down", "b0", "w10", "w20"))
    assert v.shape == (324,)
    assert v[0] == 1 and np.linalg.norm(v) == 1


def test_basis_state_errors(fr_space):
    with pytest.raises(UnknownLabel):
        basis_state(fr_space, ("x", "a0", "down", "b0", "w10", "w20"))
    with pytest.raises(WrongArity):
        basis_state(fr_space, ("h",))
    with pytest.raises(UnknownFactor):
        fr_space.index("nope")


def test_flat_index_roundtrip(fr_space):
    for i in (0, 1, 17, 323):
        assert fr_space.flat_index(fr_space.labels_of(i)) == i


def test_superpose_examples():
    h, t = np.array([1, 0]), np.array([0, 1])
    phi = superpose([(1 / np.sqrt(3), h), (np.sqrt(2 / 3), t)], require_normalized=True)
    assert abs(np.linalg.norm(phi) - 1) < 1e-12
    up, down = np.eye(4)[0], np.eye(4)[3]
    fail_y = superpose([(1 / np.sqrt(2), up), (1 / np.sqrt(2), down)])
    assert abs(np.linalg.norm(fail_y) - 1) < 1e-12
    z = superpose([], dim=3)
    assert z.shape == (3,) and np.linalg.norm(z) == 0
    with pytest.raises(SpaceMismatch):
        superpose([(1, h), (1, np.eye(3)[0])])
    with pytest.raises(NotNormalized):
        superpose([(1, h), (1, t)], require_normalized=True)


def test_inner_examples(fr_space):
    sp = fr_space
    H, T = local_ket(sp, {"C": "h", "F1": "ah"}), local_ket(sp, {"C": "t", "F1": "at"})
    s = 1 / np.sqrt(2)
    ok_x, fail_x = s * H - s * T, s * H + s * T
    assert abs(inner(ok_x.vector, fail_x.vector)) < 1e-15
    v = np.arange(5) + 1j
    assert inner(v, v).imag == 0 and inner(v, v).real > 0
    # conjugate-linear in the first slot
    assert inner(1j * v, v) == pytest.approx(-1j * inner(v, v))
    with pytest.raises(SpaceMismatch):
        inner(np.ones(2), np.ones(3))


def test_lift_examples(fr_space):
    sp = fr_space
    assert np.array_equal(lift(np.eye(2), sp, ["C"]), np.eye(324))
    ok = np.diag([0, 0, 1])
    p = lift(ok, sp, ["W1"])
    assert np.trace(p).real == pytest.approx(108)
    # oracle: explicit kron chain in factor order
    oracle = np.kron(np.eye(36), np.kron(ok, np.eye(3)))
    assert np.array_equal(p, oracle)
    with pytest.raises(DimensionMismatch):
        lift(np.eye(3), sp, ["C"])
    with pytest.raises(UnknownFactor):
        lift(np.eye(2), sp, ["Z"])


def test_lift_non_contiguous_matches_kron_oracle(fr_space):
    rng = np.random.default_rng(5)
    sp = fr_space
    a = rng.normal(size=(2, 2))
    b = rng.normal(size=(3, 3))
    # A on C and B on W1 equals kron(A, I, I, I, B, I)
    lifted = lift(np.kron(a, b), sp, ["C", "W1"])
    oracle = np.kron(a, np.kron(np.eye(18), np.kron(b, np.eye(3))))
    assert np.allclose(lifted, oracle, atol=1e-14)
    # argument order of the factors is honoured
    swapped = lift(np.kron(b, a), sp, ["W1", "C"])
    assert np.allclose(swapped, oracle, atol=1e-14)


def test_lift_commutes_on_disjoint_factors(fr_space):
    rng = np.random.default_rng(1)
    a = haar(6, rng)
    b = haar(3, rng)
    la, lb = lift(a, fr_space, ["C", "F1"]), lift(b, fr_space, ["W2"])
    assert max_abs(la @ lb - lb @ la) < 1e-12


def test_local_state_ops(fr_space):
    sp = fr_space
    a = local_ket(sp, {"F1": "ah", "C": "h"})
    assert a.factors == ("C", "F1")
    b = LocalState(sp, ("F1", "C"), np.kron(np.eye(3)[1], np.eye(2)[0]))
    assert np.array_equal(a.vector, b.vector)
    with pytest.raises(SpaceMismatch):
        a + local_ket(sp, {"q": "up"})
    with pytest.raises(SpaceMismatch):
        a.otimes(local_ket(sp, {"C": "t"}))
    with pytest.raises(SpaceMismatch):
        a.full()
    parts = [a, local_ket(sp, {"q": "down", "F2": "b0"}), local_ket(sp, {"W1": "w10", "W2": "w20"})]
    full = embed(sp, parts)
    assert np.array_equal(full, basis_state(sp, ("h", "ah", "down", "b0", "w10", "w20")))
    assert [lab for _, lab in (a + a).expansion()] == [("h", "ah")]


def test_reorder_operator_roundtrip(fr_space):
    rng = np.random.default_rng(2)
    op = rng.normal(size=(18, 18))
    there = reorder_operator(op, fr_space, ["C", "F1", "W1"], ["W1", "C", "F1"])
    back = reorder_operator(there, fr_space, ["W1", "C", "F1"], ["C", "F1", "W1"])
    assert np.array_equal(back, op)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_basis_states_orthonormal(seed):
    sp = random_space(np.random.default_rng(seed))
    vecs = [basis_state(sp, labs) for labs in itertools.product(*(f.basis_labels for f in sp.factors))]
    g = np.array(vecs)
    assert max_abs(g @ g.conj().T - np.eye(sp.total_dim)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_lift_preserves_structure(seed):
    rng = np.random.default_rng(seed)
    sp = random_space(rng, max_factors=4)
    k = int(rng.integers(1, len(sp.factors) + 1))
    names = list(rng.permutation(sp.names)[:k])
    d = sp.subdim(names)
    u = haar(d, rng)
    cols = u[:, : int(rng.integers(1, d + 1))]
    p = cols @ cols.conj().T
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = h + adjoint(h)
    assert is_unitary(lift(u, sp, names), tol=1e-12)
    assert is_projector(lift(p, sp, names), tol=1e-12)
    lh = lift(h, sp, names)
    assert max_abs(lh - adjoint(lh)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_lifts_on_disjoint_sets_commute(seed):
    rng = np.random.default_rng(seed)
    sp = random_space(rng, max_factors=4)
    if len(sp.factors) < 2:
        return
    perm = list(rng.permutation(sp.names))
    cut = int(rng.integers(1, len(perm)))
    f, g = perm[:cut], perm[cut:]
    a = rng.normal(size=(sp.subdim(f),) * 2)
    b = rng.normal(size=(sp.subdim(g),) * 2)
    a, b = a + a.T, b + b.T
    la, lb = lift(a, sp, f), lift(b, sp, g)
    assert max_abs(la @ lb - lb @ la) <= 1e-12
