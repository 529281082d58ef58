import numpy as np
import pytest

from histq import fr
from histq.errors import InconsistentFamily
from histq.histories import (chain_operator, conditional, decoherence_entry,
                             decoherence_functional,
                             probability)
from histq.linops import max_abs, unitarity_defect
from histq.qspace import basis_state, embed, inner, local_ket
from histq.scenario import Event

R12 = 1 / np.sqrt(12)


@pytest.fixture(scope="module")
def model():
    return fr.build_fr()


def _named(model, *names):
    """Full-space product of named local states and ready pointers."""
    sp = model.space
    parts = [model.states[n] for n in names]
    covered = {f for p in parts for f in p.factors}
    ready = {"C": "h", "F1": "a0", "q": "down", "F2": "b0", "W1": "w10", "W2": "w20"}
    for f in sp.names:
        if f not in covered:
            parts.append(local_ket(sp, {f: ready[f]}))
    return embed(sp, parts)


def _oracle_state(model, t):
    """Step-by-step evolution using the raw step matrices."""
    v = model.initial
    for k in range(model.grid.index(t)):
        v = model.schedule.steps[k] @ v
    return v


def test_shipped_file_structure(model):
    m = fr.load_fr()
    assert m.space.total_dim == 2 * 3 * 2 * 3 * 3 * 3 == 324
    assert len(m.intervals) == 5 and len(m.schedule.steps) == 5
    assert len(m.contexts) == 4
    # the parsed file and the builder produce the same operators
    for k, u in model.schedule.steps.items():
        assert max_abs(m.schedule.steps[k] - u) <= 1e-12
    for name, c in model.contexts.items():
        assert all(max_abs(p - q) <= 1e-12 for p, q in zip(m.contexts[name].projectors, c.projectors))
    assert max_abs(m.initial - model.initial) <= 1e-12
    assert m.queries == model.queries


def test_model_invariants(model):
    st_ = model.states
    assert abs(inner(st_["okX"].vector, st_["failX"].vector)) < 1e-15
    assert abs(inner(st_["okY"].vector, st_["failY"].vector)) < 1e-15
    assert abs(np.linalg.norm(model.initial) - 1) < 1e-12
    for u in model.schedule.steps.values():
        assert unitarity_defect(u) <= 1e-10


def test_pointer_projector_trace(model):
    p = model.contexts["c1"].projectors[model.contexts["c1"].index("at")]
    # lifted rank-one pointer projector: 2*2*3*3*3 = 108
    assert np.trace(p).real == pytest.approx(108)
    assert np.trace(model.contexts["c4"].projectors[0]).real == pytest.approx(108)


def test_step_actions(model):
    sp = model.space
    u43 = model.schedule.step(3)
    fail_x_ready = _named(model, "failX")
    fail_x_fired = embed(sp, [model.states["failX"], local_ket(sp, {"q": "down", "F2": "b0"}),
                              local_ket(sp, {"W1": "w1fail"}), local_ket(sp, {"W2": "w20"})])
    assert max_abs(u43 @ fail_x_ready - fail_x_fired) < 1e-12
    u10 = model.schedule.step(0)
    h_ready = basis_state(sp, ("h", "a0", "down", "b0", "w10", "w20"))
    assert max_abs(u10 @ h_ready - basis_state(sp, ("h", "ah", "down", "b0", "w10", "w20"))) < 1e-12


def test_state_at_t3(model):
    psi3 = model.schedule.evolve(model.initial, "t0", "t3")
    assert inner(_named(model, "H", "Dn"), psi3) == pytest.approx(1 / np.sqrt(3), abs=1e-10)
    assert inner(_named(model, "T", "Right"), psi3) == pytest.approx(np.sqrt(2 / 3), abs=1e-10)
    assert inner(_named(model, "failX", "failY"), psi3) == pytest.approx(np.sqrt(3 / 4), abs=1e-10)
    # derived: the evolved state equals the oracle evolution
    assert max_abs(psi3 - _oracle_state(model, "t3")) < 1e-12


def test_final_state_amplitude(model):
    sp = model.space
    psi5 = model.schedule.propagator("t0", "t5") @ model.initial
    target = embed(sp, [model.states["failX"], model.states["failY"],
                        local_ket(sp, {"W1": "w1fail"}), local_ket(sp, {"W2": "w2fail"})])
    oracle = _oracle_state(model, "t5")
    assert inner(target, psi5) == pytest.approx(inner(target, oracle), abs=1e-12)
    assert inner(target, psi5) == pytest.approx(np.sqrt(3 / 4), abs=1e-10)
    assert abs(np.linalg.norm(psi5) - 1) < 1e-10


def test_first_part(model):
    assert fr.fr_first_part(model) == pytest.approx(1 / 12, abs=1e-10)
    table = fr.fr_joint_table(model)
    assert len(table) == 9
    assert table[("w1fail", "w2fail")] == pytest.approx(3 / 4, abs=1e-10)
    assert sum(table.values()) == pytest.approx(1, abs=1e-10)
    # the two W projectors commute with the last step, so each joint
    # probability is a Born weight of the final state
    psi5 = _oracle_state(model, "t5")
    c4, c5 = model.contexts["c4"], model.contexts["c5"]
    for (a, b), p in table.items():
        born = np.linalg.norm(c5.projectors[c5.index(b)] @ c4.projectors[c4.index(a)] @ psi5) ** 2
        assert p == pytest.approx(born, abs=1e-10)
    fired = sum(table[(a, b)] for a in ("w1ok", "w1fail") for b in ("w2ok", "w2fail"))
    assert fired == pytest.approx(1, abs=1e-10)


def test_first_part_is_additive(model):
    fam = model.family("F45")
    rep = decoherence_functional(fam, model.initial, model.schedule)
    ok = fam.event("w1ok", "t4")
    parts = [ok & fam.event(n, "t5") for n in ("w2ok", "w2fail", "not_w2")]
    total = sum(probability(h, model.initial, model.schedule, report=rep) for h in parts)
    assert total == pytest.approx(probability(ok, model.initial, model.schedule, report=rep), abs=1e-10)


def test_conditionals(model):
    assert fr.fr_conditionals(model) == pytest.approx((1, 1, 1), abs=1e-10)
    fam = model.family("F34")
    p = conditional(fam.event("bdown", "t3"), fam.event("w1ok", "t4"), model.initial, model.schedule)
    assert p == pytest.approx(0, abs=1e-10)
    f13 = model.family("F13")
    pat = probability(f13.event("at", "t1"), model.initial, model.schedule)
    psi1 = _oracle_state(model, "t1")
    born = np.linalg.norm(model.contexts["c1"].projectors[1] @ psi1) ** 2
    assert pat == pytest.approx(born, abs=1e-12)
    assert pat == pytest.approx(2 / 3, abs=1e-10)


def test_four_time_family(model):
    rep = fr.fr_four_time(model)
    assert rep.family.size == 81 and not rep.consistent
    a, b = fr.witness_pair(model)
    assert abs(rep.entry(a, b)) == pytest.approx(1 / 12, abs=1e-10)
    assert (a, b) in rep.maximal_pairs()
    # the reported witness is the lexicographic first of the tied maxima
    fam = rep.family
    assert rep.worst_offdiag[:2] == (fam.atomic("ah", "bdown", "w1ok", "w2ok"),
                                     fam.atomic("at", "bdown", "w1ok", "w2ok"))
    assert rep.max_offdiag == pytest.approx(1 / 12, abs=1e-10)
    # trace form agrees with the chain-vector route
    d = decoherence_entry(fam, a, b, model.initial, model.schedule)
    assert d == pytest.approx(rep.entry(a, b), abs=1e-10)


def test_four_time_chain_vectors(model):
    u, v = fr.witness_chain_vectors(model)
    assert max_abs(u - v) <= 1e-10
    assert np.linalg.norm(u) == pytest.approx(R12, abs=1e-10)
    a, _ = fr.witness_pair(model)
    c = chain_operator(fr.four_time_family(model), a, model.schedule)
    assert max_abs(c.conj().T @ model.initial - u) <= 1e-10


def test_four_time_gate(model):
    h = model.history("F1345", [Event("w1ok", "t4"), Event("w2ok", "t5")])
    with pytest.raises(InconsistentFamily) as exc:
        probability(h, model.initial, model.schedule)
    assert exc.value.magnitude == pytest.approx(1 / 12, abs=1e-10)
    forced = probability(h, model.initial, model.schedule, force=True)
    assert forced == pytest.approx(1 / 12, abs=1e-10)


def test_pointer_dim_validation():
    with pytest.raises(ValueError):
        fr.build_fr(pointer_dim=2)


def test_larger_instruments_give_same_numbers():
    dim = 4
    m = fr.build_fr(pointer_dim=dim)
    assert m.space.total_dim == 2 * 3 * 2 * 3 * dim * dim
    assert fr.fr_first_part(m) == pytest.approx(1 / 12, abs=1e-10)
    assert fr.fr_conditionals(m) == pytest.approx((1, 1, 1), abs=1e-10)
    rep = fr.fr_four_time(m)
    a, b = fr.witness_pair(m)
    assert not rep.consistent and abs(rep.entry(a, b)) == pytest.approx(1 / 12, abs=1e-10)
