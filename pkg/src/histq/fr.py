"""Built-in Frauchiger-Renner model and its canned analyses.

:func:`build_fr` assembles the same model as the shipped ``data/fr.hq``
through :class:`~histq.scenario.ScenarioBuilder`. The analyses return the
numbers for the joint outcome of the two outside observers, the three
conditional inference steps, and the four-time family that would be needed
to chain them.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .histories import (DEFAULT_TOL, DecoherenceReport, Family, chain_vectors,
                        conditional, decoherence_functional, probability)
from .qspace import LocalState, local_ket
from .scenario.model import (Event, KetRef, ProjectorDecl, Query,
                             ScenarioBuilder, ScenarioModel, StateRef)
from .scenario.parser import parse_scenario

FACTORS = (
    ("C", ("h", "t")),
    ("F1", ("a0", "ah", "at")),
    ("q", ("down", "up")),
    ("F2", ("b0", "bdown", "bup")),
    ("W1", ("w10", "w1fail", "w1ok")),
    ("W2", ("w20", "w2fail", "w2ok")),
)
TIMES = ("t0", "t1", "t2", "t3", "t4", "t5")
CONTEXTS = {
    "c1": ("t1", "F1", ("ah", "at"), "not_a"),
    "c3": ("t3", "F2", ("bdown", "bup"), "not_b"),
    "c4": ("t4", "W1", ("w1ok", "w1fail"), "not_w1"),
    "c5": ("t5", "W2", ("w2ok", "w2fail"), "not_w2"),
}
FAMILIES = {
    "F45": ("c4", "c5"),
    "F34": ("c3", "c4"),
    "F13": ("c1", "c3"),
    "F15": ("c1", "c5"),
    "F1345": ("c1", "c3", "c4", "c5"),
}
# the pair of four-time histories whose chain vectors coincide
WITNESS_ALPHA = ("at", "bup", "w1ok", "w2ok")
WITNESS_BETA = ("ah", "bdown", "w1ok", "w2ok")

FrModel = ScenarioModel


def fr_source() -> str:
    """Text of the shipped ``fr.hq``."""
    return resources.files("histq").joinpath("data/fr.hq").read_text(encoding="utf-8")


def fr_expected_json() -> str:
    return resources.files("histq").joinpath("data/fr.expected.json").read_text(encoding="utf-8")


def load_fr(rng=None) -> ScenarioModel:
    """Parse the shipped ``fr.hq``."""
    return parse_scenario(fr_source(), name="fr", rng=rng)


def _pointer_labels(prefix: str, dim: int) -> tuple[str, ...]:
    extra = tuple(f"{prefix}x{k}" for k in range(3, dim))
    return (f"{prefix}0", f"{prefix}fail", f"{prefix}ok") + extra


def _queries() -> list[Query]:
    ev = Event
    r12 = 1 / np.sqrt(12)
    w0 = [(("W1", "w10"),), (("W2", "w20"),)]

    def amp(a, b, value):
        target = (StateRef(a), StateRef(b)) + tuple(KetRef(k) for k in w0)
        return Query("amplitude", time="t3", target=target, expected=float(value))

    return [
        Query("consistency", "F45", expected="consistent"),
        Query("prob", "F45", (ev("w1ok", "t4"), ev("w2ok", "t5")), expected=1 / 12),
        Query("prob", "F45", (ev("w1fail", "t4"), ev("w2fail", "t5")), expected=3 / 4),
        Query("consistency", "F34", expected="consistent"),
        Query("condprob", "F34", (ev("bup", "t3"),), (ev("w1ok", "t4"),), expected=1.0),
        Query("consistency", "F13", expected="consistent"),
        Query("condprob", "F13", (ev("at", "t1"),), (ev("bup", "t3"),), expected=1.0),
        Query("consistency", "F15", expected="consistent"),
        Query("condprob", "F15", (ev("w2fail", "t5"),), (ev("at", "t1"),), expected=1.0),
        Query("consistency", "F1345", expected="inconsistent"),
        Query("prob", "F1345", (ev("w1ok", "t4"), ev("w2ok", "t5")), expected="inconsistent"),
        amp("H", "Dn", 1 / np.sqrt(3)),
        amp("T", "Right", np.sqrt(2 / 3)),
        amp("okX", "okY", r12),
        amp("okX", "failY", -r12),
        amp("failX", "okY", r12),
        amp("failX", "failY", np.sqrt(3 / 4)),
    ]


def build_fr(rng=None, pointer_dim: int = 3) -> FrModel:
    """Programmatic construction of the full model (324-dimensional by default).

    Parameters
    ----------
    rng : numpy.random.Generator, optional
        Randomizes the completion of each step isometry outside the
        physically reachable subspace.
    pointer_dim : int
        Dimension of each outside instrument ``W1``, ``W2`` (at least 3).
        Extra pointer states are never reached.
    """
    if pointer_dim < 3:
        raise ValueError("pointer_dim must be at least 3")
    b = ScenarioBuilder("fr", rng=rng)
    for name, labels in FACTORS:
        if name in ("W1", "W2"):
            labels = _pointer_labels(name.lower(), pointer_dim)
        b.add_factor(name, len(labels), labels)
    b.set_times(TIMES)
    sp = b.space

    def k(**labels) -> LocalState:
        return local_ket(sp, labels)

    s2 = np.sqrt(0.5)
    H, T = k(C="h", F1="ah"), k(C="t", F1="at")
    Dn, Up = k(q="down", F2="bdown"), k(q="up", F2="bup")
    right = s2 * k(q="up") + s2 * k(q="down")
    states = {
        "phi": np.sqrt(1 / 3) * k(C="h") + np.sqrt(2 / 3) * k(C="t"),
        "right": right,
        "H": H, "T": T, "Dn": Dn, "Up": Up,
        "Right": s2 * Up + s2 * Dn,
        "failX": s2 * H + s2 * T,
        "okX": s2 * H - s2 * T,
        "failY": s2 * Dn + s2 * Up,
        "okY": s2 * Dn - s2 * Up,
    }
    for name, st in states.items():
        b.add_state(name, st)
    b.set_initial((StateRef("phi"), KetRef((("F1", "a0"),)), KetRef((("q", "down"),)),
                   KetRef((("F2", "b0"),)), KetRef((("W1", "w10"),)),
                   KetRef((("W2", "w20"),))))

    st = states
    w10, w1f, w1o = k(W1="w10"), k(W1="w1fail"), k(W1="w1ok")
    w20, w2f, w2o = k(W2="w20"), k(W2="w2fail"), k(W2="w2ok")
    b.add_interval("t0", "t1", ("C", "F1"), [
        (k(C="h", F1="a0"), H), (k(C="t", F1="a0"), T)])
    b.add_interval("t1", "t2", ("F1", "q"), [
        (k(F1="ah", q="down"), k(F1="ah", q="down")),
        (k(F1="at", q="down"), k(F1="at").otimes(right))])
    b.add_interval("t2", "t3", ("q", "F2"), [
        (k(q="down", F2="b0"), Dn), (k(q="up", F2="b0"), Up)])
    b.add_interval("t3", "t4", ("C", "F1", "W1"), [
        (st["failX"].otimes(w10), st["failX"].otimes(w1f)),
        (st["okX"].otimes(w10), st["okX"].otimes(w1o))])
    b.add_interval("t4", "t5", ("q", "F2", "W2"), [
        (st["okY"].otimes(w20), st["okY"].otimes(w2o)),
        (st["failY"].otimes(w20), st["failY"].otimes(w2f))])

    for cname, (time, factor, names, rest) in CONTEXTS.items():
        items = [ProjectorDecl(n, (KetRef(((factor, n),)),)) for n in names]
        items.append(ProjectorDecl(rest, rest=True))
        b.add_context(cname, time, items)
    for fname, ctxs in FAMILIES.items():
        b.add_family(fname, ctxs)
    for q in _queries():
        b.add_query(q)
    return b.build()


def _history(model: ScenarioModel, family: str, *events: tuple[str, str]):
    return model.history(family, [Event(n, t) for n, t in events])


def fr_first_part(model: ScenarioModel, tol: float = DEFAULT_TOL) -> float:
    """``Pr(w1ok@t4 and w2ok@t5)`` in the consistent two-time family."""
    h = _history(model, "F45", ("w1ok", "t4"), ("w2ok", "t5"))
    return probability(h, model.initial, model.schedule, tol=tol)


def fr_joint_table(model: ScenarioModel, tol: float = DEFAULT_TOL) -> dict:
    """All nine ``Pr(k4@t4 and k5@t5)`` of the two-time family, keyed by name pair."""
    rep = decoherence_functional(model.family("F45"), model.initial, model.schedule, tol)
    fam = rep.family
    out = {}
    for alpha in fam.atomic_grid:
        names = tuple(c.names[i] for c, i in zip(fam.contexts, alpha))
        out[names] = probability(fam.history([alpha]), model.initial, model.schedule,
                                 tol=tol, report=rep)
    return out


def fr_conditionals(model: ScenarioModel, tol: float = DEFAULT_TOL) -> tuple[float, float, float]:
    """``(Pr(bup@t3 | w1ok@t4), Pr(at@t1 | bup@t3), Pr(w2fail@t5 | at@t1))``."""
    pairs = (
        ("F34", ("bup", "t3"), ("w1ok", "t4")),
        ("F13", ("at", "t1"), ("bup", "t3")),
        ("F15", ("w2fail", "t5"), ("at", "t1")),
    )
    out = []
    for fam, a, b in pairs:
        ha = _history(model, fam, a)
        hb = _history(model, fam, b)
        out.append(conditional(ha, hb, model.initial, model.schedule, tol=tol))
    return tuple(out)


def four_time_family(model: ScenarioModel) -> Family:
    return model.family("F1345")


def fr_four_time(model: ScenarioModel, tol: float = DEFAULT_TOL) -> DecoherenceReport:
    """Decoherence report of the 81-history family over ``t1, t3, t4, t5``."""
    return decoherence_functional(four_time_family(model), model.initial,
                                  model.schedule, tol)


def witness_pair(model: ScenarioModel) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Index tuples of the two interfering histories singled out above."""
    fam = four_time_family(model)
    return fam.atomic(*WITNESS_ALPHA), fam.atomic(*WITNESS_BETA)


def witness_chain_vectors(model: ScenarioModel) -> tuple[np.ndarray, np.ndarray]:
    """``C(alpha)^dag |psi0>`` and ``C(beta)^dag |psi0>`` for :func:`witness_pair`."""
    fam = four_time_family(model)
    vecs = chain_vectors(fam, model.initial, model.schedule)
    a, b = witness_pair(model)
    return vecs[fam.flat_index(a)], vecs[fam.flat_index(b)]
