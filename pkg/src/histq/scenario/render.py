"""Print a :class:`ScenarioModel` back to ``.hq`` source.

States and interval maps are written as explicit basis expansions, so the
output does not depend on how the original file spelled them.
"""

from __future__ import annotations

from ..qspace import LocalState
from .model import KetRef, ScenarioModel, StateRef, ket_text, render_atoms


def _coeff(c: complex) -> str:
    if c.imag == 0.0:
        return repr(c.real)
    return f"({c.real!r} + {c.imag!r}*i)"


def render_state(state: LocalState) -> str:
    space = state.space
    terms = state.expansion()
    if not terms:
        labels = tuple(space.factor(f).basis_labels[0] for f in state.factors)
        terms = [(0j, labels)]
    out = []
    for c, labels in terms:
        ref = KetRef(tuple(zip(state.factors, labels)))
        out.append(f"{_coeff(c)} {ket_text(ref, space, state.factors)}")
    return " + ".join(out)


def _projector_item(model: ScenarioModel, decl) -> str:
    if decl.rest:
        return f"rest {decl.name}"
    scope = None
    for t in decl.terms:
        if isinstance(t, KetRef):
            scope = tuple(f for f, _ in t.labels)
            break
    parts = []
    for t in decl.terms:
        if isinstance(t, StateRef):
            parts.append(f"[{t.name}]")
        else:
            k = ket_text(t, model.space, scope)
            parts.append(f"{k}<{k[1:-1]}|")
    text = f"{decl.name} = {' + '.join(parts)}"
    if scope is not None:
        text += f" on {','.join(scope)}"
    return text


def _expected(e) -> str:
    if isinstance(e, str):
        return e
    if isinstance(e, complex):
        return _coeff(e)
    return repr(float(e))


def render_scenario(model: ScenarioModel) -> str:
    """Source text that parses back to an equivalent model."""
    space = model.space
    lines = [f"scenario {model.name}", ""]
    for f in space.factors:
        lines.append(f"factor {f.name} dim={f.dim} basis=[{','.join(f.basis_labels)}]")
    lines.append(f"times [{', '.join(model.grid.times)}]")
    lines.append("")
    for name, st in model.states.items():
        lines.append(f"state {name} on {','.join(st.factors)} = {render_state(st)}")
    lines.append(f"initial = {render_atoms(model.initial_atoms, space)}")
    lines.append("")
    for d in model.intervals:
        lines.append(f"interval {d.start} -> {d.end} on {','.join(d.factors)} {{")
        for a, b in d.pairs:
            lines.append(f"  {render_state(a)} -> {render_state(b)}")
        lines.append("}")
    if model.intervals:
        lines.append("")
    for decl in model.context_decls.values():
        lines.append(f"context {decl.name} at {decl.time} {{")
        for item in decl.items:
            lines.append(f"  {_projector_item(model, item)}")
        lines.append("}")
    for name, ctxs in model.family_decls.items():
        lines.append(f"family {name} = [{', '.join(ctxs)}]")
    if model.queries:
        lines.append("")
    for q in model.queries:
        text = f"query {q.text(space)}"
        if q.expected is not None:
            text += f" expect {_expected(q.expected)}"
        lines.append(text)
    return "\n".join(lines) + "\n"
