"""Query execution and report formatting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConditionOnNull, HistqError, InconsistentFamily
from ..histories import (DEFAULT_TOL, DecoherenceReport, conditional,
                         decoherence_functional, probability)
from .model import Query, ScenarioModel

EXPECT_TOL = 1e-9
FORCED_NOTE = "NOT A PROBABILITY — family inconsistent"


def format_number(x: float) -> float:
    """Round to 12 significant digits, snapping tiny values to zero."""
    x = float(x)
    if abs(x) < 1e-12:
        return 0.0
    return float(f"{x:.12g}")


def _format_expected(e):
    if e is None or isinstance(e, str):
        return e
    if isinstance(e, complex):
        return f"{format_number(e.real)!r}{format_number(e.imag):+}i"
    return format_number(e)


@dataclass
class QueryResult:
    query: str
    kind: str
    value: float | None = None
    consistent: bool | None = None
    witness: dict | None = None
    expected: float | complex | str | None = None
    passed: bool = False
    error: str | None = None
    note: str | None = None

    def to_dict(self) -> dict:
        w = None
        if self.witness is not None:
            w = {"alpha": list(self.witness["alpha"]),
                 "beta": list(self.witness["beta"]),
                 "magnitude": format_number(self.witness["magnitude"])}
        return {
            "query": self.query,
            "kind": self.kind,
            "value": None if self.value is None else format_number(self.value),
            "consistent": self.consistent,
            "witness": w,
            "expected": _format_expected(self.expected),
            "pass": self.passed,
            "error": self.error,
            "note": self.note,
        }

    def to_text(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        parts = [f"[{tag}] {self.query}"]
        if self.value is not None:
            parts.append(f"= {format_number(self.value)!r}")
        if self.expected is not None:
            parts.append(f"(expected {_format_expected(self.expected)})")
        if self.consistent is False and self.witness is not None and not self.error:
            w = self.witness
            parts.append(
                f"inconsistent: |D({', '.join(w['alpha'])}; {', '.join(w['beta'])})|"
                f" = {format_number(w['magnitude'])!r}")
        if self.error:
            parts.append(f"error: {self.error}")
        if self.note:
            parts.append(f"[{self.note}]")
        return " ".join(parts)


@dataclass
class Report:
    scenario: str
    results: list[QueryResult] = field(default_factory=list)
    tolerance: float = DEFAULT_TOL

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self) -> dict:
        return {"scenario": self.scenario,
                "results": [r.to_dict() for r in self.results],
                "tolerance": self.tolerance}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        lines = [f"scenario {self.scenario}"]
        lines += [r.to_text() for r in self.results]
        n_pass = sum(r.passed for r in self.results)
        lines.append(f"{n_pass}/{len(self.results)} queries passed")
        return "\n".join(lines) + "\n"


def _witness_dict(rep: DecoherenceReport) -> dict | None:
    if rep.consistent or rep.worst_offdiag is None:
        return None
    a, b = rep.witness_labels
    return {"alpha": list(a), "beta": list(b), "magnitude": rep.worst_offdiag[2]}


class Runner:
    """Evaluates queries against one model, caching decoherence matrices."""

    def __init__(self, model: ScenarioModel, tol: float = DEFAULT_TOL,
                 force: bool = False, expect_tol: float = EXPECT_TOL):
        if tol <= 0:
            raise ValueError("tolerance must be positive")
        self.model = model
        self.tol = tol
        self.force = force
        self.expect_tol = expect_tol
        self._reports: dict[str, DecoherenceReport] = {}

    def report_for(self, family: str) -> DecoherenceReport:
        if family not in self._reports:
            m = self.model
            self._reports[family] = decoherence_functional(
                m.family(family), m.initial, m.schedule, self.tol)
        return self._reports[family]

    def _close(self, value, expected) -> bool:
        return abs(complex(value) - complex(expected)) <= self.expect_tol

    def evaluate(self, q: Query) -> QueryResult:
        res = QueryResult(q.text(self.model.space), q.kind, expected=q.expected)
        try:
            if q.kind == "amplitude":
                self._amplitude(q, res)
            else:
                self._family_query(q, res)
        except HistqError as e:
            res.error = f"{type(e).__name__}: {e}"
            res.passed = False
        return res

    def _amplitude(self, q: Query, res: QueryResult) -> None:
        m = self.model
        target = m.state_vector(q.target)
        psi = m.schedule.evolve(m.initial, m.grid.start, q.time)
        amp = complex(np.vdot(target, psi))
        res.value = amp.real
        if abs(amp.imag) >= 1e-12:
            res.note = f"imaginary part {format_number(amp.imag)!r}"
        res.passed = q.expected is None or self._close(amp, q.expected)

    def _family_query(self, q: Query, res: QueryResult) -> None:
        m = self.model
        rep = self.report_for(q.family)
        res.consistent = rep.consistent
        res.witness = _witness_dict(rep)
        if q.kind == "consistency":
            res.value = rep.max_offdiag
            verdict = "consistent" if rep.consistent else "inconsistent"
            res.passed = q.expected is None or q.expected == verdict
            return
        force = self.force
        try:
            a = m.history(q.family, q.events)
            if q.kind == "prob":
                res.value = probability(a, m.initial, m.schedule, force=force,
                                        tol=self.tol, report=rep)
            else:
                b = m.history(q.family, q.given)
                res.value = conditional(a, b, m.initial, m.schedule, force=force,
                                        tol=self.tol, report=rep)
        except InconsistentFamily as e:
            res.error = f"InconsistentFamily: {e}"
            res.passed = q.expected == "inconsistent"
            return
        except ConditionOnNull as e:
            res.error = f"ConditionOnNull: {e}"
            res.passed = False
            return
        if not rep.consistent:
            res.note = FORCED_NOTE
        if q.expected is None:
            res.passed = True
        elif q.expected == "inconsistent":
            res.passed = not rep.consistent
        else:
            res.passed = self._close(res.value, q.expected)


def run(model: ScenarioModel, tol: float = DEFAULT_TOL, force: bool = False,
        expect_tol: float = EXPECT_TOL, queries=None) -> Report:
    """Execute ``queries`` (default: the model's own) in order.

    Errors raised by individual queries are recorded on their entries and
    do not stop the run.
    """
    runner = Runner(model, tol, force, expect_tol)
    qs = model.queries if queries is None else queries
    return Report(model.name, [runner.evaluate(q) for q in qs], tol)
