r"""Parser for ``.hq`` scenario files.

The format is line oriented; ``#`` starts a comment and newlines inside
``{}``, ``()`` or ``[]`` are ignored. Grammar::

    scenario  := "scenario" NAME
    factor    := "factor" NAME "dim" "=" INT "basis" "=" "[" label {"," label} "]"
    times     := "times" ["["] time {"," time} ["]"]
    state     := "state" NAME ["on" names] "=" sexpr
    initial   := "initial" "=" product
    interval  := "interval" time "->" time "on" names "{" {sexpr "->" sexpr [";"]} "}"
    context   := "context" NAME "at" time "{" {item [";"]} "}"
    item      := "rest" NAME | NAME "=" pterm {"+" pterm} ["on" names]
    pterm     := KET BRA | "[" NAME "]"
    family    := "family" NAME "=" "[" NAME {"," NAME} "]"
    query     := "query" ( "prob" NAME ":" events
                         | "condprob" NAME ":" events "|" events
                         | "consistency" NAME
                         | "amplitude" time ":" product ) ["expect" value]
    events    := event {"&" event}
    event     := ["~"] NAME "@" time
    sexpr     := ["+"|"-"] term {("+"|"-") term}
    term      := [coeff ["*"]] product {"/" cfactor}
    product   := atom {"(x)" atom}
    atom      := KET | NAME | "(" sexpr ")"
    coeff     := cfactor {("*"|"/") cfactor}
    cfactor   := ["-"] (NUMBER | "i" | "sqrt" "(" arith ")" | "(" arith ")")

Kets are written ``|l1,l2,...>``; a label may be qualified as
``factor:label`` when it occurs in more than one factor.
"""

from __future__ import annotations

import cmath
import re
from dataclasses import dataclass

from ..errors import (DimensionMismatch, DuplicateStep, HistqError,
                      InvariantViolation, NonIsometricPairs, NonUnitaryStep,
                      NotNormalized, ScenarioError, ScenarioInvariantViolation,
                      ScenarioNonUnitaryStep, ScenarioSyntaxError, SpaceMismatch,
                      UnknownFactor, UnknownIndex, UnknownLabel, UnknownReference,
                      UnknownTime, WrongArity)
from ..qspace import LocalState
from .model import (Event, ProjectorDecl, Query, ScenarioBuilder,
                    ScenarioModel, StateRef)

_LABEL = r"[A-Za-z0-9_'.:]+"
_TOKEN_RE = re.compile(
    rf"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<tensor>\(x\))
  | (?P<ket>\|\s*{_LABEL}(?:\s*,\s*{_LABEL})*\s*>)
  | (?P<bra><\s*{_LABEL}(?:\s*,\s*{_LABEL})*\s*\|)
  | (?P<arrow>->)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[=,;{{}}\[\]()+\-*/&@~:|])
    """,
    re.VERBOSE,
)

_OPEN = {"{": "}", "(": ")", "[": "]"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int

    def is_(self, kind: str, text: str | None = None) -> bool:
        return self.kind == kind and (text is None or self.text == text)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    depth: list[str] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ScenarioSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "newline":
            if not depth and tokens and tokens[-1].kind != "newline":
                tokens.append(Token("newline", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind in ("ket", "bra"):
            labels = re.sub(r"\s+", "", value[1:-1])
            tokens.append(Token(kind, labels, line, col))
        elif kind not in ("ws", "comment"):
            if kind == "sym" and value in _OPEN:
                depth.append(_OPEN[value])
            elif kind == "sym" and value in _OPEN.values():
                if not depth or depth[-1] != value:
                    raise ScenarioSyntaxError(f"unbalanced {value!r}", line, col)
                depth.pop()
            tokens.append(Token(kind, value, line, col))
        pos = m.end()
    if depth:
        raise ScenarioSyntaxError(f"missing {depth[-1]!r} at end of input", line,
                                  pos - line_start + 1)
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_ERROR_MAP = (
    ((UnknownLabel, UnknownFactor, UnknownTime, UnknownIndex), UnknownReference),
    ((NonIsometricPairs, NonUnitaryStep), ScenarioNonUnitaryStep),
    ((InvariantViolation, NotNormalized, DimensionMismatch, SpaceMismatch,
      DuplicateStep, WrongArity), ScenarioInvariantViolation),
)


def _located(exc: Exception, tok: Token) -> ScenarioError:
    if isinstance(exc, ScenarioError):
        if exc.line is not None:
            return exc
        return type(exc)(exc.message, tok.line, tok.col)
    msg = exc.args[0] if exc.args else str(exc)
    for kinds, target in _ERROR_MAP:
        if isinstance(exc, kinds):
            return target(str(msg), tok.line, tok.col)
    return ScenarioInvariantViolation(str(msg), tok.line, tok.col)


class Parser:
    def __init__(self, text: str, builder: ScenarioBuilder):
        self.toks = tokenize(text)
        self.i = 0
        self.b = builder

    # -- token helpers -------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ScenarioSyntaxError(f"{msg}, found {found}", tok.line, tok.col)

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.is_(kind, text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.advance()
        return None

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        if not self.at(kind, text):
            raise self.error(f"expected {what or text or kind}")
        return self.advance()

    def keyword(self, word: str) -> Token:
        return self.expect("name", word, repr(word))

    def name(self, what: str = "a name") -> str:
        return self.expect("name", what=what).text

    def label(self, what: str = "a label") -> str:
        if self.at("name") or self.at("number"):
            return self.advance().text
        raise self.error(f"expected {what}")

    def name_list(self, what: str = "a factor name") -> list[str]:
        out = [self.name(what)]
        while self.accept("sym", ","):
            out.append(self.name(what))
        return out

    def end_statement(self) -> None:
        if not (self.accept("newline") or self.at("eof")):
            raise self.error("expected end of line")

    # -- top level -----------------------------------------------------

    def parse(self) -> ScenarioModel:
        while self.accept("newline"):
            pass
        while not self.at("eof"):
            start = self.tok
            if not start.is_("name"):
                raise self.error("expected a statement keyword")
            handler = getattr(self, f"stmt_{start.text}", None)
            if handler is None:
                raise self.error("unknown statement", start)
            try:
                handler()
            except ScenarioSyntaxError:
                raise
            except HistqError as e:
                raise _located(e, start) from None
            self.end_statement()
            while self.accept("newline"):
                pass
        try:
            return self.b.build()
        except HistqError as e:
            raise _located(e, self.tok) from None

    def stmt_scenario(self):
        self.advance()
        self.b.name = self.label("a scenario name")

    def stmt_factor(self):
        self.advance()
        name = self.name("a factor name")
        self.keyword("dim")
        self.expect("sym", "=")
        dim_tok = self.expect("number", what="an integer dimension")
        if not dim_tok.text.isdigit():
            raise self.error("expected an integer dimension", dim_tok)
        self.keyword("basis")
        self.expect("sym", "=")
        self.expect("sym", "[")
        labels = [self.label("a basis label")]
        while self.accept("sym", ","):
            labels.append(self.label("a basis label"))
        self.expect("sym", "]")
        self.b.add_factor(name, int(dim_tok.text), labels)

    def stmt_times(self):
        self.advance()
        self.accept("sym", "=")
        bracket = self.accept("sym", "[")
        times = [self.label("a time label")]
        while self.accept("sym", ","):
            times.append(self.label("a time label"))
        if bracket:
            self.expect("sym", "]")
        self.b.set_times(times)

    def stmt_state(self):
        self.advance()
        name = self.name("a state name")
        scope = None
        if self.accept("name", "on"):
            scope = self.name_list()
        self.expect("sym", "=")
        state = self.sexpr(scope)
        self.b.add_state(name, state, scope)

    def stmt_initial(self):
        self.advance()
        self.expect("sym", "=")
        atoms = self.atom_product(None)
        self.b.set_initial(atoms)

    def stmt_interval(self):
        self.advance()
        start = self.label("a time label")
        self.expect("arrow", what="'->'")
        end = self.label("a time label")
        self.keyword("on")
        factors = self.name_list()
        self.expect("sym", "{")
        pairs = []
        while not self.at("sym", "}"):
            a = self.sexpr(factors)
            self.expect("arrow", what="'->'")
            b = self.sexpr(factors)
            pairs.append((a, b))
            self.accept("sym", ";")
        self.expect("sym", "}")
        self.b.add_interval(start, end, factors, pairs)

    def stmt_context(self):
        self.advance()
        name = self.name("a context name")
        self.keyword("at")
        time = self.label("a time label")
        self.expect("sym", "{")
        items = []
        while not self.at("sym", "}"):
            if self.at("name", "rest") and self.peek().kind == "name":
                self.advance()
                items.append(ProjectorDecl(self.name("a projector name"), rest=True))
            else:
                items.append(self.projector_item())
            self.accept("sym", ";")
        self.expect("sym", "}")
        if not items:
            raise self.error("context needs at least one projector")
        self.b.add_context(name, time, items)

    def projector_item(self) -> ProjectorDecl:
        name = self.name("a projector name")
        self.expect("sym", "=")
        raw = [self.pterm()]
        while self.accept("sym", "+"):
            raw.append(self.pterm())
        scope = None
        if self.accept("name", "on"):
            scope = self.name_list()
        terms = []
        for kind, value, tok in raw:
            try:
                terms.append(self.b.resolve_ket(value, scope) if kind == "ket"
                             else StateRef(value))
            except HistqError as e:
                raise _located(e, tok) from None
        return ProjectorDecl(name, tuple(terms))

    def pterm(self):
        tok = self.tok
        if self.accept("sym", "["):
            name = self.name("a state name")
            self.expect("sym", "]")
            return ("state", name, tok)
        k = self.expect("ket", what="'|label><label|' or '[state]'")
        b = self.expect("bra", what="a bra matching the ket")
        if k.text != b.text:
            raise ScenarioInvariantViolation(
                f"'|{k.text}><{b.text}|' is not a projector", k.line, k.col)
        return ("ket", k.text.split(","), tok)

    def stmt_family(self):
        self.advance()
        name = self.name("a family name")
        self.expect("sym", "=")
        self.expect("sym", "[")
        ctxs = self.name_list("a context name")
        self.expect("sym", "]")
        self.b.add_family(name, ctxs)

    def stmt_query(self):
        self.advance()
        self.b.add_query(self.query_body())

    def query_body(self) -> Query:
        kind = self.name("a query kind")
        if kind == "prob":
            fam = self.name("a family name")
            self.expect("sym", ":")
            q = Query("prob", fam, events=self.events())
        elif kind == "condprob":
            fam = self.name("a family name")
            self.expect("sym", ":")
            a = self.events()
            self.expect("sym", "|", "'|'")
            q = Query("condprob", fam, events=a, given=self.events())
        elif kind == "consistency":
            q = Query("consistency", self.name("a family name"))
        elif kind == "amplitude":
            t = self.label("a time label")
            self.expect("sym", ":")
            q = Query("amplitude", time=t, target=self.atom_product(None))
        else:
            raise self.error("expected prob, condprob, consistency or amplitude", self.toks[self.i - 1])
        if self.accept("name", "expect"):
            q = Query(q.kind, q.family, q.events, q.given, q.time, q.target, self.expect_value())
        return q

    def events(self) -> tuple[Event, ...]:
        out = [self.event()]
        while self.accept("sym", "&"):
            out.append(self.event())
        return tuple(out)

    def event(self) -> Event:
        neg = bool(self.accept("sym", "~"))
        name = self.name("a projector name")
        self.expect("sym", "@")
        return Event(name, self.label("a time label"), neg)

    def expect_value(self):
        if self.at("name", "consistent") or self.at("name", "inconsistent"):
            return self.advance().text
        v = self.arith()
        if abs(v.imag) == 0.0:
            return float(v.real)
        return v

    # -- states --------------------------------------------------------

    def atom_product(self, scope) -> tuple:
        atoms = [self.simple_atom(scope)]
        while self.accept("tensor"):
            atoms.append(self.simple_atom(scope))
        return tuple(atoms)

    def simple_atom(self, scope):
        tok = self.tok
        if self.at("ket"):
            self.advance()
            try:
                return self.b.resolve_ket(tok.text.split(","), scope)
            except HistqError as e:
                raise _located(e, tok) from None
        if self.at("name") and tok.text not in ("i", "sqrt"):
            self.advance()
            if tok.text not in self.b.states:
                raise UnknownReference(f"unknown state {tok.text!r}", tok.line, tok.col)
            return StateRef(tok.text)
        raise self.error("expected a ket or a state name")

    def sexpr(self, scope) -> LocalState:
        sign = 1.0
        if self.accept("sym", "-"):
            sign = -1.0
        else:
            self.accept("sym", "+")
        out = self.term(scope, sign)
        while self.at("sym", "+") or self.at("sym", "-"):
            op = self.advance()
            tok = self.tok
            t = self.term(scope, 1.0 if op.text == "+" else -1.0)
            try:
                out = out + t
            except HistqError as e:
                raise _located(e, tok) from None
        return out

    def term(self, scope, sign: complex) -> LocalState:
        coeff = sign
        if self.starts_coeff():
            coeff = coeff * self.coeff()
            self.accept("sym", "*")
        state = self.product(scope)
        while self.accept("sym", "/"):
            tok = self.tok
            d = self.cfactor()
            if d == 0:
                raise ScenarioSyntaxError("division by zero", tok.line, tok.col)
            coeff = coeff / d
        return coeff * state

    def product(self, scope) -> LocalState:
        out = self.atom(scope)
        while self.accept("tensor"):
            nxt = self.tok
            rhs = self.atom(scope)
            try:
                out = out.otimes(rhs)
            except HistqError as e:
                raise _located(e, nxt) from None
        return out

    def atom(self, scope) -> LocalState:
        if self.at("sym", "("):
            self.advance()
            s = self.sexpr(scope)
            self.expect("sym", ")")
            return s
        tok = self.tok
        ref = self.simple_atom(scope)
        try:
            return self.b.atom_state(ref)
        except HistqError as e:
            raise _located(e, tok) from None

    def _paren_is_state(self, k: int) -> bool:
        # scan the group opened at token index k for anything state-like
        depth = 0
        for t in self.toks[k:]:
            if t.is_("sym") and t.text in "([":
                depth += 1
            elif t.is_("sym") and t.text in ")]":
                depth -= 1
                if depth == 0:
                    return False
            elif t.kind in ("ket", "bra", "tensor"):
                return True
            elif t.kind == "name" and t.text not in ("i", "sqrt"):
                return True
        return False

    def starts_coeff(self) -> bool:
        t = self.tok
        if t.kind == "number" or t.is_("name", "i") or t.is_("name", "sqrt"):
            return True
        if t.is_("sym", "-"):
            return True
        if t.is_("sym", "("):
            return not self._paren_is_state(self.i)
        return False

    def coeff(self) -> complex:
        v = self.cfactor()
        while True:
            if self.at("sym", "/"):
                self.advance()
                v = v / self.cfactor()
            elif self.at("sym", "*"):
                save = self.i
                self.advance()
                if self.starts_coeff() and not self.at("sym", "-"):
                    v = v * self.cfactor()
                else:
                    self.i = save
                    return v
            else:
                return v

    def cfactor(self) -> complex:
        if self.accept("sym", "-"):
            return -self.cfactor()
        if self.accept("sym", "+"):
            return self.cfactor()
        t = self.tok
        if self.accept("number"):
            return complex(float(t.text))
        if self.accept("name", "i"):
            return 1j
        if self.accept("name", "sqrt"):
            self.expect("sym", "(")
            v = self.arith()
            self.expect("sym", ")")
            if v.imag == 0.0 and v.real >= 0.0:
                return complex(v.real ** 0.5)
            return cmath.sqrt(v)
        if self.accept("sym", "("):
            v = self.arith()
            self.expect("sym", ")")
            return v
        raise self.error("expected a number")

    def arith(self) -> complex:
        v = self.aterm()
        while self.at("sym", "+") or self.at("sym", "-"):
            op = self.advance().text
            r = self.aterm()
            v = v + r if op == "+" else v - r
        return v

    def aterm(self) -> complex:
        v = self.cfactor()
        while self.at("sym", "*") or self.at("sym", "/"):
            op = self.advance()
            r = self.cfactor()
            if op.text == "*":
                v = v * r
            elif r == 0:
                raise ScenarioSyntaxError("division by zero", op.line, op.col)
            else:
                v = v / r
        return v


def parse_scenario(text: str, name: str = "scenario", rng=None) -> ScenarioModel:
    """Parse ``.hq`` source into a validated :class:`ScenarioModel`.

    ``rng`` randomizes the completion of every interval isometry.
    """
    return Parser(text, ScenarioBuilder(name, rng=rng)).parse()


def parse_query(text: str, model: ScenarioModel) -> Query:
    """Parse a query body such as ``"prob F : a@t1 & b@t2"`` against a model."""
    b = ScenarioBuilder(model.name)
    b._space = model.space
    b._times = list(model.grid.times)
    b._times_declared = True
    b.states = dict(model.states)
    b.contexts = dict(model.contexts)
    b.families = dict(model.families)
    b.family_decls = dict(model.family_decls)
    p = Parser(text, b)
    start = p.tok
    try:
        q = p.query_body()
        if not (p.at("eof") or p.at("newline")):
            raise p.error("unexpected text after query")
        b.add_query(q)
    except ScenarioSyntaxError:
        raise
    except HistqError as e:
        raise _located(e, start) from None
    return q
