"""Formula AST, concrete grammar, renderer and well-formedness checks.

Grammar (EBNF)::

    formula  := iff
    iff      := imp ["<->" iff]
    imp      := or ["->" imp]
    or       := and ("|" and)*
    and      := unary ("&" unary)*
    unary    := "!" unary | fo_quant | gen_quant | atom
    fo_quant := ("exists" | "forall") VAR "." (group | formula)
    gen_quant:= "Q" VAR "." unary
              | "E>=" INT VAR "." unary
              | "W" VAR VAR "." unary
              | "QK[" NAME "]" VAR+ "." unary
              | ("I" | "J") VAR VAR "." group group
    group    := "(" formula ")"
    atom     := group | "true" | "false"
              | "And{" formula ("," formula)* "}" | "Or{" formula ("," formula)* "}"
              | NAME "(" [VAR ("," VAR)*] ")" | VAR "=" VAR

``exists``/``forall`` bind weakest: the body runs as far right as possible,
except that a body opening with a parenthesised group is exactly that group
(``forall x.(A) -> B`` is ``(forall x.(A)) -> B``).  The generalized
quantifiers take a unary-level body, so ``Q x. P(x) -> Q x. R(x)`` is an
implication between two quantified formulas.  ``Q`` is the schematic
quantifier whose threshold is supplied at evaluation time.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

from .errors import FmtError
from .structures import Vocabulary


def _node(cls):
    cls = dataclass(frozen=True, eq=False)(cls)
    names = tuple(f.name for f in dataclasses.fields(cls))

    def key(self):
        return tuple(getattr(self, n) for n in names)

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((cls.__name__,) + key(self))
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not cls or hash(self) != hash(other):
            return False
        return key(self) == key(other)

    cls.__hash__ = __hash__
    cls.__eq__ = __eq__
    cls.__str__ = lambda self: render(self)
    return cls


class Formula:
    """Base class of every AST node."""

    __slots__ = ()


@_node
class Rel(Formula):
    symbol: str
    args: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@_node
class Equal(Formula):
    left: str
    right: str


@_node
class Verum(Formula):
    pass


@_node
class Falsum(Formula):
    pass


@_node
class Not(Formula):
    body: Formula


@_node
class And(Formula):
    left: Formula
    right: Formula


@_node
class Or(Formula):
    left: Formula
    right: Formula


@_node
class Implies(Formula):
    left: Formula
    right: Formula


@_node
class Iff(Formula):
    left: Formula
    right: Formula


@_node
class BigAnd(Formula):
    items: tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise ValueError("BigAnd needs at least one conjunct")


@_node
class BigOr(Formula):
    items: tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise ValueError("BigOr needs at least one disjunct")


@_node
class Exists(Formula):
    var: str
    body: Formula


@_node
class Forall(Formula):
    var: str
    body: Formula


@_node
class CountAtLeast(Formula):
    """At least ``k`` elements satisfy ``body``; ``k=None`` is the schematic ``Q``."""

    k: int | None
    var: str
    body: Formula

    def __post_init__(self):
        if self.k is not None and self.k < 1:
            raise ValueError("counting threshold must be positive")


@_node
class Hartig(Formula):
    x: str
    y: str
    left: Formula
    right: Formula


@_node
class Rescher(Formula):
    x: str
    y: str
    left: Formula
    right: Formula


@_node
class WellOrder(Formula):
    x: str
    y: str
    body: Formula


@_node
class OracleQ(Formula):
    name: str
    vars: tuple[str, ...]
    body: Formula

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        if not self.vars:
            raise ValueError("oracle quantifier binds at least one variable")


TRUE = Verum()
FALSE = Falsum()

BINARY = (And, Or, Implies, Iff)
FO_QUANTIFIERS = (Exists, Forall)
GEN_QUANTIFIERS = (CountAtLeast, Hartig, Rescher, WellOrder, OracleQ)


def Q(var: str, body: Formula) -> CountAtLeast:
    return CountAtLeast(None, var, body)


def conj(items: Iterable[Formula]) -> Formula:
    """Conjunction with the empty-conjunction-is-true convention."""
    items = tuple(items)
    if not items:
        return TRUE
    return items[0] if len(items) == 1 else BigAnd(items)


def disj(items: Iterable[Formula]) -> Formula:
    """Disjunction with the empty-disjunction-is-false convention."""
    items = tuple(items)
    if not items:
        return FALSE
    return items[0] if len(items) == 1 else BigOr(items)


def children(phi: Formula) -> tuple[Formula, ...]:
    if isinstance(phi, (Not, Exists, Forall, CountAtLeast, WellOrder, OracleQ)):
        return (phi.body,)
    if isinstance(phi, (And, Or, Implies, Iff, Hartig, Rescher)):
        return (phi.left, phi.right)
    if isinstance(phi, (BigAnd, BigOr)):
        return phi.items
    return ()


def subformulas(phi: Formula) -> Iterator[Formula]:
    seen = set()
    stack = [phi]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        yield node
        stack.extend(children(node))


def bound_by(phi: Formula) -> dict[int, tuple[str, ...]]:
    """Variables bound for each child index of a quantifier node."""
    if isinstance(phi, (Exists, Forall, CountAtLeast)):
        return {0: (phi.var,)}
    if isinstance(phi, (Hartig, Rescher)):
        return {0: (phi.x,), 1: (phi.y,)}
    if isinstance(phi, WellOrder):
        return {0: (phi.x, phi.y)}
    if isinstance(phi, OracleQ):
        return {0: phi.vars}
    return {}


@lru_cache(maxsize=None)
def free_vars(phi: Formula) -> frozenset[str]:
    if isinstance(phi, Rel):
        return frozenset(phi.args)
    if isinstance(phi, Equal):
        return frozenset((phi.left, phi.right))
    bound = bound_by(phi)
    out = set()
    for i, child in enumerate(children(phi)):
        out |= free_vars(child) - set(bound.get(i, ()))
    return frozenset(out)


def relation_symbols(phi: Formula) -> dict[str, set[int]]:
    out: dict[str, set[int]] = {}
    for node in subformulas(phi):
        if isinstance(node, Rel):
            out.setdefault(node.symbol, set()).add(len(node.args))
    return out


def vocabulary_of(phi: Formula) -> Vocabulary:
    """The relation symbols of ``phi`` with their arities, in sorted name order."""
    pairs = []
    for name, arities in sorted(relation_symbols(phi).items()):
        if len(arities) != 1:
            raise FmtError(f"symbol {name} used with arities {sorted(arities)}")
        pairs.append((name, arities.pop()))
    return Vocabulary(tuple(pairs))


def oracle_names(phi: Formula) -> set[str]:
    return {node.name for node in subformulas(phi) if isinstance(node, OracleQ)}


def node_kinds(phi: Formula) -> set[str]:
    return {type(node).__name__ for node in subformulas(phi)}


def rebuild(phi: Formula, kids: tuple[Formula, ...]) -> Formula:
    if isinstance(phi, (BigAnd, BigOr)):
        return type(phi)(kids)
    if isinstance(phi, (And, Or, Implies, Iff)):
        return type(phi)(*kids)
    if isinstance(phi, Hartig | Rescher):
        return type(phi)(phi.x, phi.y, *kids)
    if isinstance(phi, Not):
        return Not(kids[0])
    return dataclasses.replace(phi, body=kids[0])


def substitute(phi: Formula, x: str, y: str) -> Formula:
    """Replace the free occurrences of variable ``x`` by ``y`` (no renaming of binders)."""
    if x == y or x not in free_vars(phi):
        return phi
    if isinstance(phi, Rel):
        return Rel(phi.symbol, tuple(y if a == x else a for a in phi.args))
    if isinstance(phi, Equal):
        return Equal(y if phi.left == x else phi.left, y if phi.right == x else phi.right)
    bound = bound_by(phi)
    kids = tuple(
        child if x in bound.get(i, ()) else substitute(child, x, y) for i, child in enumerate(children(phi))
    )
    return rebuild(phi, kids)


def free_for(phi: Formula, x: str, y: str) -> bool:
    """True iff no free occurrence of ``x`` in ``phi`` lies in the scope of a binder of ``y``."""
    if x == y or x not in free_vars(phi):
        return True
    bound = bound_by(phi)
    for i, child in enumerate(children(phi)):
        binders = bound.get(i, ())
        if x in binders or x not in free_vars(child):
            continue
        if y in binders:
            return False
        if not free_for(child, x, y):
            return False
    return True


def universal_closure(phi: Formula) -> Formula:
    for v in sorted(free_vars(phi), reverse=True):
        phi = Forall(v, phi)
    return phi


# ---------------------------------------------------------------------------
# parsing


class ParseError(FmtError, ValueError):
    def __init__(self, line: int, column: int, expected: str, found: str):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(f"line {line}, column {column}: expected {expected}, found {found!r}")


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<ge>E>=)
  | (?P<qk>QK\[)
  | (?P<op><->|->|[!&|().,={}\]])
  | (?P<int>\d+)
  | (?P<name>\$?[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_BINARY_TOKENS = {"&", "|", "->", "<->"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(line, pos - line_start + 1, "a token", text[pos])
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = pos + chunk.rfind("\n") + 1
        else:
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, expected: str):
        t = self.tok
        raise ParseError(t.line, t.col, expected, t.text or "end of input")

    def accept(self, text: str) -> bool:
        if self.tok.kind != "name" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.fail(repr(text))

    def var(self) -> str:
        if self.tok.kind != "name":
            self.fail("a variable")
        v = self.tok.text
        self.i += 1
        return v

    def parse(self) -> Formula:
        phi = self.formula()
        if self.tok.kind != "eof":
            self.fail("end of input")
        return phi

    def formula(self) -> Formula:
        left = self.imp()
        if self.accept("<->"):
            return Iff(left, self.formula())
        return left

    def imp(self) -> Formula:
        left = self.disj()
        if self.accept("->"):
            return Implies(left, self.imp())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.accept("|"):
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.unary()
        while self.accept("&"):
            left = And(left, self.unary())
        return left

    def _is_quantifier_keyword(self, words) -> bool:
        return self.tok.kind == "name" and self.tok.text in words and self.peek().kind == "name"

    def unary(self) -> Formula:
        if self.accept("!"):
            return Not(self.unary())
        t = self.tok
        if self._is_quantifier_keyword(("exists", "forall")):
            self.i += 1
            v = self.var()
            self.expect(".")
            if self.tok.text == "(" and self.tok.kind == "op":
                body = self.group()
            else:
                body = self.formula()
            return (Exists if t.text == "exists" else Forall)(v, body)
        if t.kind == "ge":
            self.i += 1
            if self.tok.kind != "int":
                self.fail("an integer threshold")
            k = int(self.tok.text)
            if k < 1:
                self.fail("a positive threshold")
            self.i += 1
            v = self.var()
            self.expect(".")
            return CountAtLeast(k, v, self.unary())
        if self._is_quantifier_keyword(("Q",)):
            self.i += 1
            v = self.var()
            self.expect(".")
            return CountAtLeast(None, v, self.unary())
        if self._is_quantifier_keyword(("I", "J", "W")):
            self.i += 1
            x = self.var()
            y = self.var()
            self.expect(".")
            if t.text == "W":
                return WellOrder(x, y, self.unary())
            left = self.group()
            right = self.group()
            return (Hartig if t.text == "I" else Rescher)(x, y, left, right)
        if t.kind == "qk":
            self.i += 1
            if self.tok.kind != "name":
                self.fail("a class name")
            name = self.tok.text
            self.i += 1
            self.expect("]")
            vs = [self.var()]
            while self.tok.kind == "name":
                vs.append(self.var())
            self.expect(".")
            return OracleQ(name, tuple(vs), self.unary())
        return self.atom()

    def group(self) -> Formula:
        self.expect("(")
        phi = self.formula()
        self.expect(")")
        return phi

    def atom(self) -> Formula:
        t = self.tok
        if t.kind == "op" and t.text == "(":
            return self.group()
        if t.kind != "name":
            self.fail("a formula")
        nxt = self.peek()
        if t.text in ("And", "Or") and nxt.text == "{":
            self.i += 2
            items = [self.formula()]
            while self.accept(","):
                items.append(self.formula())
            self.expect("}")
            return (BigAnd if t.text == "And" else BigOr)(tuple(items))
        if nxt.kind == "op" and nxt.text == "(":
            self.i += 2
            args = []
            if not self.accept(")"):
                args.append(self.var())
                while self.accept(","):
                    args.append(self.var())
                self.expect(")")
            return Rel(t.text, tuple(args))
        if nxt.kind == "op" and nxt.text == "=":
            self.i += 2
            return Equal(t.text, self.var())
        if t.text == "true":
            self.i += 1
            return TRUE
        if t.text == "false":
            self.i += 1
            return FALSE
        self.fail("a formula")


def parse(text: str) -> Formula:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# rendering

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4}
_OPS = {Iff: "<->", Implies: "->", Or: "|", And: "&"}
_UNARY_PREC = 5


def _prec(phi: Formula) -> int:
    return _PREC.get(type(phi), _UNARY_PREC)


def _open_ended(phi: Formula) -> bool:
    """Whether text placed after ``render(phi)`` would be absorbed into it."""
    if isinstance(phi, FO_QUANTIFIERS):
        return not isinstance(phi.body, BINARY)
    if isinstance(phi, (CountAtLeast, WellOrder, OracleQ)):
        return not isinstance(phi.body, BINARY) and _open_ended(phi.body)
    if isinstance(phi, Not):
        return _open_ended(phi.body)
    if isinstance(phi, BINARY):
        return not _right_needs_parens(phi) and _open_ended(phi.right)
    return False


def _right_needs_parens(phi) -> bool:
    p, r = _PREC[type(phi)], _prec(phi.right)
    return r < p or (r == p and isinstance(phi, (And, Or)))


def _left_needs_parens(phi) -> bool:
    p, l = _PREC[type(phi)], _prec(phi.left)
    return l < p or (l == p and isinstance(phi, (Implies, Iff))) or _open_ended(phi.left)


def _wrap(text: str, cond: bool) -> str:
    return f"({text})" if cond else text


def _body(phi: Formula) -> str:
    return _wrap(render(phi), isinstance(phi, BINARY))


def render(phi: Formula) -> str:
    if isinstance(phi, Rel):
        return f"{phi.symbol}({','.join(phi.args)})"
    if isinstance(phi, Equal):
        return f"{phi.left} = {phi.right}"
    if isinstance(phi, Verum):
        return "true"
    if isinstance(phi, Falsum):
        return "false"
    if isinstance(phi, Not):
        return "!" + _wrap(render(phi.body), _prec(phi.body) < _UNARY_PREC)
    if isinstance(phi, BINARY):
        left = _wrap(render(phi.left), _left_needs_parens(phi))
        right = _wrap(render(phi.right), _right_needs_parens(phi))
        return f"{left} {_OPS[type(phi)]} {right}"
    if isinstance(phi, BigAnd):
        return "And{" + ", ".join(render(i) for i in phi.items) + "}"
    if isinstance(phi, BigOr):
        return "Or{" + ", ".join(render(i) for i in phi.items) + "}"
    if isinstance(phi, Exists):
        return f"exists {phi.var}. {_body(phi.body)}"
    if isinstance(phi, Forall):
        return f"forall {phi.var}. {_body(phi.body)}"
    if isinstance(phi, CountAtLeast):
        head = "Q" if phi.k is None else f"E>={phi.k}"
        return f"{head} {phi.var}. {_body(phi.body)}"
    if isinstance(phi, (Hartig, Rescher)):
        head = "I" if isinstance(phi, Hartig) else "J"
        return f"{head} {phi.x} {phi.y}. ({render(phi.left)}) ({render(phi.right)})"
    if isinstance(phi, WellOrder):
        return f"W {phi.x} {phi.y}. {_body(phi.body)}"
    if isinstance(phi, OracleQ):
        return f"QK[{phi.name}] {' '.join(phi.vars)}. {_body(phi.body)}"
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# well-formedness


@dataclass(frozen=True)
class Violation:
    node: Formula
    message: str

    def __str__(self):
        return f"{self.message}: {render(self.node)}"


def check_wf(
    phi: Formula,
    vocabulary: Vocabulary,
    free: Iterable[str] = (),
    oracles: Mapping[str, int] | None = None,
) -> list[Violation]:
    """List every well-formedness violation of ``phi`` against ``vocabulary``.

    ``free`` declares the variables allowed to occur free (sentence mode when
    empty).  ``oracles`` maps class names to the arity of their distinguished
    relation; when given, oracle quantifiers are checked against it.
    """
    out: list[Violation] = []
    seen = set()
    for node in subformulas(phi):
        if isinstance(node, Rel):
            if node.symbol not in vocabulary:
                out.append(Violation(node, f"unknown relation symbol {node.symbol}"))
            elif vocabulary.arity(node.symbol) != len(node.args):
                out.append(
                    Violation(
                        node,
                        f"{node.symbol} has arity {vocabulary.arity(node.symbol)} but is applied to {len(node.args)} arguments",
                    )
                )
        elif isinstance(node, WellOrder) and node.x == node.y:
            out.append(Violation(node, "well-order quantifier needs two distinct variables"))
        elif isinstance(node, OracleQ):
            if len(set(node.vars)) != len(node.vars):
                out.append(Violation(node, "oracle quantifier binds a variable twice"))
            if oracles is not None:
                if node.name not in oracles:
                    out.append(Violation(node, f"unknown class {node.name}"))
                elif oracles[node.name] != len(node.vars):
                    out.append(
                        Violation(node, f"class {node.name} needs {oracles[node.name]} variables, got {len(node.vars)}")
                    )
    for v in sorted(free_vars(phi) - set(free)):
        if v not in seen:
            seen.add(v)
            out.append(Violation(phi, f"variable {v} occurs free"))
    return out
