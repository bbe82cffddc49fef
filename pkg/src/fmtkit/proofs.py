"""Hilbert-style proofs for first-order logic with the schematic quantifier ``Q``.

Axioms
------
Keisler axioms (``Q`` is the schematic quantifier)::

    ax1   !Q x. (x = y | x = z)                          x not in {y, z}
    ax2   forall x. (phi -> psi) -> (Q x. phi -> Q x. psi)
    ax3   Q x. phi -> Q y. phi[x := y]                    y != x, y free for x in phi and not free in phi
    ax4   Q y. exists x. phi -> (exists x. Q y. phi) | Q x. exists y. phi     x != y

First-order group (``ax0 <id>``)::

    taut      any propositional tautology (truth table over prime subformulas)
    all-elim  forall x. phi -> phi[x := t]                t free for x in phi
    all-dist  forall x. (phi -> psi) -> (forall x. phi -> forall x. psi)
    vac-gen   phi -> forall x. phi                        x not free in phi
    eq-refl   x = x
    eq-subst  x = y -> (phi -> phi2)                      phi atomic, phi2 is phi with some x replaced by y
    ex-def    (exists x. phi) <-> !forall x. !phi

Rules: modus ponens (``mp i j``, the two cited lines in either order) and
generalization (``gen i x``, allowed when ``x`` is free in no declared premise).

Proof files
-----------
::

    # comment
    premise: <formula>
    <n>. <formula> ; <justification>

with justification one of ``premise <i>``, ``ax0 <id> [subst]``,
``ax<1-4> [subst]``, ``mp <i> <j>``, ``gen <i> <var>``.  Premises and lines
are numbered from 1.  A substitution is ``[name := value; ...]``: ``phi``,
``psi`` and ``phi2`` take formulas, ``x``, ``y``, ``z`` and ``t`` take
variables.  Unbound variable metavariables default to themselves; when the
brackets are omitted the checker finds the substitution itself.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EnumerationLimitError, FmtError
from .evaluator import CountThreshold, Env, eval_batch
from .structures import DEFAULT_BUDGET, Structure, Vocabulary, enumerate_batches
from .syntax import (
    And,
    BigAnd,
    BigOr,
    CountAtLeast,
    Equal,
    Exists,
    Falsum,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    ParseError,
    Q,
    Rel,
    Verum,
    free_for,
    free_vars,
    parse,
    render,
    substitute,
    universal_closure,
)

FORMULA_METAVARS = ("phi", "psi", "phi2")
VARIABLE_METAVARS = ("x", "y", "z", "t")
AX0_SCHEMAS = ("taut", "all-elim", "all-dist", "vac-gen", "eq-refl", "eq-subst", "ex-def")
MAX_PRIMES = 16


class SchemaError(FmtError):
    """An instantiation violates a schema's side condition."""


# ---------------------------------------------------------------------------
# justifications


@dataclass(frozen=True)
class Premise:
    index: int


@dataclass(frozen=True)
class FOAxiom:
    schema: str
    subst: Mapping | None = None


@dataclass(frozen=True)
class KeislerAxiom:
    index: int
    subst: Mapping | None = None


@dataclass(frozen=True)
class ModusPonens:
    i: int
    j: int


@dataclass(frozen=True)
class Generalization:
    i: int
    var: str


Justification = Premise | FOAxiom | KeislerAxiom | ModusPonens | Generalization


@dataclass(frozen=True)
class ProofLine:
    formula: Formula
    justification: Justification


@dataclass(frozen=True)
class Proof:
    premises: tuple[Formula, ...]
    lines: tuple[ProofLine, ...]

    @property
    def conclusion(self) -> Formula:
        return self.lines[-1].formula


@dataclass(frozen=True)
class ProofVerdict:
    accepted: bool
    line: int | None = None  # 1-based
    reason: str = ""

    def __bool__(self):
        return self.accepted

    def __str__(self):
        return "ACCEPT" if self.accepted else f"REJECT at line {self.line}: {self.reason}"


# ---------------------------------------------------------------------------
# Keisler schemata


def _var(subst: Mapping, name: str) -> str:
    return subst.get(name, name)


def _formula(subst: Mapping, name: str) -> Formula:
    if name not in subst:
        raise SchemaError(f"substitution must bind {name}")
    return subst[name]


def instantiate_keisler(index: int, subst: Mapping) -> Formula:
    if index == 1:
        x, y, z = (_var(subst, v) for v in "xyz")
        if x in (y, z):
            raise SchemaError("ax1 needs x distinct from y and z")
        return Not(Q(x, Or(Equal(x, y), Equal(x, z))))
    if index == 2:
        x, phi, psi = _var(subst, "x"), _formula(subst, "phi"), _formula(subst, "psi")
        return Implies(Forall(x, Implies(phi, psi)), Implies(Q(x, phi), Q(x, psi)))
    if index == 3:
        x, y, phi = _var(subst, "x"), _var(subst, "y"), _formula(subst, "phi")
        if x == y:
            raise SchemaError("ax3 needs distinct x and y (the trivial case is a tautology)")
        if not free_for(phi, x, y):
            raise SchemaError(f"{y} is not free for {x} in {render(phi)}")
        if y in free_vars(phi):
            raise SchemaError(f"{y} already occurs free in {render(phi)}")
        return Implies(Q(x, phi), Q(y, substitute(phi, x, y)))
    if index == 4:
        x, y, phi = _var(subst, "x"), _var(subst, "y"), _formula(subst, "phi")
        if x == y:
            raise SchemaError("ax4 needs distinct x and y")
        return Implies(Q(y, Exists(x, phi)), Or(Exists(x, Q(y, phi)), Q(x, Exists(y, phi))))
    raise SchemaError(f"no Keisler axiom {index}")


def _is_q(phi) -> bool:
    return isinstance(phi, CountAtLeast) and phi.k is None


def _match_keisler(index: int, phi: Formula) -> dict | None:
    """Substitution under which ``phi`` is an instance of the given axiom, or ``None``."""
    try:
        if index == 1:
            if isinstance(phi, Not) and _is_q(phi.body) and isinstance(phi.body.body, Or):
                x = phi.body.var
                a, b = phi.body.body.left, phi.body.body.right
                if isinstance(a, Equal) and isinstance(b, Equal) and a.left == x and b.left == x:
                    subst = {"x": x, "y": a.right, "z": b.right}
                    if instantiate_keisler(1, subst) == phi:
                        return subst
            return None
        if not isinstance(phi, Implies):
            return None
        if index == 2:
            l, r = phi.left, phi.right
            if isinstance(l, Forall) and isinstance(l.body, Implies) and isinstance(r, Implies) and _is_q(r.left):
                subst = {"x": l.var, "phi": l.body.left, "psi": l.body.right}
                if instantiate_keisler(2, subst) == phi:
                    return subst
            return None
        if index == 3:
            if _is_q(phi.left) and _is_q(phi.right):
                subst = {"x": phi.left.var, "y": phi.right.var, "phi": phi.left.body}
                if instantiate_keisler(3, subst) == phi:
                    return subst
            return None
        if index == 4:
            l = phi.left
            if _is_q(l) and isinstance(l.body, Exists):
                subst = {"x": l.body.var, "y": l.var, "phi": l.body.body}
                if instantiate_keisler(4, subst) == phi:
                    return subst
            return None
    except SchemaError:
        return None
    return None


def _public(subst: dict) -> dict:
    # identity bindings of variable metavariables are implicit
    return {k: v for k, v in subst.items() if not (k in VARIABLE_METAVARS and v == k)}


def is_axiom_instance(phi: Formula) -> tuple[int, dict] | None:
    """First Keisler axiom (1..4) that ``phi`` instantiates, with its substitution."""
    for index in (1, 2, 3, 4):
        subst = _match_keisler(index, phi)
        if subst is not None:
            return index, _public(subst)
    return None


# ---------------------------------------------------------------------------
# first-order group


def _primes(phi: Formula, out: dict):
    if isinstance(phi, Not):
        _primes(phi.body, out)
    elif isinstance(phi, (And, Or, Implies, Iff)):
        _primes(phi.left, out)
        _primes(phi.right, out)
    elif isinstance(phi, (BigAnd, BigOr)):
        for item in phi.items:
            _primes(item, out)
    elif not isinstance(phi, (Verum, Falsum)):
        out.setdefault(phi, len(out))


def _truth(phi: Formula, row: Mapping[Formula, bool]) -> bool:
    if isinstance(phi, Verum):
        return True
    if isinstance(phi, Falsum):
        return False
    if isinstance(phi, Not):
        return not _truth(phi.body, row)
    if isinstance(phi, And):
        return _truth(phi.left, row) and _truth(phi.right, row)
    if isinstance(phi, Or):
        return _truth(phi.left, row) or _truth(phi.right, row)
    if isinstance(phi, Implies):
        return (not _truth(phi.left, row)) or _truth(phi.right, row)
    if isinstance(phi, Iff):
        return _truth(phi.left, row) == _truth(phi.right, row)
    if isinstance(phi, BigAnd):
        return all(_truth(i, row) for i in phi.items)
    if isinstance(phi, BigOr):
        return any(_truth(i, row) for i in phi.items)
    return row[phi]


def is_tautology(phi: Formula) -> bool:
    """Propositional validity, treating atoms and quantified subformulas as letters."""
    primes: dict = {}
    _primes(phi, primes)
    if len(primes) > MAX_PRIMES:
        raise SchemaError(f"{len(primes)} prime subformulas exceed the truth-table limit {MAX_PRIMES}")
    letters = list(primes)
    for values in itertools.product((False, True), repeat=len(letters)):
        if not _truth(phi, dict(zip(letters, values))):
            return False
    return True


def _eq_subst_ok(phi: Formula, phi2: Formula, x: str, y: str) -> bool:
    if isinstance(phi, Rel) and isinstance(phi2, Rel):
        if phi.symbol != phi2.symbol or len(phi.args) != len(phi2.args):
            return False
        pairs = zip(phi.args, phi2.args)
    elif isinstance(phi, Equal) and isinstance(phi2, Equal):
        pairs = [(phi.left, phi2.left), (phi.right, phi2.right)]
    else:
        return False
    return all(a == b or (a == x and b == y) for a, b in pairs)


def instantiate_fo(schema: str, subst: Mapping) -> Formula:
    if schema == "all-elim":
        x, t, phi = _var(subst, "x"), _var(subst, "t"), _formula(subst, "phi")
        if not free_for(phi, x, t):
            raise SchemaError(f"{t} is not free for {x} in {render(phi)}")
        return Implies(Forall(x, phi), substitute(phi, x, t))
    if schema == "all-dist":
        x, phi, psi = _var(subst, "x"), _formula(subst, "phi"), _formula(subst, "psi")
        return Implies(Forall(x, Implies(phi, psi)), Implies(Forall(x, phi), Forall(x, psi)))
    if schema == "vac-gen":
        x, phi = _var(subst, "x"), _formula(subst, "phi")
        if x in free_vars(phi):
            raise SchemaError(f"{x} occurs free in {render(phi)}")
        return Implies(phi, Forall(x, phi))
    if schema == "eq-refl":
        x = _var(subst, "x")
        return Equal(x, x)
    if schema == "eq-subst":
        x, y = _var(subst, "x"), _var(subst, "y")
        phi, phi2 = _formula(subst, "phi"), _formula(subst, "phi2")
        if not _eq_subst_ok(phi, phi2, x, y):
            raise SchemaError(f"{render(phi2)} is not {render(phi)} with some {x} replaced by {y}")
        return Implies(Equal(x, y), Implies(phi, phi2))
    if schema == "ex-def":
        x, phi = _var(subst, "x"), _formula(subst, "phi")
        return Iff(Exists(x, phi), Not(Forall(x, Not(phi))))
    raise SchemaError(f"no first-order schema {schema!r}")


def _match_fo(schema: str, phi: Formula) -> dict | None:
    try:
        if schema == "taut":
            return {} if is_tautology(phi) else None
        if schema == "eq-refl":
            if isinstance(phi, Equal) and phi.left == phi.right:
                return {"x": phi.left}
            return None
        if schema == "ex-def":
            if isinstance(phi, Iff) and isinstance(phi.left, Exists):
                subst = {"x": phi.left.var, "phi": phi.left.body}
                return subst if instantiate_fo(schema, subst) == phi else None
            return None
        if not isinstance(phi, Implies):
            return None
        l, r = phi.left, phi.right
        if schema == "all-elim" and isinstance(l, Forall):
            x = l.var
            for t in sorted(free_vars(r) | {x}):
                subst = {"x": x, "t": t, "phi": l.body}
                try:
                    if instantiate_fo(schema, subst) == phi:
                        return subst
                except SchemaError:
                    continue
            return None
        if schema == "all-dist" and isinstance(l, Forall) and isinstance(l.body, Implies):
            subst = {"x": l.var, "phi": l.body.left, "psi": l.body.right}
            return subst if instantiate_fo(schema, subst) == phi else None
        if schema == "vac-gen" and isinstance(r, Forall):
            subst = {"x": r.var, "phi": l}
            return subst if instantiate_fo(schema, subst) == phi else None
        if schema == "eq-subst" and isinstance(l, Equal) and isinstance(r, Implies):
            subst = {"x": l.left, "y": l.right, "phi": r.left, "phi2": r.right}
            return subst if instantiate_fo(schema, subst) == phi else None
    except SchemaError:
        return None
    return None


def match_fo_axiom(phi: Formula) -> tuple[str, dict] | None:
    for schema in AX0_SCHEMAS:
        subst = _match_fo(schema, phi)
        if subst is not None:
            return schema, _public(subst)
    return None


# ---------------------------------------------------------------------------
# checking


def _check_axiom(phi: Formula, kind: str, subst: Mapping | None) -> str | None:
    """``None`` when ``phi`` is the claimed instance, otherwise the reason it is not."""
    try:
        if isinstance(kind, int):
            if subst is None:
                return None if _match_keisler(kind, phi) is not None else f"not an instance of ax{kind}"
            expected = instantiate_keisler(kind, subst)
        else:
            if kind not in AX0_SCHEMAS:
                return f"unknown schema ax0 {kind}"
            if kind == "taut":
                return None if is_tautology(phi) else "not a tautology"
            if subst is None:
                return None if _match_fo(kind, phi) is not None else f"not an instance of ax0 {kind}"
            expected = instantiate_fo(kind, subst)
    except SchemaError as exc:
        return str(exc)
    if expected != phi:
        return f"substitution yields {render(expected)}"
    return None


def check_proof(p: Proof) -> ProofVerdict:
    if not p.lines:
        return ProofVerdict(False, None, "empty proof")
    premise_vars = set()
    for prem in p.premises:
        premise_vars |= free_vars(prem)
    for num, line in enumerate(p.lines, start=1):
        j = line.justification
        phi = line.formula

        def cited(i):
            if not 1 <= i < num:
                return None
            return p.lines[i - 1].formula

        if isinstance(j, Premise):
            if not 1 <= j.index <= len(p.premises):
                return ProofVerdict(False, num, f"no premise {j.index}")
            if p.premises[j.index - 1] != phi:
                return ProofVerdict(False, num, f"premise {j.index} is {render(p.premises[j.index - 1])}")
        elif isinstance(j, KeislerAxiom):
            reason = _check_axiom(phi, j.index, j.subst)
            if reason:
                return ProofVerdict(False, num, reason)
        elif isinstance(j, FOAxiom):
            reason = _check_axiom(phi, j.schema, j.subst)
            if reason:
                return ProofVerdict(False, num, reason)
        elif isinstance(j, ModusPonens):
            a, b = cited(j.i), cited(j.j)
            if a is None or b is None:
                bad = j.i if a is None else j.j
                return ProofVerdict(False, num, f"line {bad} is not an earlier line")
            if not (
                (isinstance(b, Implies) and b.left == a and b.right == phi)
                or (isinstance(a, Implies) and a.left == b and a.right == phi)
            ):
                return ProofVerdict(False, num, f"lines {j.i} and {j.j} do not yield this formula by modus ponens")
        elif isinstance(j, Generalization):
            a = cited(j.i)
            if a is None:
                return ProofVerdict(False, num, f"line {j.i} is not an earlier line")
            if j.var in premise_vars:
                return ProofVerdict(False, num, f"{j.var} is free in a premise")
            if phi != Forall(j.var, a):
                return ProofVerdict(False, num, f"expected {render(Forall(j.var, a))}")
        else:
            return ProofVerdict(False, num, f"unknown justification {j!r}")
    return ProofVerdict(True)


def cited_axioms(p: Proof) -> list[Formula]:
    return [
        line.formula for line in p.lines if isinstance(line.justification, (FOAxiom, KeislerAxiom))
    ]


# ---------------------------------------------------------------------------
# proof files

_LINE_RE = re.compile(r"^\s*(\d+)\s*\.\s*(.*?)\s*;\s*(.*?)\s*$")


class ProofFormatError(FmtError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def _parse_subst(text: str, lineno: int) -> dict | None:
    text = text.strip()
    if not text:
        return None
    if not (text.startswith("[") and text.endswith("]")):
        raise ProofFormatError(lineno, f"expected a [substitution], found {text!r}")
    out = {}
    for part in text[1:-1].split(";"):
        if not part.strip():
            continue
        key, sep, value = part.partition(":=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ProofFormatError(lineno, f"binding without ':=': {part.strip()!r}")
        if key in FORMULA_METAVARS:
            try:
                out[key] = parse(value)
            except ParseError as exc:
                raise ProofFormatError(lineno, f"in {key}: {exc}") from None
        elif key in VARIABLE_METAVARS:
            if not re.fullmatch(r"[a-z][A-Za-z0-9_]*", value):
                raise ProofFormatError(lineno, f"{key} must be bound to a variable, got {value!r}")
            out[key] = value
        else:
            raise ProofFormatError(lineno, f"unknown metavariable {key!r}")
    return out


def _parse_justification(text: str, lineno: int) -> Justification:
    head, _, rest = text.strip().partition(" ")
    rest = rest.strip()
    try:
        if head == "premise":
            return Premise(int(rest))
        if head == "mp":
            i, j = rest.split()
            return ModusPonens(int(i), int(j))
        if head == "gen":
            i, v = rest.split()
            return Generalization(int(i), v)
    except ValueError:
        raise ProofFormatError(lineno, f"malformed justification {text!r}") from None
    if head == "ax0":
        schema, _, sub = rest.partition(" ")
        if schema not in AX0_SCHEMAS:
            raise ProofFormatError(lineno, f"unknown schema {schema!r}")
        return FOAxiom(schema, _parse_subst(sub, lineno))
    m = re.fullmatch(r"ax([1-4])", head)
    if m:
        return KeislerAxiom(int(m.group(1)), _parse_subst(rest, lineno))
    raise ProofFormatError(lineno, f"unknown justification {text!r}")


def parse_proof(text: str) -> Proof:
    premises, lines = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("premise:"):
            try:
                premises.append(parse(line[len("premise:"):]))
            except ParseError as exc:
                raise ProofFormatError(lineno, str(exc)) from None
            continue
        m = _LINE_RE.match(line)
        if not m:
            raise ProofFormatError(lineno, "expected '<n>. <formula> ; <justification>'")
        n, ftext, jtext = m.groups()
        if int(n) != len(lines) + 1:
            raise ProofFormatError(lineno, f"step numbered {n}, expected {len(lines) + 1}")
        try:
            phi = parse(ftext)
        except ParseError as exc:
            raise ProofFormatError(lineno, str(exc)) from None
        lines.append(ProofLine(phi, _parse_justification(jtext, lineno)))
    return Proof(tuple(premises), tuple(lines))


def _format_subst(subst: Mapping | None) -> str:
    if not subst:
        return ""
    parts = [f"{k} := {render(v) if isinstance(v, Formula) else v}" for k, v in subst.items()]
    return " [" + "; ".join(parts) + "]"


def format_proof(p: Proof) -> str:
    out = [f"premise: {render(f)}" for f in p.premises]
    for n, line in enumerate(p.lines, start=1):
        j = line.justification
        if isinstance(j, Premise):
            js = f"premise {j.index}"
        elif isinstance(j, FOAxiom):
            js = f"ax0 {j.schema}" + _format_subst(j.subst)
        elif isinstance(j, KeislerAxiom):
            js = f"ax{j.index}" + _format_subst(j.subst)
        elif isinstance(j, ModusPonens):
            js = f"mp {j.i} {j.j}"
        else:
            js = f"gen {j.i} {j.var}"
        out.append(f"{n}. {render(line.formula)} ; {js}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# soundness scan

SCAN_VOCABULARY = Vocabulary((("R", 2),))

# formulas in x (some also mention the parameter y)
UNARY_POOL = (
    "R(x,x)",
    "!R(x,x)",
    "R(x,y)",
    "R(y,x)",
    "x = y",
    "x = x",
    "exists y. R(x,y)",
    "exists y. R(y,x)",
    "forall y. R(x,y)",
    "R(x,y) & R(y,x)",
    "R(x,x) | x = y",
    "!R(x,y) -> R(y,x)",
)

# formulas in x and y for the two-variable schema
BINARY_POOL = (
    "R(x,y)",
    "R(y,x)",
    "!R(x,y)",
    "x = y",
    "!x = y",
    "R(x,y) | R(y,x)",
    "R(x,y) & !x = y",
    "R(x,x) & R(y,y)",
    "exists z. (R(x,z) & R(z,y))",
    "R(x,y) -> R(y,y)",
)


def axiom_instances(index: int, unary_pool: Sequence[str] = UNARY_POOL, binary_pool: Sequence[str] = BINARY_POOL):
    """The generated instances of one Keisler axiom, in a fixed order."""
    out = []
    if index == 1:
        for x, y, z in (("x", "y", "z"), ("x", "y", "y"), ("z", "x", "y")):
            out.append(instantiate_keisler(1, {"x": x, "y": y, "z": z}))
    elif index == 2:
        pool = [parse(t) for t in unary_pool]
        for phi in pool:
            for psi in pool:
                out.append(instantiate_keisler(2, {"x": "x", "phi": phi, "psi": psi}))
    elif index == 3:
        for phi in (parse(t) for t in unary_pool):
            for y in ("x", "y", "z", "w"):
                try:
                    out.append(instantiate_keisler(3, {"x": "x", "y": y, "phi": phi}))
                except SchemaError:
                    continue
    elif index == 4:
        for phi in (parse(t) for t in binary_pool):
            out.append(instantiate_keisler(4, {"x": "x", "y": "y", "phi": phi}))
    else:
        raise ValueError(f"no Keisler axiom {index}")
    return out


@dataclass(frozen=True)
class Counterexample:
    axiom: int
    instance: Formula
    structure: Structure


def soundness_scan(
    k: int,
    max_size: int,
    schemata: Iterable[int] = (1, 2, 3, 4),
    budget: int | None = DEFAULT_BUDGET,
    vocabulary: Vocabulary = SCAN_VOCABULARY,
    instances: Mapping[int, Sequence[Formula]] | None = None,
    limit: int | None = None,
) -> list[Counterexample]:
    """Every (instance, structure) where an axiom instance is false with ``Q`` read as "at least ``k``".

    Free variables of an instance are closed universally.  ``limit`` caps the
    number of structures reported per instance.
    """
    env = Env(q=CountThreshold(k))
    schemata = tuple(schemata)
    pools = {i: (instances[i] if instances and i in instances else axiom_instances(i)) for i in schemata}
    total = sum(len(pools[i]) for i in schemata) * sum(2 ** vocabulary.tuple_count(n) for n in range(1, max_size + 1))
    if budget is not None and total > budget:
        raise EnumerationLimitError(total, budget, "instance evaluations")
    out = []
    for i in schemata:
        for inst in pools[i]:
            closed = universal_closure(inst)
            found = 0
            for n in range(1, max_size + 1):
                for _, batch in enumerate_batches(vocabulary, n, None):
                    ok = eval_batch(batch, closed, env)
                    for idx in np.flatnonzero(~ok):
                        if limit is not None and found >= limit:
                            break
                        out.append(Counterexample(i, inst, batch.structure(int(idx))))
                        found += 1
    return out
