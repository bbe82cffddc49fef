"""Order-characterizing formulas, per-size defining sentences, and projection classes.

The auxiliary order symbol is ``$ord``.  User vocabularies may not contain it,
so a synthesized sentence can never capture one of the target's own symbols.

``eta(a)`` is the formula saying that exactly ``a`` elements precede ``x``
and they form an ordinal chain; ``eta_prime(a)`` says the whole order has
type ``a``.  Both are built literally from the recursion, with the empty
conjunction read as true and the empty disjunction as false, and share
subformulas so that a formula of index ``a`` has O(a^2) distinct nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import EnumerationLimitError, OracleConfigurationError, SizeCapError, VocabularyError
from .evaluator import ClassOracle, Env, eval_batch
from .structures import (
    CHUNK,
    DEFAULT_BUDGET,
    Bijection,
    Structure,
    StructureBatch,
    Vocabulary,
    all_tuples,
    canonical_code,
    enumerate_batches,
)
from .syntax import (
    And,
    Equal,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    Rel,
    check_wf,
    conj,
    disj,
    vocabulary_of,
)

ORDER = "$ord"
SIZE_CAP = 12


def _lt(a: str, b: str) -> Formula:
    return Rel(ORDER, (a, b))


def _check_index(a: int):
    if a < 0:
        raise ValueError("ordinal index must be non-negative")
    if a > SIZE_CAP:
        raise SizeCapError(f"index {a} exceeds the size cap {SIZE_CAP}")


@lru_cache(maxsize=None)
def _eta(a: int, var: str, other: str) -> Formula:
    below = [_eta(b, other, var) for b in range(a)]
    head = Forall(other, Implies(_lt(other, var), disj(below)))
    return conj([head] + [Exists(other, And(_lt(other, var), e)) for e in below])


def eta(a: int, var: str = "x", other: str = "y") -> Formula:
    """Scott formula for "the predecessors of ``var`` have order type ``a``"; ``other`` is the bound helper."""
    _check_index(a)
    if var == other:
        raise ValueError("eta needs two distinct variables")
    return _eta(a, var, other)


def eta_prime(a: int, var: str = "y", other: str = "x") -> Formula:
    """Sentence saying the order has type ``a`` (for linear orders)."""
    _check_index(a)
    below = [eta(b, var, other) for b in range(a)]
    return conj([Forall(var, disj(below))] + [Exists(var, e) for e in below])


def linear_order(symbol: str = ORDER) -> Formula:
    """Irreflexive, transitive and total."""
    lt = lambda a, b: Rel(symbol, (a, b))  # noqa: E731
    return conj(
        [
            Forall("x", Not(lt("x", "x"))),
            Forall("x", Forall("y", Forall("z", Implies(And(lt("x", "y"), lt("y", "z")), lt("x", "z"))))),
            Forall("x", Forall("y", Or(Or(lt("x", "y"), Equal("x", "y")), lt("y", "x")))),
        ]
    )


def _check_user_vocabulary(v: Vocabulary):
    if ORDER in v:
        raise VocabularyError(f"{ORDER} is reserved for the auxiliary order")


# ---------------------------------------------------------------------------
# characterizing sentences


@dataclass(frozen=True)
class CharacterizingSentence:
    """``formula`` pins down ``target`` among structures whose ``$ord`` has type ``|target|``."""

    target: Structure
    formula: Formula
    order_symbol: str = ORDER
    enumeration: Bijection | None = None

    @property
    def sentence(self) -> Formula:
        n = self.target.size
        return conj([linear_order(self.order_symbol), eta_prime(n), self.formula])


def _rho_block(symbol: str, arity: int, positive: frozenset, n: int, f: Bijection) -> Formula:
    xs = tuple(f"x{i}" for i in range(arity))
    if arity == 0:
        return Rel(symbol, ()) if () in positive else Not(Rel(symbol, ()))
    clauses = []
    for idx in all_tuples(n, arity):
        guard = conj([eta(a, x, "w") for a, x in zip(idx, xs)])
        atom = Rel(symbol, xs)
        rho = atom if tuple(f(a) for a in idx) in positive else Not(atom)
        clauses.append(Implies(guard, rho))
    body = conj(clauses)
    for x in reversed(xs):
        body = Forall(x, body)
    return body


def mcgee_phi(target: Structure, f: Bijection | None = None) -> CharacterizingSentence:
    """Conjunction over symbols ``R`` of ``∀x̄ ⋀_ᾱ (⋀_i η_{α_i}(x_i) → ρ_ᾱ(x̄))``.

    ``f`` enumerates the domain: position ``α`` in the order is element ``f(α)``.
    ``ρ_ᾱ`` is ``R(x̄)`` when ``R(f(α_1), ..., f(α_r))`` holds in ``target`` and its negation otherwise.
    """
    _check_user_vocabulary(target.vocabulary)
    n = target.size
    if n < 1:
        raise ValueError("target must be non-empty")
    _check_index(n)
    f = f or Bijection.identity(n)
    if f.size != n:
        raise ValueError(f"enumeration has size {f.size}, target has size {n}")
    blocks = [_rho_block(name, arity, target.relations[name], n, f) for name, arity in target.vocabulary]
    return CharacterizingSentence(target, conj(blocks), ORDER, f)


# ---------------------------------------------------------------------------
# projection classes


@dataclass(frozen=True)
class ProjectionDefinition:
    """A class of ``visible``-structures: those with some expansion to ``vocabulary`` satisfying ``sentence``.

    With ``mode="forall"`` every expansion must satisfy it instead.
    """

    vocabulary: Vocabulary
    visible: Vocabulary
    sentence: Formula
    mode: str = "exists"
    name: str = "d"

    def __post_init__(self):
        if not self.visible.issubset(self.vocabulary):
            raise VocabularyError("visible vocabulary must be a subset of the full vocabulary")
        if self.mode not in ("exists", "forall"):
            raise ValueError(f"unknown mode {self.mode!r}")
        bad = check_wf(self.sentence, self.vocabulary)
        if bad:
            raise VocabularyError("; ".join(str(b) for b in bad))

    @property
    def hidden(self) -> Vocabulary:
        return self.vocabulary.minus(self.visible)

    @classmethod
    def plain(cls, sentence: Formula, vocabulary: Vocabulary | None = None, name: str = "d"):
        v = vocabulary or vocabulary_of(sentence)
        return cls(v, v, sentence, "exists", name)


def _negated(phi: Formula) -> Formula:
    # keep a conjunction on top so the evaluator can filter conjunct by conjunct
    if isinstance(phi, Implies):
        return And(phi.left, Not(phi.right))
    return Not(phi)


def sigma_membership_batch(
    d: ProjectionDefinition,
    batch: StructureBatch,
    env: Env | None = None,
    budget: int | None = DEFAULT_BUDGET,
    chunk: int = CHUNK,
) -> np.ndarray:
    """Membership of every structure of ``batch`` (over ``d.visible``) by exhaustive expansion search."""
    if batch.vocabulary != d.visible:
        raise VocabularyError(f"structures are over {batch.vocabulary}, definition expects {d.visible}")
    hidden = d.hidden
    if not len(hidden):
        full = StructureBatch(d.vocabulary, batch.size, batch.arrays, len(batch))
        return eval_batch(full, d.sentence, env)
    target = d.sentence if d.mode == "exists" else _negated(d.sentence)
    n = batch.size
    total = len(batch) * 2 ** hidden.tuple_count(n)
    if budget is not None and total > budget:
        raise EnumerationLimitError(total, budget, "expansions")
    found = np.zeros(len(batch), dtype=bool)
    pending = np.arange(len(batch))
    step = max(1, chunk // max(1, len(batch)))
    for _, hb in enumerate_batches(hidden, n, None, step):
        if not len(pending):
            break
        vis = batch.take(pending)
        b, e = len(vis), len(hb)
        arrays = {}
        for name in d.visible.names:
            arr = vis.full(name)
            arrays[name] = np.repeat(arr, e, axis=0)
        for name in hidden.names:
            arr = hb.full(name)
            arrays[name] = np.tile(arr, (b,) + (1,) * (arr.ndim - 1))
        hits = eval_batch(StructureBatch(d.vocabulary, n, arrays, b * e), target, env)
        hit_rows = hits.reshape(b, e).any(axis=1)
        found[pending[hit_rows]] = True
        pending = pending[~hit_rows]
    return found if d.mode == "exists" else ~found


def sigma_membership(
    d: ProjectionDefinition, s: Structure, env: Env | None = None, budget: int | None = DEFAULT_BUDGET
) -> bool:
    batch = StructureBatch(s.vocabulary, s.size, s.arrays, 1)
    return bool(sigma_membership_batch(d, batch, env, budget)[0])


# ---------------------------------------------------------------------------
# per-size definitions


@dataclass(frozen=True)
class SizeDefinition:
    """Defining data for ``K`` restricted to size ``size``.

    ``positive`` and ``negative`` define ``K`` and its complement (a Δ-pair at
    this size); ``universal`` is the ∀-form of ``positive``.
    """

    size: int
    positive: ProjectionDefinition
    negative: ProjectionDefinition
    universal: ProjectionDefinition
    members: tuple[Structure, ...]
    non_members: tuple[Structure, ...]


def theta(representatives: Sequence[Structure], orbits: bool = True) -> Formula:
    """``⋁ Φ_A`` over the given structures (false when empty).

    With ``orbits`` each representative contributes one ``Φ`` per enumeration
    of its domain (duplicates dropped), so the disjunction covers every labeled
    copy.  The ∃-order form is already correct without this; the ∀-order form
    needs it.
    """
    out: dict[Formula, None] = {}
    for r in representatives:
        enums = Bijection.all(r.size) if orbits else [Bijection.identity(r.size)]
        for f in enums:
            out.setdefault(mcgee_phi(r, f).formula, None)
    return disj(list(out))


def representatives(K: ClassOracle, size: int, budget: int | None = DEFAULT_BUDGET):
    """Least-code representatives of the classes in and out of ``K``; checks isomorphism closure."""
    seen: dict[int, tuple[Structure, bool]] = {}
    for _, batch in enumerate_batches(K.vocabulary, size, budget):
        for i, code in enumerate(batch.canonical_codes()):
            s = batch.structure(i)
            member = K(s)
            rep = seen.setdefault(int(code), (s, member))
            if rep[1] != member:
                raise OracleConfigurationError(
                    f"class {K.name} separates isomorphic structures {rep[0]!r} and {s!r}"
                )
    members = tuple(s for code, (s, m) in sorted(seen.items()) if m)
    others = tuple(s for code, (s, m) in sorted(seen.items()) if not m)
    return members, others


def define_class_at_size(K: ClassOracle, size: int, budget: int | None = DEFAULT_BUDGET) -> SizeDefinition:
    _check_user_vocabulary(K.vocabulary)
    _check_index(size)
    if size < 1:
        raise ValueError("size must be positive")
    members, others = representatives(K, size, budget)
    full = K.vocabulary.union(Vocabulary(((ORDER, 2),)))
    frame = [linear_order(), eta_prime(size)]
    pos = ProjectionDefinition(full, K.vocabulary, conj(frame + [theta(members)]), "exists", f"{K.name}@{size}")
    neg = ProjectionDefinition(full, K.vocabulary, conj(frame + [theta(others)]), "exists", f"co-{K.name}@{size}")
    uni = ProjectionDefinition(
        full, K.vocabulary, Implies(conj(frame), theta(members)), "forall", f"{K.name}@{size}/forall"
    )
    return SizeDefinition(size, pos, neg, uni, members, others)


def codes_class(name: str, vocabulary: Vocabulary, canonical: Iterable[int], size: int | None = None) -> ClassOracle:
    """The isomorphism-closed class whose members have their canonical code in ``canonical``.

    When ``size`` is given the codes refer to that size only; other sizes are non-members.
    """
    codes = frozenset(int(c) for c in canonical)

    def member(s: Structure) -> bool:
        if size is not None and s.size != size:
            return False
        return canonical_code(s) in codes

    return ClassOracle(name, vocabulary, member)


# ---------------------------------------------------------------------------
# Δ certification


@dataclass(frozen=True)
class DeltaReport:
    certified: bool
    max_size: int
    checked: int
    violations: tuple[tuple[Structure, bool, bool], ...] = ()  # (structure, pos, neg)

    def __bool__(self):
        return self.certified


def delta_check(
    pos: ProjectionDefinition,
    neg: ProjectionDefinition,
    max_size: int,
    env: Env | None = None,
    budget: int | None = DEFAULT_BUDGET,
    limit: int | None = 100,
) -> DeltaReport:
    """Every structure of size ``≤ max_size`` must be accepted by exactly one side.

    ``limit`` caps how many violations are kept (all are still counted as failures).
    """
    if pos.visible != neg.visible:
        raise VocabularyError("both definitions must have the same visible vocabulary")
    violations = []
    checked = 0
    certified = True
    for n in range(1, max_size + 1):
        for _, batch in enumerate_batches(pos.visible, n, budget):
            a = sigma_membership_batch(pos, batch, env, budget)
            b = sigma_membership_batch(neg, batch, env, budget)
            checked += len(batch)
            for i in np.flatnonzero(a == b):
                certified = False
                if limit is None or len(violations) < limit:
                    violations.append((batch.structure(int(i)), bool(a[i]), bool(b[i])))
    return DeltaReport(certified, max_size, checked, tuple(violations))


# ---------------------------------------------------------------------------
# parity by hidden pairing

PAIRING = "S"


def _pairing_core(s: str = PAIRING) -> list[Formula]:
    S = lambda a, b: Rel(s, (a, b))  # noqa: E731
    return [
        Forall("x", Forall("y", Implies(S("x", "y"), S("y", "x")))),
        Forall("x", Exists("y", S("x", "y"))),
        Forall("x", Forall("y", Forall("z", Implies(And(S("x", "y"), S("x", "z")), Equal("y", "z"))))),
    ]


def even_pairing_sentence(s: str = PAIRING) -> Formula:
    """``s`` is a fixed-point-free involution: its orbits pair up the domain."""
    return conj([Forall("x", Not(Rel(s, ("x", "x"))))] + _pairing_core(s))


def odd_pairing_sentence(s: str = PAIRING) -> Formula:
    """``s`` is an involution with exactly one fixed point."""
    S = lambda a, b: Rel(s, (a, b))  # noqa: E731
    one_fixed = [
        Exists("x", S("x", "x")),
        Forall("x", Forall("y", Implies(And(S("x", "x"), S("y", "y")), Equal("x", "y")))),
    ]
    return conj(_pairing_core(s) + one_fixed)


def even_size_definition(visible: Vocabulary = Vocabulary(()), s: str = PAIRING) -> ProjectionDefinition:
    full = visible.union(Vocabulary(((s, 2),)))
    return ProjectionDefinition(full, visible, even_pairing_sentence(s), "exists", "even-size")


def odd_size_definition(visible: Vocabulary = Vocabulary(()), s: str = PAIRING) -> ProjectionDefinition:
    full = visible.union(Vocabulary(((s, 2),)))
    return ProjectionDefinition(full, visible, odd_pairing_sentence(s), "exists", "odd-size")
