"""Truth and semantic values for first-order logic with generalized quantifiers.

Every subformula is evaluated once per call into a boolean array indexed by
``(structure, a_1, ..., a_k)`` where ``a_i`` ranges over the domain for the
i-th free variable in sorted order.  That array *is* the semantic value: the
set of satisfying assignments, for every structure of a batch at once.  The
memo table is keyed by subformula and lives only for one evaluation call, so
shared subformulas (the Scott formulas inside the big disjunctions of the
definability module) are computed once.

Sentences are the case ``k = 0``; ``eval_value`` with an empty variable list
returns ``{()}`` for a true sentence and the empty set for a false one.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyDomainError, EvaluationError, OracleConfigurationError
from .structures import (
    DEFAULT_BUDGET,
    Bijection,
    Structure,
    StructureBatch,
    Vocabulary,
    apply_bijection,
    enumerate_batches,
    is_isomorphic,
)
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
    Hartig,
    Iff,
    Implies,
    Not,
    Or,
    OracleQ,
    Rel,
    Rescher,
    Verum,
    WellOrder,
    free_vars,
    render,
)

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True)
class SemanticValue:
    variables: tuple[str, ...]
    tuples: frozenset

    def __len__(self):
        return len(self.tuples)

    def __contains__(self, t):
        return tuple(t) in self.tuples


@dataclass(frozen=True)
class CountThreshold:
    """Interpretation of the schematic ``Q`` as "at least ``k`` elements"."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("threshold must be at least 1")


@dataclass(frozen=True, eq=False)
class ClassOracle:
    """A model class given by a membership predicate on finite structures.

    ``membership`` must be isomorphism-invariant; ``verify_oracle`` samples that
    and ``closure_violation`` checks it exhaustively for small sizes.
    """

    name: str
    vocabulary: Vocabulary
    membership: Callable[[Structure], bool]

    def __call__(self, s: Structure) -> bool:
        if s.vocabulary != self.vocabulary:
            raise EvaluationError(f"class {self.name} expects vocabulary {self.vocabulary}, got {s.vocabulary}")
        return bool(self.membership(s))

    def closure_violation(self, max_size: int, budget: int | None = DEFAULT_BUDGET):
        """First pair of isomorphic structures the class separates, or ``None``."""
        for n in range(1, max_size + 1):
            first: dict[int, tuple[Structure, bool]] = {}
            for _, batch in enumerate_batches(self.vocabulary, n, budget):
                for i, code in enumerate(batch.canonical_codes()):
                    s = batch.structure(i)
                    member = self(s)
                    seen = first.setdefault(int(code), (s, member))
                    if seen[1] != member:
                        return seen[0], s, is_isomorphic(seen[0], s)
        return None


def verify_oracle(oracle: ClassOracle, sizes: Iterable[int] = (1, 2, 3), samples: int = 50, seed: int = 0):
    """Sample random structures and permutations; raise if membership is not invariant."""
    rng = random.Random(seed)
    for n in sizes:
        for _ in range(samples):
            rels = {}
            for name, arity in oracle.vocabulary:
                tuples = [t for t in np.ndindex(*(n,) * arity)] if arity else [()]
                rels[name] = {t for t in tuples if rng.random() < 0.5}
            s = Structure(oracle.vocabulary, n, rels)
            perm = list(range(n))
            rng.shuffle(perm)
            if oracle(s) != oracle(apply_bijection(s, Bijection(tuple(perm)))):
                raise OracleConfigurationError(f"class {oracle.name} is not closed under isomorphism: {s!r}")


@dataclass
class Env:
    """Evaluation-time bindings: the schematic ``Q`` and the named class oracles."""

    q: CountThreshold | None = None
    oracles: Mapping[str, ClassOracle] = field(default_factory=dict)

    def with_oracles(self, *oracles: ClassOracle) -> "Env":
        merged = dict(self.oracles)
        merged.update({o.name: o for o in oracles})
        return Env(self.q, merged)


def _align(arr: np.ndarray, have: tuple[str, ...], want: tuple[str, ...]) -> np.ndarray:
    # both sorted, have ⊆ want: insert singleton axes for the missing variables
    if have == want:
        return arr
    shape = [arr.shape[0]]
    it = iter(arr.shape[1:])
    for v in want:
        shape.append(next(it) if v in have else 1)
    return arr.reshape(shape)


def _union(a: tuple[str, ...], b: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(sorted(set(a) | set(b)))


class _Evaluator:
    def __init__(self, batch: StructureBatch, env: Env):
        if batch.size < 1:
            raise EmptyDomainError("structures must have a non-empty domain")
        self.batch = batch
        self.n = batch.size
        self.env = env
        self.memo: dict[Formula, tuple[tuple[str, ...], np.ndarray]] = {}

    def value(self, phi: Formula) -> tuple[tuple[str, ...], np.ndarray]:
        hit = self.memo.get(phi)
        if hit is None:
            hit = self._compute(phi)
            self.memo[phi] = hit
        return hit

    def expanded(self, phi: Formula, extra: Sequence[str]) -> tuple[tuple[str, ...], np.ndarray]:
        """Value of ``phi`` over its free variables plus ``extra``, broadcast to full shape."""
        vs, arr = self.value(phi)
        want = _union(vs, tuple(extra))
        arr = _align(arr, vs, want)
        return want, np.broadcast_to(arr, arr.shape[:1] + (self.n,) * len(want))

    def _binary(self, phi, op):
        lv, la = self.value(phi.left)
        rv, ra = self.value(phi.right)
        vs = _union(lv, rv)
        return vs, op(_align(la, lv, vs), _align(ra, rv, vs))

    def _fold(self, items, op):
        vs, acc = self.value(items[0])
        for item in items[1:]:
            iv, ia = self.value(item)
            new = _union(vs, iv)
            acc = op(_align(acc, vs, new), _align(ia, iv, new))
            vs = new
        return vs, acc

    def _reduce(self, var: str, body: Formula, fn):
        vs, arr = self.expanded(body, (var,))
        axis = 1 + vs.index(var)
        return tuple(v for v in vs if v != var), fn(arr, axis)

    def _count(self, var: str, body: Formula):
        return self._reduce(var, body, lambda a, ax: a.sum(axis=ax))

    def _compute(self, phi: Formula):
        n = self.n
        if isinstance(phi, Rel):
            arrays = self.batch.arrays
            if phi.symbol not in arrays:
                raise EvaluationError(f"relation {phi.symbol} is not interpreted")
            arr = arrays[phi.symbol]
            if arr.ndim - 1 != len(phi.args):
                raise EvaluationError(f"{phi.symbol} has arity {arr.ndim - 1}, used with {len(phi.args)}")
            vs = tuple(sorted(set(phi.args)))
            if not phi.args:
                return vs, arr
            if len(vs) > len(_LETTERS) - 1:
                raise EvaluationError("too many distinct variables in one atom")
            letter = {v: _LETTERS[i + 1] for i, v in enumerate(vs)}
            spec = "a" + "".join(letter[v] for v in phi.args) + "->a" + "".join(letter[v] for v in vs)
            return vs, np.einsum(spec, arr)
        if isinstance(phi, Equal):
            if phi.left == phi.right:
                return (phi.left,), np.ones((1, n), dtype=bool)
            return tuple(sorted((phi.left, phi.right))), np.eye(n, dtype=bool)[None]
        if isinstance(phi, Verum):
            return (), np.ones(1, dtype=bool)
        if isinstance(phi, Falsum):
            return (), np.zeros(1, dtype=bool)
        if isinstance(phi, Not):
            vs, arr = self.value(phi.body)
            return vs, ~arr
        if isinstance(phi, And):
            return self._binary(phi, np.logical_and)
        if isinstance(phi, Or):
            return self._binary(phi, np.logical_or)
        if isinstance(phi, Implies):
            return self._binary(phi, lambda a, b: ~a | b)
        if isinstance(phi, Iff):
            return self._binary(phi, np.equal)
        if isinstance(phi, BigAnd):
            return self._fold(phi.items, np.logical_and)
        if isinstance(phi, BigOr):
            return self._fold(phi.items, np.logical_or)
        if isinstance(phi, Exists):
            return self._reduce(phi.var, phi.body, lambda a, ax: a.any(axis=ax))
        if isinstance(phi, Forall):
            return self._reduce(phi.var, phi.body, lambda a, ax: a.all(axis=ax))
        if isinstance(phi, CountAtLeast):
            k = phi.k
            if k is None:
                if self.env.q is None:
                    raise EvaluationError("schematic quantifier Q has no interpretation")
                k = self.env.q.k
            vs, counts = self._count(phi.var, phi.body)
            return vs, counts >= k
        if isinstance(phi, (Hartig, Rescher)):
            lv, lc = self._count(phi.x, phi.left)
            rv, rc = self._count(phi.y, phi.right)
            vs = _union(lv, rv)
            lc, rc = _align(lc, lv, vs), _align(rc, rv, vs)
            return vs, (lc == rc) if isinstance(phi, Hartig) else (lc >= rc)
        if isinstance(phi, WellOrder):
            return self._well_order(phi)
        if isinstance(phi, OracleQ):
            return self._oracle(phi)
        raise TypeError(f"not a formula: {phi!r}")

    def _well_order(self, phi: WellOrder):
        if phi.x == phi.y:
            raise EvaluationError("well-order quantifier needs two distinct variables")
        vs, arr = self.expanded(phi.body, (phi.x, phi.y))
        ix, iy = 1 + vs.index(phi.x), 1 + vs.index(phi.y)
        m = np.moveaxis(arr, (ix, iy), (-2, -1))
        n = self.n
        irreflexive = ~np.diagonal(m, axis1=-2, axis2=-1).any(axis=-1)
        composed = (m[..., :, :, None] & m[..., None, :, :]).any(axis=-2)
        transitive = ~(composed & ~m).any(axis=(-2, -1))
        total = (m | np.swapaxes(m, -1, -2) | np.eye(n, dtype=bool)).all(axis=(-2, -1))
        return tuple(v for v in vs if v not in (phi.x, phi.y)), irreflexive & transitive & total

    def _oracle(self, phi: OracleQ):
        oracle = self.env.oracles.get(phi.name)
        if oracle is None:
            raise EvaluationError(f"unresolved class oracle {phi.name}")
        if len(oracle.vocabulary) != 1 or oracle.vocabulary.symbols[0][1] != len(phi.vars):
            raise EvaluationError(
                f"class {phi.name} must have one distinguished symbol of arity {len(phi.vars)}"
            )
        if len(set(phi.vars)) != len(phi.vars):
            raise EvaluationError("oracle quantifier binds a variable twice")
        vs, arr = self.expanded(phi.body, phi.vars)
        axes = [1 + vs.index(v) for v in phi.vars]
        r = len(phi.vars)
        moved = np.moveaxis(arr, axes, list(range(-r, 0)))
        lead = moved.shape[:-r]
        flat = np.ascontiguousarray(moved).reshape(-1, self.n**r)
        rows, inverse = np.unique(flat, axis=0, return_inverse=True)
        symbol = oracle.vocabulary.names[0]
        verdict = np.empty(len(rows), dtype=bool)
        for i, row in enumerate(rows):
            tuples = np.argwhere(row.reshape((self.n,) * r))
            s = Structure(oracle.vocabulary, self.n, {symbol: {tuple(int(a) for a in t) for t in tuples}})
            verdict[i] = oracle(s)
        return tuple(v for v in vs if v not in phi.vars), verdict[inverse.reshape(-1)].reshape(lead)


def _check_free(phi: Formula, allowed: Iterable[str]):
    extra = free_vars(phi) - set(allowed)
    if extra:
        raise EvaluationError(f"free variables {sorted(extra)} in {render(phi)}")


def _top_conjuncts(phi: Formula) -> list[Formula]:
    if isinstance(phi, And):
        return _top_conjuncts(phi.left) + _top_conjuncts(phi.right)
    if isinstance(phi, BigAnd):
        out = []
        for item in phi.items:
            out.extend(_top_conjuncts(item))
        return out
    return [phi]


def eval_batch(batch: StructureBatch, phi: Formula, env: Env | None = None, short_circuit: bool = True) -> np.ndarray:
    """Truth value of the sentence ``phi`` in every structure of ``batch``.

    With ``short_circuit`` a top-level conjunction is evaluated conjunct by
    conjunct, each on the structures that survived the previous ones.
    """
    env = env or Env()
    _check_free(phi, ())
    if batch.size < 1:
        raise EmptyDomainError("structures must have a non-empty domain")
    conjuncts = _top_conjuncts(phi) if short_circuit else [phi]
    result = np.zeros(len(batch), dtype=bool)
    alive = np.arange(len(batch))
    current = batch
    for c in conjuncts:
        if not len(alive):
            break
        _, arr = _Evaluator(current, env).value(c)
        arr = np.broadcast_to(arr, (len(current),))
        alive = alive[arr]
        current = batch.take(alive)
    result[alive] = True
    return result


def value_batch(
    batch: StructureBatch, phi: Formula, variables: Sequence[str], env: Env | None = None
) -> np.ndarray:
    """Semantic values for every structure: boolean array ``(len, n, ..., n)`` in ``variables`` order."""
    env = env or Env()
    variables = tuple(variables)
    if len(set(variables)) != len(variables):
        raise EvaluationError("variable list has repeats")
    _check_free(phi, variables)
    ev = _Evaluator(batch, env)
    vs, arr = ev.expanded(phi, variables)
    order = [0] + [1 + vs.index(v) for v in variables]
    arr = np.transpose(arr, order)
    return np.broadcast_to(arr, (len(batch),) + arr.shape[1:])


def eval_sentence(s: Structure, phi: Formula, env: Env | None = None) -> bool:
    batch = StructureBatch(s.vocabulary, s.size, s.arrays, 1)
    return bool(eval_batch(batch, phi, env, short_circuit=False)[0])


def eval_value(s: Structure, phi: Formula, variables: Sequence[str], env: Env | None = None) -> SemanticValue:
    batch = StructureBatch(s.vocabulary, s.size, s.arrays, 1)
    arr = value_batch(batch, phi, variables, env)[0]
    tuples = frozenset(tuple(int(a) for a in t) for t in np.argwhere(arr)) if arr.ndim else (
        frozenset({()}) if arr else frozenset()
    )
    return SemanticValue(tuple(variables), tuples)
