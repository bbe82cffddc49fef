"""Seeded random formulas covering every node type, plus the oracles they need."""

from __future__ import annotations

import random
from typing import Sequence

from .evaluator import ClassOracle, CountThreshold, Env
from .structures import Structure, Vocabulary
from .syntax import (
    And,
    BigAnd,
    BigOr,
    CountAtLeast,
    Equal,
    Exists,
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
    WellOrder,
    FALSE,
    TRUE,
)

CORPUS_VOCABULARY = Vocabulary((("P", 1), ("R", 2)))
VARIABLES = ("x", "y", "z", "u")
QUANTIFIER_KINDS = ("exists", "forall", "count", "Q", "I", "J", "W", "oracle1", "oracle2")


def _even_unary(s: Structure) -> bool:
    return len(s.relations["A"]) % 2 == 0


def _symmetric(s: Structure) -> bool:
    r = s.relations["B"]
    return all((b, a) in r for a, b in r)


EVEN = ClassOracle("Even", Vocabulary((("A", 1),)), _even_unary)
SYM = ClassOracle("Sym", Vocabulary((("B", 2),)), _symmetric)


def corpus_env(k: int = 2) -> Env:
    """``Q`` as "at least ``k``", with the ``Even`` (unary) and ``Sym`` (binary) classes."""
    return Env(q=CountThreshold(k), oracles={"Even": EVEN, "Sym": SYM})


class FormulaGenerator:
    def __init__(self, rng: random.Random, vocabulary: Vocabulary = CORPUS_VOCABULARY, variables=VARIABLES):
        self.rng = rng
        self.vocabulary = vocabulary
        self.variables = tuple(variables)

    def atom(self, scope: Sequence[str]) -> Formula:
        rng = self.rng
        if not scope:
            return rng.choice((TRUE, FALSE))
        if rng.random() < 0.2:
            return Equal(rng.choice(scope), rng.choice(scope))
        name, arity = rng.choice(self.vocabulary.symbols)
        return Rel(name, tuple(rng.choice(scope) for _ in range(arity)))

    def quantifier(self, kind: str, depth: int, scope: Sequence[str]) -> Formula:
        rng = self.rng
        v = rng.choice(self.variables)
        inner = tuple(dict.fromkeys(tuple(scope) + (v,)))
        if kind == "exists":
            return Exists(v, self.formula(depth - 1, inner))
        if kind == "forall":
            return Forall(v, self.formula(depth - 1, inner))
        if kind == "count":
            return CountAtLeast(rng.randint(1, 3), v, self.formula(depth - 1, inner))
        if kind == "Q":
            return CountAtLeast(None, v, self.formula(depth - 1, inner))
        if kind == "oracle1":
            return OracleQ("Even", (v,), self.formula(depth - 1, inner))
        w = rng.choice([u for u in self.variables if u != v])
        both = tuple(dict.fromkeys(tuple(scope) + (v, w)))
        if kind in ("I", "J"):
            left = self.formula(depth - 1, tuple(dict.fromkeys(tuple(scope) + (v,))))
            right = self.formula(depth - 1, tuple(dict.fromkeys(tuple(scope) + (w,))))
            return (Hartig if kind == "I" else Rescher)(v, w, left, right)
        if kind == "W":
            return WellOrder(v, w, self.formula(depth - 1, both))
        if kind == "oracle2":
            return OracleQ("Sym", (v, w), self.formula(depth - 1, both))
        raise ValueError(kind)

    def formula(self, depth: int, scope: Sequence[str]) -> Formula:
        rng = self.rng
        if depth <= 0 or (scope and rng.random() < 0.2):
            return self.atom(scope)
        roll = rng.random()
        if roll < 0.45 or not scope:
            return self.quantifier(rng.choice(QUANTIFIER_KINDS), depth, scope)
        if roll < 0.55:
            return Not(self.formula(depth - 1, scope))
        if roll < 0.9:
            op = rng.choice((And, Or, Implies, Iff))
            return op(self.formula(depth - 1, scope), self.formula(depth - 1, scope))
        op = rng.choice((BigAnd, BigOr))
        return op(tuple(self.formula(depth - 1, scope) for _ in range(rng.randint(2, 3))))

    def sentence(self, depth: int = 4, top: str | None = None) -> Formula:
        return self.quantifier(top or self.rng.choice(QUANTIFIER_KINDS), depth, ())


def random_sentences(count: int, seed: int = 0, depth: int = 4) -> list[Formula]:
    """``count`` sentences; the top-level quantifier cycles through every kind so each is covered."""
    gen = FormulaGenerator(random.Random(seed))
    return [gen.sentence(depth, QUANTIFIER_KINDS[i % len(QUANTIFIER_KINDS)]) for i in range(count)]
