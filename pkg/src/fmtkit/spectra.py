"""Finite spectra, least model sizes and LS(C, D) verdicts over a window [1..N].

Nothing here says anything about sizes above the window: an empty spectrum
means "no model ≤ N", and the Hanf-style figure is just the largest realized
size in range.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .definability import ProjectionDefinition, sigma_membership_batch
from .errors import EnumerationLimitError
from .evaluator import ClassOracle, Env, eval_batch
from .structures import DEFAULT_BUDGET, Vocabulary, enumerate_batches
from .syntax import Formula, check_wf, render, vocabulary_of


@dataclass(frozen=True)
class SpectrumReport:
    name: str
    max_size: int
    realized: tuple[int, ...]
    model_counts: dict[int, int]
    class_counts: dict[int, int]

    def __post_init__(self):
        assert all(1 <= n <= self.max_size for n in self.realized)
        assert all(self.class_counts[n] <= self.model_counts[n] for n in self.model_counts)

    @property
    def min_size(self) -> int | None:
        return self.realized[0] if self.realized else None

    @property
    def largest(self) -> int | None:
        """Largest realized size in the window (says nothing about larger sizes)."""
        return self.realized[-1] if self.realized else None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_size": self.max_size,
            "realized": list(self.realized),
            "model_counts": {str(n): c for n, c in sorted(self.model_counts.items())},
            "class_counts": {str(n): c for n, c in sorted(self.class_counts.items())},
        }


def _members(target, vocabulary: Vocabulary, n: int, env: Env | None, budget: int | None):
    """Yield (batch, membership mask) for every size-``n`` structure."""
    for _, batch in enumerate_batches(vocabulary, n, budget):
        if isinstance(target, ProjectionDefinition):
            yield batch, sigma_membership_batch(target, batch, env, budget)
        elif isinstance(target, ClassOracle):
            yield batch, np.array([target(s) for s in batch], dtype=bool)
        else:
            yield batch, eval_batch(batch, target, env)


def spectrum(
    target: Formula | ClassOracle | ProjectionDefinition,
    max_size: int,
    env: Env | None = None,
    vocabulary: Vocabulary | None = None,
    budget: int | None = DEFAULT_BUDGET,
    count_classes: bool = True,
) -> SpectrumReport:
    """Which sizes in ``[1..max_size]`` have a model, with model and isomorphism-class counts.

    ``vocabulary`` defaults to the symbols the sentence uses (or the class's own vocabulary).
    """
    if isinstance(target, ProjectionDefinition):
        vocabulary, name = target.visible, target.name
    elif isinstance(target, ClassOracle):
        vocabulary, name = target.vocabulary, target.name
    else:
        vocabulary = vocabulary or vocabulary_of(target)
        bad = check_wf(target, vocabulary)
        if bad:
            raise ValueError("; ".join(str(b) for b in bad))
        name = render(target)
    total = sum(2 ** vocabulary.tuple_count(n) for n in range(1, max_size + 1))
    if budget is not None and total > budget:
        raise EnumerationLimitError(total, budget)
    realized, models, classes = [], {}, {}
    for n in range(1, max_size + 1):
        count = 0
        codes = set()
        for batch, mask in _members(target, vocabulary, n, env, budget):
            count += int(mask.sum())
            if count_classes and mask.any():
                canon = batch.take(np.flatnonzero(mask)).canonical_codes()
                codes.update(int(c) for c in canon)
        models[n] = count
        classes[n] = len(codes) if count_classes else (1 if count else 0)
        if count:
            realized.append(n)
    return SpectrumReport(name, max_size, tuple(realized), models, classes)


def min_model_size(target, max_size: int, env: Env | None = None, vocabulary: Vocabulary | None = None,
                   budget: int | None = DEFAULT_BUDGET) -> int | None:
    """Least realized size in ``[1..max_size]``; ``None`` means no model in the window."""
    for n in range(1, max_size + 1):
        if spectrum_at(target, n, env, vocabulary, budget):
            return n
    return None


def spectrum_at(target, n: int, env: Env | None = None, vocabulary: Vocabulary | None = None,
                budget: int | None = DEFAULT_BUDGET) -> bool:
    """Does ``target`` have a model of size exactly ``n``?  Stops at the first one."""
    if isinstance(target, ProjectionDefinition):
        vocabulary = target.visible
    elif isinstance(target, ClassOracle):
        vocabulary = target.vocabulary
    else:
        vocabulary = vocabulary or vocabulary_of(target)
    for _, mask in _members(target, vocabulary, n, env, budget):
        if mask.any():
            return True
    return False


# ---------------------------------------------------------------------------
# cardinal classes


@dataclass(frozen=True)
class CardinalClassSpec:
    """A set of sizes: ``set`` (explicit), ``interval`` [lo, hi], ``residue`` (n ≡ r mod m), or ``all``."""

    kind: str
    values: tuple[int, ...] = ()
    lo: int = 1
    hi: int | None = None
    modulus: int = 1
    residue: int = 0

    def __post_init__(self):
        if self.kind not in ("set", "interval", "residue", "all"):
            raise ValueError(f"unknown cardinal class kind {self.kind!r}")
        if self.kind == "residue" and self.modulus < 1:
            raise ValueError("modulus must be positive")

    def __contains__(self, n: int) -> bool:
        if self.kind == "set":
            return n in self.values
        if self.kind == "interval":
            return self.lo <= n and (self.hi is None or n <= self.hi)
        if self.kind == "residue":
            return n % self.modulus == self.residue % self.modulus
        return True

    def within(self, max_size: int) -> list[int]:
        return [n for n in range(1, max_size + 1) if n in self]

    def exhausted_by(self, max_size: int) -> bool:
        """True when every member lies in ``[1..max_size]`` (only explicit finite sets qualify)."""
        return self.kind == "set" and all(1 <= n <= max_size for n in self.values)

    @classmethod
    def parse(cls, text: str) -> "CardinalClassSpec":
        """``all``, ``{1,2,3}``, ``[2,5]`` / ``[2,]``, ``even``, ``odd``, or ``r mod m``."""
        t = text.strip().lower()
        if t == "all":
            return cls("all")
        if t == "even":
            return cls("residue", modulus=2, residue=0)
        if t == "odd":
            return cls("residue", modulus=2, residue=1)
        m = re.fullmatch(r"\{\s*(\d+(?:\s*,\s*\d+)*)?\s*\}", t)
        if m:
            vals = tuple(sorted({int(v) for v in m.group(1).split(",")})) if m.group(1) else ()
            return cls("set", values=vals)
        m = re.fullmatch(r"\[\s*(\d+)\s*,\s*(\d*)\s*\]", t)
        if m:
            return cls("interval", lo=int(m.group(1)), hi=int(m.group(2)) if m.group(2) else None)
        m = re.fullmatch(r"(\d+)\s*mod\s*(\d+)", t)
        if m:
            return cls("residue", modulus=int(m.group(2)), residue=int(m.group(1)))
        raise ValueError(f"cannot parse cardinal class {text!r}")

    def __str__(self):
        if self.kind == "set":
            return "{" + ",".join(map(str, self.values)) + "}"
        if self.kind == "interval":
            return f"[{self.lo},{'' if self.hi is None else self.hi}]"
        if self.kind == "residue":
            return f"{self.residue} mod {self.modulus}"
        return "all"


class Verdict(str, Enum):
    HOLDS = "HOLDS"
    VACUOUS = "VACUOUS"
    FAILS_IN_RANGE = "FAILS-IN-RANGE"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class LSResult:
    name: str
    verdict: Verdict
    realized: tuple[int, ...]
    c_witness: int | None = None
    d_witness: int | None = None


@dataclass(frozen=True)
class LSReport:
    C: CardinalClassSpec
    D: CardinalClassSpec
    max_size: int
    results: tuple[LSResult, ...] = field(default_factory=tuple)

    def verdicts(self) -> list[Verdict]:
        return [r.verdict for r in self.results]


def ls_verdict(realized: Sequence[int], C: CardinalClassSpec, D: CardinalClassSpec, max_size: int):
    c_models = [n for n in realized if n in C]
    d_models = [n for n in realized if n in D]
    if not c_models:
        return Verdict.VACUOUS, None, None
    if d_models:
        return Verdict.HOLDS, c_models[0], d_models[0]
    if D.exhausted_by(max_size):
        return Verdict.FAILS_IN_RANGE, c_models[0], None
    return Verdict.INCONCLUSIVE, c_models[0], None


def ls_check(
    sentences: Sequence,
    C: CardinalClassSpec,
    D: CardinalClassSpec,
    max_size: int,
    env: Env | None = None,
    budget: int | None = DEFAULT_BUDGET,
    names: Sequence[str] | None = None,
) -> LSReport:
    """Finite-window LS(C, D) verdict for each sentence (or class)."""
    results = []
    for i, target in enumerate(sentences):
        rep = spectrum(target, max_size, env, budget=budget, count_classes=False)
        verdict, cw, dw = ls_verdict(rep.realized, C, D, max_size)
        name = names[i] if names is not None else rep.name
        results.append(LSResult(name, verdict, rep.realized, cw, dw))
    return LSReport(C, D, max_size, tuple(results))
