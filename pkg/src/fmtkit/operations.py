"""Local and global operations on semantic values and their invariance.

An input sequence ``<A_0, ..., A_{b-1}>`` with ``A_i ⊆ M^{n_i}`` is enumerated
exactly like a structure over the vocabulary ``P0/n_0, ..., P{b-1}/n_{b-1}``
(see ``structures``); invariance scans walk inputs in that order and, for each
input, the non-identity permutations in lexicographic order.  The first
failure found is the reported counterexample.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

from .errors import ArityError, DimensionError, EnumerationLimitError, StructureFormatError, VocabularyError
from .evaluator import ClassOracle, Env, value_batch
from .structures import (
    DEFAULT_BUDGET,
    Bijection,
    Structure,
    Vocabulary,
    all_tuples,
    enumerate_batches,
    enumerate_structures,
)
from .syntax import Formula, free_vars, relation_symbols

Inputs = tuple[frozenset, ...]


def input_vocabulary(arities: Sequence[int], names: Sequence[str] | None = None) -> Vocabulary:
    names = list(names) if names is not None else [f"P{i}" for i in range(len(arities))]
    if len(names) != len(arities):
        raise ArityError(f"{len(names)} predicate names for {len(arities)} inputs")
    return Vocabulary(tuple(zip(names, arities)))


@dataclass(frozen=True, eq=False)
class LocalOperation:
    """An operation on the domain ``{0..size-1}``.

    ``rule`` maps a tuple of frozensets of tuples (one per input) to a
    frozenset of ``output_arity``-tuples.
    """

    size: int
    input_arities: tuple[int, ...]
    output_arity: int
    rule: Callable[[Inputs], frozenset]
    name: str = "f"

    def __post_init__(self):
        object.__setattr__(self, "input_arities", tuple(self.input_arities))

    def __call__(self, inputs: Sequence) -> frozenset:
        inputs = tuple(frozenset(tuple(t) for t in a) for a in inputs)
        if len(inputs) != len(self.input_arities):
            raise ArityError(f"{self.name} takes {len(self.input_arities)} inputs, got {len(inputs)}")
        return frozenset(self.rule(inputs))

    @classmethod
    def from_table(
        cls,
        size: int,
        input_arities: Sequence[int],
        output_arity: int,
        table: Mapping[Inputs, frozenset],
        name: str = "table",
    ) -> "LocalOperation":
        """Sparse table; inputs missing from ``table`` map to the empty set."""
        table = {tuple(frozenset(a) for a in k): frozenset(v) for k, v in table.items()}
        return cls(size, tuple(input_arities), output_arity, lambda inputs: table.get(inputs, frozenset()), name)

    def input_count(self) -> int:
        return 2 ** sum(self.size**a for a in self.input_arities)

    def inputs(self, budget: int | None = DEFAULT_BUDGET) -> Iterator[Inputs]:
        vocab = input_vocabulary(self.input_arities)
        for s in enumerate_structures(vocab, self.size, budget):
            yield tuple(s.relations[name] for name in vocab.names)

    def table(self, budget: int | None = DEFAULT_BUDGET) -> dict[Inputs, frozenset]:
        """The full table, validated against the output arity and domain."""
        out = {}
        for inputs in self.inputs(budget):
            value = self(inputs)
            for t in value:
                if len(t) != self.output_arity or any(not 0 <= a < self.size for a in t):
                    raise DimensionError(f"{self.name} produced tuple {t} outside M^{self.output_arity}")
            out[inputs] = value
        return out


@dataclass(frozen=True, eq=False)
class GlobalOperation:
    """A family of local operations, one per domain size."""

    input_arities: tuple[int, ...]
    output_arity: int
    family: Callable[[int], LocalOperation]
    name: str = "g"

    def at(self, n: int) -> LocalOperation:
        op = self.family(n)
        if op.size != n or tuple(op.input_arities) != tuple(self.input_arities) or op.output_arity != self.output_arity:
            raise ArityError(f"{self.name} at size {n} has inconsistent arities")
        return op

    @classmethod
    def from_rule(cls, input_arities, output_arity, rule: Callable[[int, Inputs], frozenset], name="g"):
        """Build from ``rule(size, inputs)``."""
        input_arities = tuple(input_arities)
        return cls(
            input_arities,
            output_arity,
            lambda n: LocalOperation(n, input_arities, output_arity, lambda inputs, n=n: rule(n, inputs), name),
            name,
        )


# ---------------------------------------------------------------------------
# built-in operations


def _and(n, inputs):
    return inputs[0] & inputs[1]


def _or(n, inputs):
    return inputs[0] | inputs[1]


def builtin_operation(name: str, arity: int = 1) -> GlobalOperation:
    """``and``/``or`` on pairs of arity-``arity`` sets, ``complement``, and ``exists``.

    ``exists`` with arity ``m`` takes ``A ⊆ M^{m+1}`` to ``{s restricted to its first m places}``.
    """
    if name == "and":
        return GlobalOperation.from_rule((arity, arity), arity, _and, "and")
    if name == "or":
        return GlobalOperation.from_rule((arity, arity), arity, _or, "or")
    if name == "complement":
        return GlobalOperation.from_rule(
            (arity,), arity, lambda n, inputs: frozenset(all_tuples(n, arity)) - inputs[0], "complement"
        )
    if name == "exists":
        return GlobalOperation.from_rule(
            (arity + 1,), arity, lambda n, inputs: frozenset(t[:arity] for t in inputs[0]), "exists"
        )
    raise KeyError(f"unknown built-in operation {name!r}")


BUILTIN_OPERATIONS = ("and", "or", "exists", "complement")


# ---------------------------------------------------------------------------
# invariance


@dataclass(frozen=True)
class InvarianceReport:
    invariant: bool
    size: int | None = None
    permutation: Bijection | None = None
    inputs: Inputs | None = None
    expected: frozenset | None = None  # π''f(A)
    actual: frozenset | None = None  # f(π''A)

    def __bool__(self):
        return self.invariant

    def replays(self, op: LocalOperation | GlobalOperation) -> bool:
        """Re-check that a reported counterexample is a genuine violation."""
        if self.invariant:
            return False
        local = op.at(self.size) if isinstance(op, GlobalOperation) else op
        pi = self.permutation
        moved = tuple(pi.image_set(a) for a in self.inputs)
        return local(moved) != pi.image_set(local(self.inputs))


def is_permutation_invariant(f: LocalOperation, budget: int | None = DEFAULT_BUDGET) -> InvarianceReport:
    count = f.input_count() * math.factorial(f.size)
    if budget is not None and count > budget:
        raise EnumerationLimitError(count, budget, "permutation checks")
    table = f.table(budget=None)
    perms = [p for p in Bijection.all(f.size) if not p.is_identity()]
    for inputs, out in table.items():
        for pi in perms:
            moved = tuple(pi.image_set(a) for a in inputs)
            expected = pi.image_set(out)
            actual = table[moved]
            if actual != expected:
                return InvarianceReport(False, f.size, pi, inputs, expected, actual)
    return InvarianceReport(True, f.size)


def is_bijection_invariant(g: GlobalOperation, max_size: int, budget: int | None = DEFAULT_BUDGET) -> InvarianceReport:
    """Bijections between equinumerous domains reduce to permutations of the canonical domain."""
    for n in range(1, max_size + 1):
        report = is_permutation_invariant(g.at(n), budget)
        if not report:
            return report
    return InvarianceReport(True, max_size)


# ---------------------------------------------------------------------------
# describability


@dataclass(frozen=True)
class DescribeResult:
    holds: bool
    inputs: Inputs | None = None
    expected: frozenset | None = None  # f(A)
    actual: frozenset | None = None  # semantic value of the formula

    def __bool__(self):
        return self.holds


def describes(
    phi: Formula,
    f: LocalOperation,
    predicates: Sequence[str],
    variables: Sequence[str] | None = None,
    env: Env | None = None,
    budget: int | None = DEFAULT_BUDGET,
) -> DescribeResult:
    """Does ``phi`` (with ``predicates[i]`` read as input ``i``) have semantic value ``f(A)`` for every input?"""
    vocab = input_vocabulary(f.input_arities, predicates)
    for name, arities in relation_symbols(phi).items():
        if name not in vocab:
            raise ArityError(f"formula uses {name}, which is not one of the predicates {list(predicates)}")
        if arities != {vocab.arity(name)}:
            raise ArityError(f"{name} used with arity {sorted(arities)}, operation input has arity {vocab.arity(name)}")
    variables = tuple(sorted(free_vars(phi))) if variables is None else tuple(variables)
    if len(variables) != f.output_arity:
        raise ArityError(f"formula has {len(variables)} output variables, operation has output arity {f.output_arity}")
    tuples = all_tuples(f.size, f.output_arity)
    for _, batch in enumerate_batches(vocab, f.size, budget):
        values = value_batch(batch, phi, variables, env).reshape(len(batch), -1)
        for i in range(len(batch)):
            s = batch.structure(i)
            inputs = tuple(s.relations[name] for name in vocab.names)
            expected = f(inputs)
            actual = frozenset(t for t, bit in zip(tuples, values[i]) if bit)
            if actual != expected:
                return DescribeResult(False, inputs, expected, actual)
    return DescribeResult(True)


# ---------------------------------------------------------------------------
# operations <-> model classes


def class_of_operation(g: GlobalOperation, output_symbol: str = "P", input_symbols: Sequence[str] | None = None) -> ClassOracle:
    """The class of structures interpreting ``output_symbol`` as ``g`` of the other symbols."""
    inputs_vocab = input_vocabulary(g.input_arities, input_symbols)
    if output_symbol in inputs_vocab:
        raise VocabularyError(f"output symbol {output_symbol} clashes with an input symbol")
    vocab = inputs_vocab.union(Vocabulary(((output_symbol, g.output_arity),)))
    names = inputs_vocab.names

    def member(s: Structure) -> bool:
        inputs = tuple(s.relations[name] for name in names)
        return s.relations[output_symbol] == g.at(s.size)(inputs)

    return ClassOracle(f"K_{g.name}", vocab, member)


def operation_of_class(K: ClassOracle) -> GlobalOperation:
    """``f_M(R) = M`` if ``(M, R)`` is in ``K`` and the empty set otherwise."""
    names = K.vocabulary.names

    def rule(n: int, inputs: Inputs) -> frozenset:
        s = Structure(K.vocabulary, n, dict(zip(names, inputs)))
        return frozenset((a,) for a in range(n)) if K(s) else frozenset()

    return GlobalOperation.from_rule(tuple(a for _, a in K.vocabulary), 1, rule, f"f_{K.name}")


def is_isomorphism_closed(K: ClassOracle, max_size: int, budget: int | None = DEFAULT_BUDGET) -> bool:
    return K.closure_violation(max_size, budget) is None


# ---------------------------------------------------------------------------
# random and tabulated operations


def random_table_operation(rng, size: int, input_arities: Sequence[int], output_arity: int, invariant_bias: float = 0.5):
    """A random operation; with probability ``invariant_bias`` one that only looks at input cardinalities."""
    input_arities = tuple(input_arities)
    outputs = all_tuples(size, output_arity)
    if rng.random() < invariant_bias:
        # the output depends on the input sizes only, and is one of the invariant sets
        # ∅, M^m, or (when arities agree) an input or its complement
        choices = ["empty", "full"] + [f"in{i}" for i, a in enumerate(input_arities) if a == output_arity]
        choices += [f"co{i}" for i, a in enumerate(input_arities) if a == output_arity]
        memo: dict[tuple[int, ...], str] = {}

        def rule(inputs, memo=memo):
            key = tuple(len(a) for a in inputs)
            pick = memo.setdefault(key, rng.choice(choices))
            if pick == "empty":
                return frozenset()
            if pick == "full":
                return frozenset(outputs)
            i = int(pick[2:])
            return inputs[i] if pick.startswith("in") else frozenset(outputs) - inputs[i]

        op = LocalOperation(size, input_arities, output_arity, rule, "random-invariant")
    else:
        cache: dict[Inputs, frozenset] = {}

        def rule(inputs, cache=cache):
            if inputs not in cache:
                cache[inputs] = frozenset(t for t in outputs if rng.random() < 0.5)
            return cache[inputs]

        op = LocalOperation(size, input_arities, output_arity, rule, "random-table")
    # freeze the randomness into an explicit table so re-checks see the same operation
    table = op.table(budget=None)
    return LocalOperation.from_table(size, input_arities, output_arity, table, op.name)


_SET_RE = re.compile(r"\{([^{}]*)\}")


def _parse_set(text: str) -> frozenset:
    text = text.strip()
    m = _SET_RE.fullmatch(text)
    if not m:
        raise StructureFormatError(f"expected a set like {{(0,1); (1,0)}}, found {text!r}")
    out = set()
    for part in m.group(1).split(";"):
        part = part.strip()
        if not part:
            continue
        if not (part.startswith("(") and part.endswith(")")):
            raise StructureFormatError(f"bad tuple {part!r}")
        inner = part[1:-1].strip()
        out.add(tuple(int(x) for x in inner.split(",")) if inner else ())
    return frozenset(out)


def parse_operation(text: str) -> LocalOperation:
    """Parse an operation table.

    Format (``#`` comments, whitespace-insensitive)::

        size <n>
        inputs <a_0>,<a_1>,...
        output <m>
        case {<tuples>} | {<tuples>} ... -> {<tuples>}

    Tuples inside a set are separated by ``;`` as in the structure format.
    Inputs without a ``case`` line map to the empty set.
    """
    size = arities = output = None
    table = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head == "size":
            size = int(rest)
        elif head == "inputs":
            arities = tuple(int(a) for a in rest.replace(" ", "").split(",") if a)
        elif head == "output":
            output = int(rest)
        elif head == "case":
            lhs, sep, rhs = rest.partition("->")
            if not sep:
                raise StructureFormatError(f"case line without '->': {line!r}")
            key = tuple(_parse_set(part) for part in lhs.split("|"))
            table[key] = _parse_set(rhs)
        else:
            raise StructureFormatError(f"unknown line {line!r}")
    if size is None or arities is None or output is None:
        raise StructureFormatError("operation file needs size, inputs and output lines")
    for key, value in table.items():
        if len(key) != len(arities):
            raise StructureFormatError(f"case with {len(key)} inputs, expected {len(arities)}")
        for a, arity in zip(key + (value,), arities + (output,)):
            for t in a:
                if len(t) != arity or any(not 0 <= x < size for x in t):
                    raise StructureFormatError(f"tuple {t} out of range")
    return LocalOperation.from_table(size, arities, output, table, "table")


def format_operation(f: LocalOperation, skip_empty: bool = True) -> str:
    def fmt(a):
        return "{" + "; ".join("(" + ",".join(str(x) for x in t) + ")" for t in sorted(a)) + "}"

    lines = [f"size {f.size}", "inputs " + ",".join(str(a) for a in f.input_arities), f"output {f.output_arity}"]
    for inputs, out in f.table(budget=None).items():
        if skip_empty and not out:
            continue
        lines.append("case " + " | ".join(fmt(a) for a in inputs) + " -> " + fmt(out))
    return "\n".join(lines) + "\n"
