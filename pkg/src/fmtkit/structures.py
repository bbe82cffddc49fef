"""Finite relational structures over canonical domains ``{0, ..., n-1}``.

Enumeration order
-----------------
A structure of size ``n`` over a vocabulary is encoded as a bit string: the
symbols in vocabulary order, and within a symbol every ``arity``-tuple over the
domain in lexicographic order, one bit per tuple (1 = member).  Reading that
string as a binary number with the first bit most significant gives the
structure's *code*.  ``enumerate_structures`` yields structures in increasing
code order, so the empty structure comes first and the last tuple of the last
symbol toggles fastest.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    DimensionError,
    EnumerationLimitError,
    StructureFormatError,
    VocabularyError,
)

DEFAULT_BUDGET = 10**7
CHUNK = 1 << 14

_NAME = re.compile(r"^\$?[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class Vocabulary:
    symbols: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        syms = tuple((str(name), int(arity)) for name, arity in self.symbols)
        seen = set()
        for name, arity in syms:
            if not _NAME.match(name):
                raise VocabularyError(f"bad symbol name {name!r}")
            if arity < 0:
                raise VocabularyError(f"negative arity for {name}")
            if name in seen:
                raise VocabularyError(f"duplicate symbol {name}")
            seen.add(name)
        object.__setattr__(self, "symbols", syms)

    @classmethod
    def parse(cls, text: str) -> "Vocabulary":
        """Parse ``"P/1, R/2"`` (empty string gives the empty vocabulary)."""
        pairs = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            m = re.fullmatch(r"(\$?[A-Za-z_][A-Za-z0-9_]*)\s*/\s*(\d+)", part)
            if not m:
                raise VocabularyError(f"bad symbol declaration {part!r}")
            pairs.append((m.group(1), int(m.group(2))))
        return cls(tuple(pairs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.symbols)

    def arity(self, name: str) -> int:
        for sym, arity in self.symbols:
            if sym == name:
                return arity
        raise VocabularyError(f"symbol {name} not in vocabulary")

    def __contains__(self, name) -> bool:
        return any(sym == name for sym, _ in self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def union(self, other: "Vocabulary") -> "Vocabulary":
        """Disjoint union; any shared name is a clash."""
        clash = set(self.names) & set(other.names)
        if clash:
            raise VocabularyError(f"symbol clash: {sorted(clash)}")
        return Vocabulary(self.symbols + other.symbols)

    def minus(self, other: "Vocabulary") -> "Vocabulary":
        return Vocabulary(tuple(s for s in self.symbols if s[0] not in other))

    def issubset(self, other: "Vocabulary") -> bool:
        return all(name in other and other.arity(name) == arity for name, arity in self.symbols)

    def tuple_count(self, n: int) -> int:
        return sum(n**arity for _, arity in self.symbols)

    def __str__(self) -> str:
        return ", ".join(f"{name}/{arity}" for name, arity in self.symbols)


@lru_cache(maxsize=None)
def all_tuples(n: int, arity: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.product(range(n), repeat=arity))


def _layout(vocabulary: Vocabulary, n: int):
    out, offset = [], 0
    for name, arity in vocabulary:
        count = n**arity
        out.append((name, arity, offset, count))
        offset += count
    return out, offset


@dataclass(frozen=True)
class Bijection:
    """A permutation of ``{0..n-1}``; ``mapping[i]`` is the image of ``i``."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(i) for i in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise DimensionError(f"not a bijection of {{0..{len(mapping) - 1}}}: {mapping}")
        object.__setattr__(self, "mapping", mapping)

    @classmethod
    def identity(cls, n: int) -> "Bijection":
        return cls(tuple(range(n)))

    @classmethod
    def swap(cls, n: int, i: int, j: int) -> "Bijection":
        m = list(range(n))
        m[i], m[j] = m[j], m[i]
        return cls(tuple(m))

    @classmethod
    def all(cls, n: int) -> Iterator["Bijection"]:
        """Every permutation of size ``n`` in lexicographic order."""
        for p in itertools.permutations(range(n)):
            yield cls(p)

    @property
    def size(self) -> int:
        return len(self.mapping)

    def __call__(self, a: int) -> int:
        return self.mapping[a]

    def inverse(self) -> "Bijection":
        inv = [0] * self.size
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return Bijection(tuple(inv))

    def compose(self, other: "Bijection") -> "Bijection":
        """``self ∘ other``: apply ``other`` first."""
        if other.size != self.size:
            raise DimensionError("cannot compose bijections of different sizes")
        return Bijection(tuple(self.mapping[other.mapping[i]] for i in range(self.size)))

    def is_identity(self) -> bool:
        return self.mapping == tuple(range(self.size))

    def image(self, tup: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(self.mapping[a] for a in tup)

    def image_set(self, tuples: Iterable[tuple[int, ...]]) -> frozenset:
        return frozenset(self.image(t) for t in tuples)


@dataclass(frozen=True, eq=False)
class Structure:
    vocabulary: Vocabulary
    size: int
    relations: Mapping[str, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        if self.size < 0:
            raise DimensionError("negative domain size")
        rels = {}
        given = dict(self.relations)
        for name, arity in self.vocabulary:
            if name not in given:
                raise VocabularyError(f"no interpretation for {name}")
            tuples = frozenset(tuple(int(a) for a in t) for t in given.pop(name))
            for t in tuples:
                if len(t) != arity:
                    raise DimensionError(f"tuple {t} in {name} has wrong arity (expected {arity})")
                if any(a < 0 or a >= self.size for a in t):
                    raise DimensionError(f"tuple {t} in {name} leaves domain of size {self.size}")
            rels[name] = tuples
        if given:
            raise VocabularyError(f"interpretations for unknown symbols {sorted(given)}")
        object.__setattr__(self, "relations", rels)

    def relation(self, name: str) -> frozenset:
        try:
            return self.relations[name]
        except KeyError:
            raise VocabularyError(f"symbol {name} not in structure vocabulary") from None

    def __eq__(self, other):
        if not isinstance(other, Structure):
            return NotImplemented
        return (
            self.vocabulary == other.vocabulary
            and self.size == other.size
            and self.relations == other.relations
        )

    def __hash__(self):
        return hash((self.vocabulary, self.size, tuple(self.relations[n] for n in self.vocabulary.names)))

    def __repr__(self):
        body = "; ".join(
            f"{name}={{{', '.join(_fmt_tuple(t) for t in sorted(self.relations[name]))}}}"
            for name in self.vocabulary.names
        )
        return f"Structure(size={self.size}{'; ' if body else ''}{body})"

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        """Interpretations as boolean arrays with a leading batch axis of length 1."""
        out = {}
        for name, arity in self.vocabulary:
            arr = np.zeros((1,) + (self.size,) * arity, dtype=bool)
            for t in self.relations[name]:
                arr[(0,) + t] = True
            out[name] = arr
        return out

    @property
    def code(self) -> int:
        """Position of this structure in the enumeration order."""
        layout, total = _layout(self.vocabulary, self.size)
        code = 0
        for name, arity, offset, _ in layout:
            index = {t: i for i, t in enumerate(all_tuples(self.size, arity))}
            for t in self.relations[name]:
                code |= 1 << (total - 1 - offset - index[t])
        return code

    @classmethod
    def from_code(cls, vocabulary: Vocabulary, n: int, code: int) -> "Structure":
        layout, total = _layout(vocabulary, n)
        rels = {}
        for name, arity, offset, _ in layout:
            rels[name] = frozenset(
                t for i, t in enumerate(all_tuples(n, arity)) if code >> (total - 1 - offset - i) & 1
            )
        return cls(vocabulary, n, rels)


def _fmt_tuple(t) -> str:
    return "(" + ",".join(str(a) for a in t) + ")"


# ---------------------------------------------------------------------------
# batches


@dataclass
class StructureBatch:
    """Many structures of one vocabulary and size, stored as stacked arrays.

    Each array has a leading axis of length ``len(self)`` or 1 (shared by the
    whole batch).
    """

    vocabulary: Vocabulary
    size: int
    arrays: dict[str, np.ndarray]
    length: int

    def __len__(self) -> int:
        return self.length

    @classmethod
    def from_structures(cls, structures: list[Structure]) -> "StructureBatch":
        if not structures:
            raise DimensionError("empty batch")
        first = structures[0]
        for s in structures:
            if s.vocabulary != first.vocabulary or s.size != first.size:
                raise DimensionError("batch members must share vocabulary and size")
        arrays = {
            name: np.concatenate([s.arrays[name] for s in structures], axis=0)
            for name in first.vocabulary.names
        }
        return cls(first.vocabulary, first.size, arrays, len(structures))

    def take(self, index) -> "StructureBatch":
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        arrays = {k: (a if a.shape[0] == 1 else a[index]) for k, a in self.arrays.items()}
        return StructureBatch(self.vocabulary, self.size, arrays, len(index))

    def full(self, name: str) -> np.ndarray:
        arr = self.arrays[name]
        if arr.shape[0] != self.length:
            arr = np.broadcast_to(arr, (self.length,) + arr.shape[1:])
        return arr

    def bits(self) -> np.ndarray:
        """``(len, T)`` membership matrix in encoding order."""
        cols = [self.full(name).reshape(self.length, -1) for name in self.vocabulary.names]
        if not cols:
            return np.zeros((self.length, 0), dtype=bool)
        return np.concatenate(cols, axis=1)

    def structure(self, i: int) -> Structure:
        rels = {}
        for name, arity in self.vocabulary:
            arr = self.arrays[name]
            arr = arr[0] if arr.shape[0] == 1 else arr[i]
            rels[name] = frozenset(tuple(int(a) for a in t) for t in np.argwhere(arr))
        return Structure(self.vocabulary, self.size, rels)

    def __iter__(self) -> Iterator[Structure]:
        for i in range(self.length):
            yield self.structure(i)

    def codes(self) -> list[int] | np.ndarray:
        return _codes(self.bits())

    def canonical_codes(self):
        """Least code over each structure's isomorphism orbit (same for isomorphic members)."""
        bits = self.bits()
        n = self.size
        best = None
        for perm in Bijection.all(n):
            src = _permutation_source(self.vocabulary, n, perm.inverse().mapping)
            codes = _codes(bits[:, src])
            if best is None:
                best = codes
            elif isinstance(best, np.ndarray):
                best = np.minimum(best, codes)
            else:
                best = [min(a, b) for a, b in zip(best, codes)]
        return best


def _codes(bits: np.ndarray):
    total = bits.shape[1]
    if total <= 62:
        weights = (np.int64(1) << np.arange(total - 1, -1, -1, dtype=np.int64)) if total else np.zeros(0, np.int64)
        return bits.astype(np.int64) @ weights
    return [int("".join("1" if b else "0" for b in row), 2) for row in bits]


@lru_cache(maxsize=None)
def _permutation_source(vocabulary: Vocabulary, n: int, inverse: tuple[int, ...]) -> np.ndarray:
    # bit j of the permuted structure is bit src[j] of the original
    layout, total = _layout(vocabulary, n)
    src = np.empty(total, dtype=np.intp)
    for _, arity, offset, _count in layout:
        index = {t: i for i, t in enumerate(all_tuples(n, arity))}
        for i, t in enumerate(all_tuples(n, arity)):
            src[offset + i] = offset + index[tuple(inverse[a] for a in t)]
    return src


def structure_count(vocabulary: Vocabulary, n: int) -> int:
    return 2 ** vocabulary.tuple_count(n)


def _check_budget(count: int, budget: int | None, what: str = "structures"):
    if budget is not None and count > budget:
        raise EnumerationLimitError(count, budget, what)


def _batch_from_indices(vocabulary: Vocabulary, n: int, idx: np.ndarray) -> StructureBatch:
    layout, total = _layout(vocabulary, n)
    shifts = np.arange(total - 1, -1, -1, dtype=np.int64)
    bits = ((idx[:, None] >> shifts[None, :]) & 1).astype(bool)
    arrays = {}
    for name, arity, offset, count in layout:
        arrays[name] = bits[:, offset : offset + count].reshape((len(idx),) + (n,) * arity)
    return StructureBatch(vocabulary, n, arrays, len(idx))


def enumerate_batches(
    vocabulary: Vocabulary,
    n: int,
    budget: int | None = DEFAULT_BUDGET,
    chunk: int = CHUNK,
) -> Iterator[tuple[int, StructureBatch]]:
    """Yield ``(first_code, batch)`` pairs covering every structure in code order."""
    if n < 0:
        raise DimensionError("negative domain size")
    total_bits = vocabulary.tuple_count(n)
    count = 2**total_bits
    _check_budget(count, budget)
    if total_bits > 62:
        raise EnumerationLimitError(count, 2**62)
    for start in range(0, count, chunk):
        idx = np.arange(start, min(start + chunk, count), dtype=np.int64)
        yield start, _batch_from_indices(vocabulary, n, idx)


def enumerate_structures(
    vocabulary: Vocabulary, n: int, budget: int | None = DEFAULT_BUDGET
) -> Iterator[Structure]:
    for _, batch in enumerate_batches(vocabulary, n, budget):
        yield from batch


def apply_bijection(s: Structure, pi: Bijection) -> Structure:
    if pi.size != s.size:
        raise DimensionError(f"bijection of size {pi.size} applied to structure of size {s.size}")
    return Structure(
        s.vocabulary, s.size, {name: pi.image_set(s.relations[name]) for name in s.vocabulary.names}
    )


def _signatures(s: Structure) -> list[tuple]:
    sig = [[] for _ in range(s.size)]
    for name, arity in s.vocabulary:
        counts = np.zeros((s.size, max(arity, 1) + 1), dtype=int)
        for t in s.relations[name]:
            for pos, a in enumerate(t):
                counts[a, pos] += 1
            if t and all(a == t[0] for a in t):
                counts[t[0], -1] += 1
        for a in range(s.size):
            sig[a].append(tuple(counts[a]))
    return [tuple(x) for x in sig]


def is_isomorphic(a: Structure, b: Structure) -> Bijection | None:
    """Return a bijection mapping ``a`` onto ``b``, or ``None`` if there is none.

    Elements are only matched to elements with the same degree signature
    (per-position occurrence counts and loop counts); the returned witness is
    re-verified on every interpretation.
    """
    if a.vocabulary != b.vocabulary:
        raise VocabularyError("isomorphism test needs identical vocabularies")
    if a.size != b.size:
        return None
    names = a.vocabulary.names
    if any(len(a.relations[n]) != len(b.relations[n]) for n in names):
        return None
    sig_a, sig_b = _signatures(a), _signatures(b)
    if sorted(sig_a) != sorted(sig_b):
        return None
    n = a.size
    candidates = [[j for j in range(n) if sig_b[j] == sig_a[i]] for i in range(n)]
    # tuples of a, grouped by the largest element they mention
    by_max = [[] for _ in range(n)]
    for name in names:
        for t in a.relations[name]:
            if t:
                by_max[max(t)].append((name, t))
    mapping = [-1] * n
    used = [False] * n

    def extend(i: int) -> bool:
        if i == n:
            return True
        for j in candidates[i]:
            if used[j]:
                continue
            mapping[i] = j
            if all(tuple(mapping[x] for x in t) in b.relations[name] for name, t in by_max[i]):
                used[j] = True
                if extend(i + 1):
                    return True
                used[j] = False
        mapping[i] = -1
        return False

    if not extend(0):
        return None
    pi = Bijection(tuple(mapping))
    # relation sizes agree and pi maps a's tuples into b's, so it is onto as well
    assert apply_bijection(a, pi) == b
    return pi


def reduct(s: Structure, sub: Vocabulary) -> Structure:
    if not sub.issubset(s.vocabulary):
        missing = [name for name, _ in sub if name not in s.vocabulary or s.vocabulary.arity(name) != sub.arity(name)]
        raise VocabularyError(f"reduct vocabulary has symbols absent from the structure: {missing}")
    return Structure(sub, s.size, {name: s.relations[name] for name in sub.names})


def expansion_batches(
    s: Structure,
    extra: Vocabulary,
    budget: int | None = DEFAULT_BUDGET,
    chunk: int = CHUNK,
) -> Iterator[StructureBatch]:
    """Batches of all expansions of ``s`` by ``extra``, in ``extra``'s enumeration order."""
    full = s.vocabulary.union(extra)
    base = s.arrays
    for _, batch in enumerate_batches(extra, s.size, budget, chunk):
        arrays = {name: base[name] for name in s.vocabulary.names}
        arrays.update(batch.arrays)
        yield StructureBatch(full, s.size, arrays, len(batch))


def expansions(s: Structure, extra: Vocabulary, budget: int | None = DEFAULT_BUDGET) -> Iterator[Structure]:
    for batch in expansion_batches(s, extra, budget):
        yield from batch


def canonical_code(s: Structure) -> int:
    """Least code over the isomorphism class of ``s``."""
    return int(StructureBatch(s.vocabulary, s.size, s.arrays, 1).canonical_codes()[0])


def isomorphism_classes(vocabulary: Vocabulary, n: int, budget: int | None = DEFAULT_BUDGET) -> list[Structure]:
    """One representative per isomorphism class: the member with the least code."""
    reps = set()
    for _, batch in enumerate_batches(vocabulary, n, budget):
        reps.update(int(c) for c in batch.canonical_codes())
    return [Structure.from_code(vocabulary, n, c) for c in sorted(reps)]


# ---------------------------------------------------------------------------
# text format

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>\$?[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>[/:;(),]))")


def _tokens(text: str):
    pos = 0
    out = []
    text = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise StructureFormatError(f"unexpected character {text[pos:].lstrip()[:1]!r} at offset {pos}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


def parse_structures(text: str) -> list[Structure]:
    """Parse one or more structure documents.

    Grammar (whitespace between tokens is free, ``#`` starts a comment)::

        document := "size" INT decl*
        decl     := "rel" NAME "/" INT ":" [tuple (";" tuple)*]
        tuple    := "(" [INT ("," INT)*] ")"
    """
    toks = _tokens(text)
    i = 0
    docs = []

    def expect(kind, value=None):
        nonlocal i
        if i >= len(toks):
            raise StructureFormatError(f"unexpected end of input, expected {value or kind}")
        k, v = toks[i]
        if k != kind or (value is not None and v != value):
            raise StructureFormatError(f"expected {value or kind}, found {v!r}")
        i += 1
        return v

    while i < len(toks):
        expect("name", "size")
        n = int(expect("num"))
        symbols, rels = [], {}
        while i < len(toks) and toks[i] == ("name", "rel"):
            i += 1
            name = expect("name")
            expect("sym", "/")
            arity = int(expect("num"))
            expect("sym", ":")
            tuples = set()
            while i < len(toks) and toks[i] == ("sym", "("):
                i += 1
                t = []
                if toks[i] != ("sym", ")"):
                    t.append(int(expect("num")))
                    while toks[i] == ("sym", ","):
                        i += 1
                        t.append(int(expect("num")))
                expect("sym", ")")
                tuples.add(tuple(t))
                if i < len(toks) and toks[i] == ("sym", ";"):
                    i += 1
                    if i >= len(toks) or toks[i] != ("sym", "("):
                        raise StructureFormatError("expected tuple after ';'")
            if name in rels:
                raise StructureFormatError(f"symbol {name} declared twice")
            symbols.append((name, arity))
            rels[name] = tuples
        if i < len(toks) and toks[i] != ("name", "size"):
            raise StructureFormatError(f"unexpected token {toks[i][1]!r}")
        try:
            docs.append(Structure(Vocabulary(tuple(symbols)), n, rels))
        except (DimensionError, VocabularyError) as exc:
            raise StructureFormatError(str(exc)) from exc
    return docs


def parse_structure(text: str) -> Structure:
    docs = parse_structures(text)
    if len(docs) != 1:
        raise StructureFormatError(f"expected exactly one structure, found {len(docs)}")
    return docs[0]


def format_structure(s: Structure) -> str:
    lines = [f"size {s.size}"]
    for name, arity in s.vocabulary:
        tuples = "; ".join(_fmt_tuple(t) for t in sorted(s.relations[name]))
        lines.append(f"rel {name}/{arity}:" + (f" {tuples}" if tuples else ""))
    return "\n".join(lines) + "\n"
