import itertools
import random

import pytest

from fmtkit.corpus import FormulaGenerator, corpus_env
from fmtkit.definability import ProjectionDefinition, sigma_membership
from fmtkit.errors import DimensionError, EnumerationLimitError, StructureFormatError
from fmtkit.evaluator import ClassOracle, eval_sentence, value_batch
from fmtkit.operations import (
    BUILTIN_OPERATIONS,
    GlobalOperation,
    LocalOperation,
    builtin_operation,
    class_of_operation,
    describes,
    format_operation,
    input_vocabulary,
    is_bijection_invariant,
    is_isomorphism_closed,
    is_permutation_invariant,
    operation_of_class,
    parse_operation,
    random_table_operation,
)
from fmtkit.structures import Bijection, Vocabulary, all_tuples, enumerate_batches, enumerate_structures
from fmtkit.syntax import Iff, Rel, conj, parse, render, universal_closure

from oracles import brute_closed, brute_invariance_violations, image

E = frozenset()


def s1(*elems):
    return frozenset((a,) for a in elems)


def formula_operation(phi, predicates, arities, variables, n, env=None):
    """The operation whose value on inputs A is the semantic value of ``phi``, tabulated by one batch pass."""
    vocab = input_vocabulary(arities, predicates)
    tuples = all_tuples(n, len(variables))
    table = {}
    for _, batch in enumerate_batches(vocab, n, None):
        values = value_batch(batch, phi, variables, env).reshape(len(batch), -1)
        for i, s in enumerate(batch):
            key = tuple(s.relations[p] for p in predicates)
            table[key] = frozenset(t for t, bit in zip(tuples, values[i]) if bit)
    return LocalOperation.from_table(n, arities, len(variables), table, render(phi))


# ---------------------------------------------------------------------------
# invariance


def test_intersection_is_invariant():
    f = builtin_operation("and").at(2)
    assert f((s1(0, 1), s1(1))) == s1(1)
    assert is_permutation_invariant(f).invariant


def test_fixed_element_rule_counterexample():
    f = LocalOperation(2, (1,), 1, lambda inputs: inputs[0] | s1(0), "plus0")
    report = is_permutation_invariant(f)
    assert not report
    assert report.permutation == Bijection.swap(2, 0, 1)
    assert report.inputs == (E,)
    assert report.actual == s1(0)  # f(π∅)
    assert report.expected == s1(1)  # π f(∅)
    assert report.replays(f)


def test_projection_is_invariant():
    f = builtin_operation("exists").at(2)
    assert f((frozenset({(0, 1), (0, 0)}),)) == s1(0)
    assert is_permutation_invariant(f).invariant
    assert not brute_invariance_violations(f)


@pytest.mark.parametrize("name", BUILTIN_OPERATIONS)
def test_builtins_invariant_up_to_three(name):
    assert is_bijection_invariant(builtin_operation(name), 3).invariant


def test_global_examples():
    size_only = GlobalOperation.from_rule((1,), 1, lambda n, inputs: inputs[0] if n <= 2 else E, "small")
    assert is_bijection_invariant(size_only, 3).invariant
    fixed = GlobalOperation.from_rule((1,), 1, lambda n, inputs: inputs[0] & s1(0), "fix0")
    report = is_bijection_invariant(fixed, 3)
    assert not report and report.size <= 2 and report.replays(fixed)


def test_random_operations_agree_with_brute_force():
    rng = random.Random(0)
    for n in (1, 2, 3):
        for _ in range(10):
            op = random_table_operation(rng, n, (1,), 1)
            report = is_permutation_invariant(op)
            assert report.invariant == (not brute_invariance_violations(op))
            if not report:
                assert report.replays(op)


def test_invariance_budget():
    f = builtin_operation("and").at(3)
    with pytest.raises(EnumerationLimitError):
        is_permutation_invariant(f, budget=100)


def test_table_rejects_out_of_range_outputs():
    f = LocalOperation(2, (1,), 1, lambda inputs: frozenset({(5,)}))
    with pytest.raises(DimensionError):
        f.table()


# ---------------------------------------------------------------------------
# describability


def test_describes_conjunction_and_disjunction():
    for n in (1, 2, 3):
        assert describes(parse("P0(x) & P1(x)"), builtin_operation("and").at(n), ["P0", "P1"])
        assert describes(parse("P0(x) | P1(x)"), builtin_operation("or").at(n), ["P0", "P1"])
        assert describes(parse("exists y. P0(x,y)"), builtin_operation("exists").at(n), ["P0"])


def test_describes_failure_is_genuine():
    f = builtin_operation("and").at(2)
    res = describes(parse("P0(x)"), f, ["P0", "P1"])
    assert not res
    # the first failing input in enumeration order
    assert res.inputs == (s1(1), E)
    assert res.expected == f(res.inputs) and res.actual == res.inputs[0]
    # the textbook counterexample is one too
    assert f((s1(0), E)) != s1(0)


def test_formula_operations_are_invariant():
    rng = random.Random(12)
    gen = FormulaGenerator(rng, Vocabulary((("A", 1), ("B", 2))), ("x", "y", "z"))
    checked = 0
    while checked < 12:
        phi = gen.formula(3, ("x",))
        if "x" not in render(phi):
            continue
        n = 2 if checked < 9 else 3
        op = formula_operation(phi, ["A", "B"], (1, 2), ["x"], n, corpus_env())
        assert is_permutation_invariant(op).invariant, render(phi)
        checked += 1


# ---------------------------------------------------------------------------
# operations and classes


def test_class_of_intersection():
    K = class_of_operation(builtin_operation("and"))
    members = [s for s in enumerate_structures(K.vocabulary, 2) if K(s)]
    assert len(list(enumerate_structures(K.vocabulary, 2))) == 64
    assert len(members) == 16
    assert all(s.relations["P"] == s.relations["P0"] & s.relations["P1"] for s in members)


def test_class_of_identity():
    ident = GlobalOperation.from_rule((1,), 1, lambda n, inputs: inputs[0], "id")
    K = class_of_operation(ident)
    for s in enumerate_structures(K.vocabulary, 3):
        assert K(s) == (s.relations["P"] == s.relations["P0"])


def test_operation_of_nonempty_class():
    K = ClassOracle("nonempty", Vocabulary((("R", 1),)), lambda s: bool(s.relations["R"]))
    f = operation_of_class(K).at(2)
    assert f((s1(0),)) == s1(0, 1)
    assert f((E,)) == E


def test_invariance_transfer_small():
    ops = [builtin_operation(name) for name in BUILTIN_OPERATIONS]
    ops.append(GlobalOperation.from_rule((1,), 1, lambda n, inputs: inputs[0] | s1(0), "plus0"))
    ops.append(GlobalOperation.from_rule((1,), 1, lambda n, inputs: s1(n - 1) if inputs[0] else E, "last"))
    for g in ops:
        assert bool(is_bijection_invariant(g, 3)) == is_isomorphism_closed(class_of_operation(g), 3), g.name
    classes = [
        ClassOracle("even", Vocabulary((("R", 1),)), lambda s: len(s.relations["R"]) % 2 == 0),
        ClassOracle("has0", Vocabulary((("R", 1),)), lambda s: (0,) in s.relations["R"]),
        ClassOracle("loop", Vocabulary((("R", 2),)), lambda s: any(a == b for a, b in s.relations["R"])),
        ClassOracle("edge01", Vocabulary((("R", 2),)), lambda s: (0, 1) in s.relations["R"]),
    ]
    for K in classes:
        closed = is_isomorphism_closed(K, 3)
        assert closed == bool(is_bijection_invariant(operation_of_class(K), 3)), K.name
        assert closed == all(brute_closed(K, K.vocabulary, n) for n in (1, 2, 3))


# ---------------------------------------------------------------------------
# the lemma chain: describable -> class definable -> existential and universal forms agree


def test_describable_operation_gives_defining_sentence():
    pairs = [
        ("P0(x) & P1(x)", builtin_operation("and")),
        ("P0(x) | P1(x)", builtin_operation("or")),
        ("!P0(x)", builtin_operation("complement")),
    ]
    for text, g in pairs:
        phi = parse(text)
        arities = g.input_arities
        preds = [f"P{i}" for i in range(len(arities))]
        K = class_of_operation(g)
        defining = universal_closure(Iff(Rel("P", ("x",)), phi))
        for n in (1, 2, 3):
            assert describes(phi, g.at(n), preds)
            for s in enumerate_structures(K.vocabulary, n):
                assert eval_sentence(s, defining) == K(s)


@pytest.mark.parametrize("psi", ["exists x. P(x)", "forall x. P(x)", "exists x. (P(x) & P0(x))", "exists x. exists y. (P(x) & P(y) & !x = y)"])
def test_existential_and_universal_output_forms_agree(psi):
    phi = parse("P0(x) & !P1(x)")
    defining = universal_closure(Iff(Rel("P", ("x",)), phi))
    visible = input_vocabulary((1, 1))
    full = visible.union(Vocabulary((("P", 1),)))
    psi = parse(psi)
    ex = ProjectionDefinition(full, visible, conj([defining, psi]), "exists")
    fa = ProjectionDefinition(full, visible, parse(f"({render(defining)}) -> ({render(psi)})"), "forall")
    direct = parse(render(psi).replace("P(x)", "(P0(x) & !P1(x))").replace("P(y)", "(P0(y) & !P1(y))"))
    for n in (1, 2, 3):
        for s in enumerate_structures(visible, n):
            a, b = sigma_membership(ex, s), sigma_membership(fa, s)
            assert a == b == eval_sentence(s, direct)


# ---------------------------------------------------------------------------
# text format


def test_operation_text_round_trip():
    rng = random.Random(4)
    for _ in range(5):
        op = random_table_operation(rng, 2, (1, 2), 1)
        back = parse_operation(format_operation(op))
        assert back.table() == op.table()


def test_operation_text_examples():
    text = """# union with {0}
size 2
inputs 1
output 1
case {} -> {(0)}
case {(1)} -> {(0); (1)}
"""
    f = parse_operation(text)
    assert f((E,)) == s1(0)
    assert f((s1(1),)) == s1(0, 1)
    assert f((s1(0),)) == E  # missing cases default to the empty set
    with pytest.raises(StructureFormatError):
        parse_operation("size 2\ninputs 1\noutput 1\ncase {(2)} -> {}\n")
    with pytest.raises(StructureFormatError):
        parse_operation("size 2\ninputs 1\n")


def test_random_operations_are_reproducible():
    a = random_table_operation(random.Random(9), 2, (1,), 1)
    b = random_table_operation(random.Random(9), 2, (1,), 1)
    assert a.table() == b.table()


def test_image_helper_matches_bijection():
    pi = Bijection((2, 0, 1))
    for a in itertools.combinations(all_tuples(3, 1), 2):
        assert image(pi.mapping, a) == pi.image_set(a)
