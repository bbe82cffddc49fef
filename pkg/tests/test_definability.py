import itertools
import random

import numpy as np
import pytest

from fmtkit.definability import (
    ORDER,
    ProjectionDefinition,
    codes_class,
    define_class_at_size,
    delta_check,
    eta,
    eta_prime,
    even_size_definition,
    linear_order,
    mcgee_phi,
    odd_size_definition,
    sigma_membership,
    sigma_membership_batch,
    theta,
)
from fmtkit.errors import EnumerationLimitError, OracleConfigurationError, SizeCapError, VocabularyError
from fmtkit.evaluator import ClassOracle, eval_batch, eval_sentence, eval_value
from fmtkit.spectra import spectrum
from fmtkit.structures import (
    Bijection,
    Structure,
    Vocabulary,
    canonical_code,
    enumerate_batches,
    enumerate_structures,
    isomorphism_classes,
)
from fmtkit.syntax import FALSE, Forall, Implies, Rel, conj, parse, subformulas

from oracles import brute_orbit_labels, image, is_strict_total_order, naive_eval

R = Vocabulary((("R", 2),))
P = Vocabulary((("P", 1),))
ORD = Vocabulary(((ORDER, 2),))
EMPTY = Vocabulary(())


def order(n, perm=None):
    """The linear order listing ``perm`` (default 0 < 1 < ... < n-1)."""
    perm = perm or tuple(range(n))
    return Structure(ORD, n, {ORDER: {(perm[i], perm[j]) for i in range(n) for j in range(i + 1, n)}})


def expand(s, lt):
    vocab = s.vocabulary.union(ORD)
    return Structure(vocab, s.size, {**s.relations, ORDER: lt})


# ---------------------------------------------------------------------------
# Scott formulas


def test_eta_zero_is_minimality():
    assert eta(0) == Forall("y", Implies(Rel(ORDER, ("y", "x")), FALSE))


def test_eta_prime_on_standard_order():
    assert eval_sentence(order(3), eta_prime(3))
    assert not eval_sentence(order(3), eta_prime(2))
    assert not eval_sentence(Structure(ORD, 3, {ORDER: {(0, 1), (1, 2)}}), eta_prime(3))


def test_eta_prime_exact_on_size_three():
    for _, batch in enumerate_batches(ORD, 3):
        got = eval_batch(batch, eta_prime(3))
        want = [is_strict_total_order(s.relations[ORDER], 3) for s in batch]
        assert got.tolist() == want


def test_bare_eta_prime_has_a_non_order_model_of_size_four():
    # η'_3 speaks about linear orders only; this relation has no 4-element chain
    s = Structure(ORD, 4, {ORDER: {(0, 2), (2, 3), (0, 3)}})
    assert eval_sentence(s, eta_prime(3))
    assert not eval_sentence(s, conj([linear_order(), eta_prime(3)]))


def test_eta_counts_predecessors_in_every_linear_order():
    for n in (1, 2, 3, 4):
        for perm in itertools.permutations(range(n)):
            s = order(n, perm)
            position = {a: i for i, a in enumerate(perm)}
            for alpha in range(5):
                value = eval_value(s, eta(alpha), ["x"])
                assert value.tuples == {(a,) for a in range(n) if position[a] == alpha}


def test_eta_matches_naive_evaluation():
    for n in (1, 2, 3):
        for s in enumerate_structures(ORD, n):
            for alpha in range(n + 1):
                value = eval_value(s, eta(alpha), ["x"])
                for a in range(n):
                    assert ((a,) in value) == naive_eval(s, eta(alpha), {"x": a})


def test_eta_index_cap():
    with pytest.raises(SizeCapError):
        eta_prime(13)
    with pytest.raises(ValueError):
        eta(2, "x", "x")


# ---------------------------------------------------------------------------
# characterizing sentences


def test_phi_picks_out_the_two_copies():
    target = Structure(R, 2, {"R": {(0, 1)}})
    phi = mcgee_phi(target).sentence
    orders = list(_all_relations(2))
    hits = {s for s in enumerate_structures(R, 2) if any(naive_eval(expand(s, lt), phi, {}) for lt in orders)}
    assert hits == {Structure(R, 2, {"R": {(0, 1)}}), Structure(R, 2, {"R": {(1, 0)}})}


def _all_relations(n):
    pairs = list(itertools.product(range(n), repeat=2))
    for mask in range(2 ** len(pairs)):
        yield {p for i, p in enumerate(pairs) if mask >> i & 1}


def test_phi_of_size_one_is_the_atomic_diagram():
    loop = Structure(R, 1, {"R": {(0, 0)}})
    phi = mcgee_phi(loop).sentence
    assert eval_sentence(expand(loop, set()), phi)
    assert not eval_sentence(expand(Structure(R, 1, {"R": set()}), set()), phi)


def test_phi_depends_on_the_enumeration():
    target = Structure(R, 2, {"R": {(0, 1)}})
    a = mcgee_phi(target, Bijection.identity(2))
    b = mcgee_phi(target, Bijection.swap(2, 0, 1))
    assert a.formula != b.formula
    assert eval_sentence(expand(target, order(2).relations[ORDER]), a.sentence)
    assert eval_sentence(expand(target, order(2, (1, 0)).relations[ORDER]), b.sentence)


def test_reserved_order_symbol():
    with pytest.raises(VocabularyError):
        mcgee_phi(Structure(ORD, 1, {ORDER: set()}))


def test_existential_and_universal_forms_agree_per_class():
    reps = isomorphism_classes(R, 2)
    frame = [linear_order(), eta_prime(2)]
    full = R.union(ORD)
    for rep in reps:
        th = theta([rep])
        ex = ProjectionDefinition(full, R, conj(frame + [th]), "exists")
        fa = ProjectionDefinition(full, R, Implies(conj(frame), th), "forall")
        code = canonical_code(rep)
        for _, batch in enumerate_batches(R, 2):
            a = sigma_membership_batch(ex, batch)
            b = sigma_membership_batch(fa, batch)
            truth = np.array([canonical_code(s) == code for s in batch])
            assert np.array_equal(a, truth) and np.array_equal(b, truth)


def test_universal_form_needs_every_labeled_copy():
    # with one enumeration per class the universal form misses relabelled copies
    rep = Structure(R, 2, {"R": {(0, 1)}})
    frame = [linear_order(), eta_prime(2)]
    full = R.union(ORD)
    fa = ProjectionDefinition(full, R, Implies(conj(frame), theta([rep], orbits=False)), "forall")
    assert not sigma_membership(fa, rep)


# ---------------------------------------------------------------------------
# per-size definitions


def _agrees(K, size):
    d = define_class_at_size(K, size, budget=None)
    for _, batch in enumerate_batches(K.vocabulary, size):
        truth = np.array([K(s) for s in batch])
        assert np.array_equal(sigma_membership_batch(d.positive, batch, budget=None), truth)
        assert np.array_equal(sigma_membership_batch(d.negative, batch, budget=None), ~truth)
        assert np.array_equal(sigma_membership_batch(d.universal, batch, budget=None), truth)
    return d


def test_even_sized_p_at_two():
    K = ClassOracle("evenP", P, lambda s: len(s.relations["P"]) % 2 == 0)
    d = _agrees(K, 2)
    accepted = [s for s in enumerate_structures(P, 2) if sigma_membership(d.positive, s)]
    assert sorted(len(s.relations["P"]) for s in accepted) == [0, 2]


def test_all_and_empty_classes():
    everything = ClassOracle("all", R, lambda s: True)
    d = _agrees(everything, 2)
    assert len(d.members) == 10 and not d.non_members
    nothing = ClassOracle("none", R, lambda s: False)
    d = _agrees(nothing, 2)
    assert not d.members
    assert theta([]) == FALSE
    assert FALSE in set(subformulas(d.positive.sentence))


def test_mcgee_on_single_classes_unions_and_parity():
    rng = random.Random(6)
    for size in (1, 2, 3):
        structures, labels, classes = brute_orbit_labels(R, size)
        label = {s: int(c) for s, c in zip(structures, labels)}
        singles = range(classes) if size < 3 else rng.sample(range(classes), 6)
        for c in singles:
            _agrees(ClassOracle(f"c{c}", R, lambda s, c=c, L=label: L[s] == c), size)
        for _ in range(3):
            a, b = rng.sample(range(classes), 2) if classes > 1 else (0, 0)
            _agrees(ClassOracle("u", R, lambda s, p={a, b}, L=label: L[s] in p), size)
    _agrees(ClassOracle("evenR", R, lambda s: len(s.relations["R"]) % 2 == 0), 3)


def test_definition_spectrum_is_within_its_size():
    K = ClassOracle("loops", R, lambda s: any(a == b for a, b in s.relations["R"]))
    for size in (1, 2):
        d = define_class_at_size(K, size)
        assert set(spectrum(d.positive, size + 1, budget=None).realized) <= {size}


def test_representatives_reject_non_closed_oracles():
    K = ClassOracle("edge01", R, lambda s: (0, 1) in s.relations["R"])
    with pytest.raises(OracleConfigurationError):
        define_class_at_size(K, 2)


def test_codes_class():
    loop_codes = {canonical_code(s) for s in isomorphism_classes(R, 2) if any(a == b for a, b in s.relations["R"])}
    K = codes_class("loops", R, loop_codes, size=2)
    for s in enumerate_structures(R, 2):
        assert K(s) == any(a == b for a, b in s.relations["R"])
    assert not K(Structure(R, 1, {"R": {(0, 0)}}))


# ---------------------------------------------------------------------------
# projection classes


def test_sigma_membership_examples():
    full = P.union(Vocabulary((("S", 1),)))
    d = ProjectionDefinition(full, P, parse("exists x. S(x) & P(x)"))
    assert sigma_membership(d, Structure(P, 2, {"P": {(0,)}}))
    assert not sigma_membership(d, Structure(P, 2, {"P": set()}))
    plain = ProjectionDefinition.plain(parse("exists x. P(x)"))
    for s in enumerate_structures(P, 3):
        assert sigma_membership(plain, s) == eval_sentence(s, parse("exists x. P(x)"))


def _has_perfect_matching(n):
    return any(
        all(m[m[a]] == a and m[a] != a for a in range(n)) for m in itertools.permutations(range(n))
    )


def test_even_pairing_membership():
    even = even_size_definition()
    odd = odd_size_definition()
    for n in (1, 2, 3, 4):
        s = Structure(EMPTY, n, {})
        assert sigma_membership(even, s, budget=None) == _has_perfect_matching(n) == (n % 2 == 0)
        assert sigma_membership(odd, s, budget=None) == (n % 2 == 1)


def test_even_pairing_with_visible_symbols():
    even = even_size_definition(P)
    for s in enumerate_structures(P, 3):
        assert not sigma_membership(even, s)
    for s in enumerate_structures(P, 2):
        assert sigma_membership(even, s)


def test_sigma_membership_is_isomorphism_closed():
    visible = Vocabulary((("P", 1), ("R", 2)))
    full = visible.union(Vocabulary((("S", 1),)))
    d = ProjectionDefinition(full, visible, parse("exists x. (S(x) & P(x)) & forall x. (S(x) -> R(x,x))"))
    for n in (1, 2, 3):
        _, labels, classes = brute_orbit_labels(visible, n)
        got = np.concatenate([sigma_membership_batch(d, b) for _, b in enumerate_batches(visible, n)])
        for c in range(classes):
            assert len(set(got[labels == c])) == 1


def test_sigma_budget_and_vocabulary_checks():
    even = even_size_definition()
    with pytest.raises(EnumerationLimitError):
        sigma_membership(even, Structure(EMPTY, 5, {}), budget=1000)
    with pytest.raises(VocabularyError):
        ProjectionDefinition(P, R, parse("exists x. P(x)"))
    with pytest.raises(VocabularyError):
        ProjectionDefinition(P, P, parse("exists x. S(x)"))


# ---------------------------------------------------------------------------
# Δ certification


def test_delta_examples():
    pos = ProjectionDefinition.plain(parse("exists x. P(x)"))
    neg = ProjectionDefinition.plain(parse("forall x. !P(x)"), P)
    assert delta_check(pos, neg, 3).certified
    same = delta_check(pos, pos, 3, limit=None)
    assert not same.certified
    assert len(same.violations) == same.checked == 2 + 4 + 8
    assert delta_check(even_size_definition(), odd_size_definition(), 4, budget=None).certified


def test_image_oracle_consistency():
    # the shared oracle helper agrees with the library's own bijection images
    s = Structure(R, 3, {"R": {(0, 1), (2, 2)}})
    for pi in Bijection.all(3):
        assert image(pi.mapping, s.relations["R"]) == pi.image_set(s.relations["R"])
