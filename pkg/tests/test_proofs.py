from importlib import resources

import pytest

from fmtkit.errors import EnumerationLimitError
from fmtkit.evaluator import CountThreshold, Env, eval_batch
from fmtkit.proofs import (
    FOAxiom,
    Generalization,
    KeislerAxiom,
    ModusPonens,
    Premise,
    Proof,
    ProofFormatError,
    ProofLine,
    SchemaError,
    axiom_instances,
    check_proof,
    cited_axioms,
    format_proof,
    instantiate_fo,
    instantiate_keisler,
    is_axiom_instance,
    is_tautology,
    match_fo_axiom,
    parse_proof,
    soundness_scan,
)
from fmtkit.structures import Structure, Vocabulary, enumerate_batches
from fmtkit.syntax import conj, parse, render, universal_closure, vocabulary_of

CORPUS = ("mp", "rename", "monotone", "self", "singleton")
MUTANTS = {
    "bad_mp": (3, "line 4 is not an earlier line"),
    "bad_rename": (1, None),
    "bad_monotone": (2, "substitution yields"),
    "bad_self": (1, "not a tautology"),
    "bad_singleton": (3, "expected"),
}


def load(name):
    return (resources.files("fmtkit") / "data" / "proofs" / f"{name}.prf").read_text()


# ---------------------------------------------------------------------------
# axiom recognition


def test_axiom_one_example():
    assert is_axiom_instance(parse("!Q x. (x = y | x = z)")) == (1, {})
    assert is_axiom_instance(parse("!Q u. (u = v | u = v)"))[0] == 1
    # the bound variable must differ from both parameters
    assert is_axiom_instance(parse("!Q x. (x = x | x = z)")) is None


def test_axiom_two_example():
    idx, subst = is_axiom_instance(parse("forall x.(P(x) -> R(x)) -> (Q x. P(x) -> Q x. R(x))"))
    assert idx == 2
    assert subst["phi"] == parse("P(x)") and subst["psi"] == parse("R(x)")


def test_fo_tautology_is_not_a_keisler_axiom():
    phi = parse("Q x. P(x) -> Q x. P(x)")
    assert is_axiom_instance(phi) is None
    assert match_fo_axiom(phi)[0] == "taut"


def test_axiom_three_side_conditions():
    assert instantiate_keisler(3, {"phi": parse("P(x)"), "y": "y"}) == parse("Q x. P(x) -> Q y. P(y)")
    with pytest.raises(SchemaError):
        instantiate_keisler(3, {"phi": parse("P(x)"), "y": "x"})
    with pytest.raises(SchemaError):  # y occurs free in phi
        instantiate_keisler(3, {"phi": parse("R(x,y)"), "y": "y"})
    with pytest.raises(SchemaError):  # y would be captured
        instantiate_keisler(3, {"phi": parse("exists y. R(x,y)"), "y": "y"})


def test_axiom_four_round_trip():
    phi = instantiate_keisler(4, {"phi": parse("R(x,y)")})
    assert render(phi) == "(Q y. exists x. R(x,y)) -> (exists x. Q y. R(x,y)) | Q x. exists y. R(x,y)"
    assert is_axiom_instance(parse(render(phi)))[0] == 4
    with pytest.raises(SchemaError):
        instantiate_keisler(4, {"phi": parse("R(x,x)"), "y": "x"})


def test_axiom_instances_are_stable_under_round_trip():
    for index in (1, 2, 3, 4):
        for inst in axiom_instances(index):
            again = parse(render(inst))
            assert again == inst
            assert is_axiom_instance(again)[0] == index


def test_first_order_schemata():
    assert is_tautology(parse("A() | !A()"))
    assert is_tautology(parse("(exists x. P(x)) -> (exists x. P(x)) | R(y)"))
    assert not is_tautology(parse("A() -> B()"))
    assert instantiate_fo("all-elim", {"phi": parse("P(x)"), "t": "y"}) == parse("(forall x. P(x)) -> P(y)")
    with pytest.raises(SchemaError):
        instantiate_fo("all-elim", {"phi": parse("exists y. R(x,y)"), "t": "y"})
    with pytest.raises(SchemaError):
        instantiate_fo("vac-gen", {"phi": parse("P(x)")})
    assert match_fo_axiom(parse("x = x"))[0] == "eq-refl"
    assert match_fo_axiom(parse("x = y -> (R(x,x) -> R(y,x))"))[0] == "eq-subst"
    assert match_fo_axiom(parse("(exists z. P(z)) <-> !forall z. !P(z)"))[0] == "ex-def"


# ---------------------------------------------------------------------------
# the checker


def test_two_line_modus_ponens():
    a, ab, b = parse("A()"), parse("A() -> B()"), parse("B()")
    p = Proof((a, ab), (ProofLine(a, Premise(1)), ProofLine(ab, Premise(2)), ProofLine(b, ModusPonens(1, 2))))
    assert check_proof(p).accepted
    # either citation order
    p2 = Proof((a, ab), (ProofLine(a, Premise(1)), ProofLine(ab, Premise(2)), ProofLine(b, ModusPonens(2, 1))))
    assert check_proof(p2).accepted


def test_renaming_by_axiom_three_alone():
    phi = parse("Q x. P(x) -> Q y. P(y)")
    assert check_proof(Proof((), (ProofLine(phi, KeislerAxiom(3, None)),))).accepted
    assert check_proof(Proof((), (ProofLine(phi, KeislerAxiom(3, {"phi": parse("P(x)"), "y": "y"})),))).accepted


def test_forward_reference_is_rejected_at_that_line():
    a, b = parse("A()"), parse("B()")
    p = Proof((a,), (ProofLine(a, Premise(1)), ProofLine(b, ModusPonens(1, 3)), ProofLine(parse("A() -> B()"), FOAxiom("taut"))))
    verdict = check_proof(p)
    assert not verdict and verdict.line == 2


def test_generalization_on_a_premise_variable_is_rejected():
    prem = parse("P(x)")
    p = Proof((prem,), (ProofLine(prem, Premise(1)), ProofLine(parse("forall x. P(x)"), Generalization(1, "x"))))
    verdict = check_proof(p)
    assert not verdict and verdict.line == 2 and "free in a premise" in verdict.reason
    # a variable absent from the premises is fine
    p = Proof((prem,), (ProofLine(prem, Premise(1)), ProofLine(parse("forall z. P(x)"), Generalization(1, "z"))))
    assert check_proof(p).accepted


def test_wrong_premise_and_unknown_schema():
    p = Proof((parse("A()"),), (ProofLine(parse("B()"), Premise(1)),))
    assert check_proof(p).line == 1
    p = Proof((), (ProofLine(parse("A() | !A()"), FOAxiom("nope")),))
    assert "unknown schema" in check_proof(p).reason
    assert not check_proof(Proof((), ()))


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_is_accepted(name):
    verdict = check_proof(parse_proof(load(name)))
    assert verdict.accepted
    assert str(verdict) == "ACCEPT"


@pytest.mark.parametrize("name", sorted(MUTANTS))
def test_mutants_are_rejected_at_the_mutated_line(name):
    line, reason = MUTANTS[name]
    verdict = check_proof(parse_proof(load(name)))
    assert not verdict.accepted
    assert verdict.line == line
    assert str(verdict).startswith(f"REJECT at line {line}: ")
    if reason:
        assert reason in verdict.reason


# ---------------------------------------------------------------------------
# the proof file format


def test_proof_format_round_trip():
    for name in CORPUS + tuple(MUTANTS):
        p = parse_proof(load(name))
        assert parse_proof(format_proof(p)) == p


def test_proof_format_errors():
    with pytest.raises(ProofFormatError):
        parse_proof("1. A() ; frobnicate 2\n")
    with pytest.raises(ProofFormatError):
        parse_proof("2. A() ; ax0 taut\n")
    with pytest.raises(ProofFormatError):
        parse_proof("1. A( ; ax0 taut\n")


def test_parsed_justifications():
    p = parse_proof(load("monotone"))
    assert p.premises == (parse("forall x. (P(x) -> R(x))"),)
    assert p.lines[1].justification == KeislerAxiom(2, {"phi": parse("P(x)"), "psi": parse("R(x)")})
    assert p.lines[2].justification == ModusPonens(1, 2)
    assert cited_axioms(p) == [p.lines[1].formula]


# ---------------------------------------------------------------------------
# soundness scan


def test_axiom_one_under_k_three():
    assert soundness_scan(3, 4, (1,)) == []
    # a two-element set is "large" when k = 2
    assert soundness_scan(2, 2, (1,))


def test_axiom_two_under_several_thresholds():
    for k in (1, 2, 4):
        assert soundness_scan(k, 3, (2,)) == []


def test_axiom_three_under_k_three():
    assert soundness_scan(3, 3, (3,)) == []


def test_axiom_four_pigeonhole():
    assert soundness_scan(2, 4, (4,), budget=None) == []
    hits = soundness_scan(3, 3, (4,))
    witness = Structure(Vocabulary((("R", 2),)), 3, {"R": {(0, 0), (0, 1), (1, 2)}})
    target = instantiate_keisler(4, {"phi": parse("R(x,y)")})
    assert any(h.structure == witness and h.instance == target for h in hits)
    assert all(h.structure.size == 3 for h in hits)


def test_scan_budget():
    with pytest.raises(EnumerationLimitError):
        soundness_scan(3, 4, (2,), budget=1000)


def test_soundness_bridge():
    """Accepted proofs preserve truth wherever their premises and cited axioms hold."""
    for name in CORPUS:
        p = parse_proof(load(name))
        exercised = 0
        formulas = list(p.premises) + [line.formula for line in p.lines]
        vocab = vocabulary_of(conj(formulas))
        hyps = conj([universal_closure(f) for f in list(p.premises) + cited_axioms(p)])
        for k in (1, 2, 3):
            env = Env(q=CountThreshold(k))
            for n in (1, 2, 3):
                for _, batch in enumerate_batches(vocab, n):
                    ok = eval_batch(batch, hyps, env)
                    exercised += int(ok.sum())
                    for line in p.lines:
                        holds = eval_batch(batch, universal_closure(line.formula), env)
                        assert not (ok & ~holds).any(), (name, render(line.formula), k, n)
        assert exercised > 0, name
