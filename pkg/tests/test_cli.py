import io
import json

import pytest

from fmtkit.cli import BUDGET, NEGATIVE, OK, USAGE, main
from fmtkit.corpus import random_sentences
from fmtkit.syntax import render


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def structure_file(tmp_path):
    path = tmp_path / "s.str"
    path.write_text("size 3\nrel P/1: (0); (1)\n")
    return str(path)


def test_eval_true_and_false(structure_file):
    assert run("eval", "--structure", structure_file, "--formula", "E>=2 x. P(x)")[:2] == (OK, "true\n")
    code, out, _ = run("eval", "--structure", structure_file, "--formula", "E>=3 x. P(x)")
    assert code == NEGATIVE and out.strip() == "false"


def test_value(structure_file):
    code, out, _ = run("value", "--structure", structure_file, "--formula", "P(x)", "--format", "json")
    assert code == OK
    assert json.loads(out)


def test_spectrum_of_ordered_eta_prime():
    code, out, _ = run("spectrum", "--formula-file", "builtin:etaprime3.fml", "--max-size", "4", "--format", "json")
    assert code == OK
    data = json.loads(out)
    assert data["realized"] == [3]
    assert data["model_counts"]["3"] == 6


def test_spectrum_of_builtin_class():
    code, out, _ = run("spectrum", "--class", "even-size", "--max-size", "4", "--format", "json")
    assert code == OK and json.loads(out)["realized"] == [2, 4]


def test_proof_check_verdicts():
    code, out, _ = run("proof-check", "builtin:mp.prf")
    assert code == OK and out.strip() == "ACCEPT"
    code, out, _ = run("proof-check", "builtin:bad_mp.prf")
    assert code == NEGATIVE and out.startswith("REJECT at line 3")


def test_invariance_and_describes():
    assert run("invariance", "--builtin", "and", "--max-size", "2")[0] == OK
    code, _, _ = run("describes", "--builtin", "and", "--formula", "P0(x)", "--predicates", "P0,P1", "--max-size", "2")
    assert code == NEGATIVE
    code, _, _ = run("describes", "--builtin", "and", "--formula", "P0(x) & P1(x)", "--predicates", "P0,P1", "--max-size", "2")
    assert code == OK


def test_ls_check_fails_in_range():
    code, out, _ = run("ls-check", "--formula-file", "builtin:size2.fml", "--C", "{2}", "--D", "{1}", "--max-size", "3")
    assert code == NEGATIVE and "FAILS-IN-RANGE" in out


def test_soundness_scan_exit_codes():
    assert run("soundness-scan", "--k", "3", "--max-size", "3", "--axioms", "1,3")[0] == OK
    assert run("soundness-scan", "--k", "3", "--max-size", "3", "--axioms", "4")[0] == NEGATIVE


def test_usage_errors():
    assert run("frobnicate")[0] == USAGE
    assert run("spectrum", "--max-size", "3")[0] == USAGE
    code, _, err = run("eval", "--structure", "/nonexistent/file", "--formula", "true")
    assert code == USAGE and err.startswith("fmtkit:")
    code, _, err = run("spectrum", "--formula", "exists x. (P(x)", "--max-size", "2")
    assert code == USAGE


def test_budget_exit_code():
    code, _, err = run("spectrum", "--formula", "exists x. R(x,x)", "--max-size", "4", "--budget", "100")
    assert code == BUDGET and "budget" in err


def test_json_output_is_deterministic():
    argv = ("enumerate", "--vocab", "R/2", "--size", "2", "--classes", "--format", "json")
    first, second = run(*argv), run(*argv)
    assert first == second
    json.loads(first[1])
    argv = ("invariance", "--random", "5", "--max-size", "2", "--seed", "3", "--format", "json")
    assert run(*argv) == run(*argv)


def test_random_corpus_is_seeded():
    a = [render(phi) for phi in random_sentences(50, seed=1)]
    assert a == [render(phi) for phi in random_sentences(50, seed=1)]
    assert a != [render(phi) for phi in random_sentences(50, seed=2)]
