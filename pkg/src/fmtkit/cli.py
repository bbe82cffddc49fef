"""Command-line front end.

Exit codes: 0 positive verdict, 1 negative verdict (counterexample, REJECT,
FAILS-IN-RANGE, false), 2 usage or parse error, 3 budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from importlib import resources

from . import __version__
from .definability import (
    ProjectionDefinition,
    define_class_at_size,
    delta_check,
    eta,
    eta_prime,
    mcgee_phi,
    sigma_membership,
)
from .errors import EnumerationLimitError, FmtError
from .evaluator import ClassOracle, CountThreshold, Env, eval_sentence, eval_value
from .operations import (
    BUILTIN_OPERATIONS,
    builtin_operation,
    describes,
    is_bijection_invariant,
    is_permutation_invariant,
    parse_operation,
    random_table_operation,
)
from .proofs import check_proof, parse_proof, soundness_scan
from .spectra import CardinalClassSpec, ls_check, spectrum
from .structures import (
    Structure,
    Vocabulary,
    enumerate_structures,
    format_structure,
    isomorphism_classes,
    parse_structure,
    parse_structures,
)
from .syntax import free_vars, parse, render, vocabulary_of

OK, NEGATIVE, USAGE, BUDGET = 0, 1, 2, 3


class UsageError(FmtError):
    pass


# ---------------------------------------------------------------------------
# inputs


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    if path.startswith("builtin:"):
        name = path[len("builtin:"):]
        for sub in ("formulas", "proofs"):
            res = resources.files("fmtkit") / "data" / sub / name
            if res.is_file():
                return res.read_text(encoding="utf-8")
        raise UsageError(f"no built-in file {name}")
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _strip_comments(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if not line.lstrip().startswith("#"))


def _formula(args, flag="formula"):
    text = getattr(args, flag, None)
    path = getattr(args, flag + "_file", None)
    if (text is None) == (path is None):
        raise UsageError(f"give exactly one of --{flag.replace('_', '-')} and --{flag.replace('_', '-')}-file")
    return parse(text if text is not None else _strip_comments(_read(path)))


def _env(args) -> Env:
    return Env(q=CountThreshold(args.q)) if getattr(args, "q", None) else Env()


def builtin_class(name: str, vocabulary: Vocabulary | None = None) -> ClassOracle:
    """The named classes reachable from the command line (over ``P/1`` unless told otherwise)."""
    v = vocabulary or Vocabulary((("P", 1),))
    if name == "nonempty-P":
        return ClassOracle(name, v, lambda s: bool(s.relations["P"]))
    if name == "even-P":
        return ClassOracle(name, v, lambda s: len(s.relations["P"]) % 2 == 0)
    if name == "even-size":
        return ClassOracle(name, v, lambda s: s.size % 2 == 0)
    if name == "all":
        return ClassOracle(name, v, lambda s: True)
    if name == "empty":
        return ClassOracle(name, v, lambda s: False)
    raise UsageError(f"unknown class {name!r}; choose from nonempty-P, even-P, even-size, all, empty")


def _projection(sentence, hidden: str | None, visible: Vocabulary | None, name: str) -> ProjectionDefinition:
    hidden_v = Vocabulary.parse(hidden or "")
    if visible is None:
        visible = vocabulary_of(sentence).minus(hidden_v)
    return ProjectionDefinition(visible.union(hidden_v), visible, sentence, "exists", name)


# ---------------------------------------------------------------------------
# output


class Report:
    def __init__(self, fmt: str):
        self.fmt = fmt
        self.data: dict = {}
        self.lines: list[str] = []

    def emit(self, text: str = "", **data):
        if text:
            self.lines.append(text)
        self.data.update(data)

    def write(self, out):
        if self.fmt == "json":
            out.write(json.dumps(self.data, sort_keys=True, indent=2) + "\n")
        else:
            out.write("\n".join(self.lines) + ("\n" if self.lines else ""))


def _tuples(ts) -> list[list[int]]:
    return [list(t) for t in sorted(ts)]


def _structure_data(s: Structure) -> dict:
    return {"size": s.size, "relations": {name: _tuples(s.relations[name]) for name in s.vocabulary.names}}


# ---------------------------------------------------------------------------
# verbs


def cmd_eval(args, rep: Report) -> int:
    phi = _formula(args)
    structures = parse_structures(_read(args.structure))
    values = [eval_sentence(s, phi, _env(args)) for s in structures]
    for v in values:
        rep.emit("true" if v else "false")
    rep.emit(values=values)
    return OK if all(values) else NEGATIVE


def cmd_value(args, rep: Report) -> int:
    phi = _formula(args)
    s = parse_structure(_read(args.structure))
    variables = args.vars.split(",") if args.vars else sorted(free_vars(phi))
    val = eval_value(s, phi, variables, _env(args))
    rep.emit("(" + ",".join(variables) + "): " + "; ".join("(" + ",".join(map(str, t)) + ")" for t in sorted(val.tuples)),
             variables=list(variables), tuples=_tuples(val.tuples))
    return OK


def _spectrum_target(args):
    if args.cls:
        vocab = Vocabulary.parse(args.vocab) if args.vocab else None
        return builtin_class(args.cls, vocab), None
    phi = _formula(args)
    if args.hidden:
        visible = Vocabulary.parse(args.vocab) if args.vocab is not None else None
        return _projection(phi, args.hidden, visible, args.formula_file or render(phi)), None
    vocab = Vocabulary.parse(args.vocab) if args.vocab else vocabulary_of(phi)
    return phi, vocab


def cmd_spectrum(args, rep: Report) -> int:
    target, vocab = _spectrum_target(args)
    r = spectrum(target, args.max_size, _env(args), vocabulary=vocab, budget=args.budget)
    rep.emit("realized: {" + ",".join(map(str, r.realized)) + "}")
    rep.emit("size  models  classes")
    for n in range(1, args.max_size + 1):
        rep.emit(f"{n:>4}  {r.model_counts[n]:>6}  {r.class_counts[n]:>7}")
    if r.realized:
        rep.emit(f"least model size: {r.min_size}; largest realized size in window: {r.largest} (no claim beyond {args.max_size})")
    else:
        rep.emit(f"no model of size <= {args.max_size} (inconclusive beyond)")
    data = r.to_dict()
    if args.formula_file:
        data["name"] = args.formula_file
    rep.emit(**data)
    return OK


def cmd_ls_check(args, rep: Report) -> int:
    texts = list(args.formula or [])
    paths = list(args.formula_file or [])
    sentences = [parse(t) for t in texts] + [parse(_strip_comments(_read(p))) for p in paths]
    if not sentences:
        raise UsageError("give at least one --formula or --formula-file")
    C, D = CardinalClassSpec.parse(args.C), CardinalClassSpec.parse(args.D)
    r = ls_check(sentences, C, D, args.max_size, _env(args), args.budget, names=texts + paths)
    rows = []
    for res in r.results:
        rep.emit(f"{res.verdict.value}  realized={{{','.join(map(str, res.realized))}}}  {res.name}")
        rows.append({"name": res.name, "verdict": res.verdict.value, "realized": list(res.realized)})
    rep.emit(C=str(C), D=str(D), max_size=args.max_size, results=rows)
    return NEGATIVE if any(v.value == "FAILS-IN-RANGE" for v in r.verdicts()) else OK


def _operation(args, size: int | None = None):
    if args.builtin:
        if args.builtin not in BUILTIN_OPERATIONS:
            raise UsageError(f"unknown operation {args.builtin!r}; choose from {', '.join(BUILTIN_OPERATIONS)}")
        return builtin_operation(args.builtin, args.arity)
    if args.op:
        return parse_operation(_read(args.op))
    raise UsageError("give --op FILE or --builtin NAME")


def _report_invariance(rep: Report, name: str, r) -> dict:
    if r.invariant:
        rep.emit(f"{name}: invariant")
        return {"name": name, "invariant": True}
    fmt = lambda a: "{" + "; ".join("(" + ",".join(map(str, t)) + ")" for t in sorted(a)) + "}"  # noqa: E731
    rep.emit(
        f"{name}: counterexample at size {r.size}, permutation {list(r.permutation.mapping)}, "
        f"inputs {' | '.join(fmt(a) for a in r.inputs)}: f(pi A) = {fmt(r.actual)}, pi f(A) = {fmt(r.expected)}"
    )
    return {
        "name": name,
        "invariant": False,
        "size": r.size,
        "permutation": list(r.permutation.mapping),
        "inputs": [_tuples(a) for a in r.inputs],
        "f_of_moved": _tuples(r.actual),
        "moved_f": _tuples(r.expected),
    }


def cmd_invariance(args, rep: Report) -> int:
    results = []
    if args.random:
        rng = random.Random(args.seed)
        arities = tuple(int(a) for a in args.inputs.split(","))
        for i in range(args.random):
            op = random_table_operation(rng, args.max_size, arities, args.output)
            results.append(_report_invariance(rep, f"random-{i} ({op.name})", is_permutation_invariant(op, args.budget)))
    else:
        op = _operation(args)
        if hasattr(op, "family"):
            r = is_bijection_invariant(op, args.max_size, args.budget)
        else:
            r = is_permutation_invariant(op, args.budget)
        results.append(_report_invariance(rep, args.builtin or args.op, r))
    rep.emit(results=results)
    return OK if all(r["invariant"] for r in results) else NEGATIVE


def cmd_describes(args, rep: Report) -> int:
    phi = _formula(args)
    op = _operation(args)
    if hasattr(op, "family"):
        sizes = range(1, args.max_size + 1)
        locals_ = [op.at(n) for n in sizes]
    else:
        locals_ = [op]
    preds = args.predicates.split(",")
    variables = args.vars.split(",") if args.vars else None
    for f in locals_:
        r = describes(phi, f, preds, variables, _env(args), args.budget)
        if not r:
            fmt = lambda a: "{" + "; ".join("(" + ",".join(map(str, t)) + ")" for t in sorted(a)) + "}"  # noqa: E731
            rep.emit(
                f"no: at size {f.size}, inputs {' | '.join(fmt(a) for a in r.inputs)}: "
                f"operation gives {fmt(r.expected)}, formula gives {fmt(r.actual)}",
                describes=False,
                size=f.size,
                inputs=[_tuples(a) for a in r.inputs],
                expected=_tuples(r.expected),
                actual=_tuples(r.actual),
            )
            return NEGATIVE
    rep.emit("yes", describes=True, sizes=[f.size for f in locals_])
    return OK


def cmd_scott(args, rep: Report) -> int:
    phi = eta_prime(args.alpha) if args.prime else eta(args.alpha)
    rep.emit(render(phi), formula=render(phi))
    return OK


def cmd_mcgee(args, rep: Report) -> int:
    if args.structure:
        s = parse_structure(_read(args.structure))
        cs = mcgee_phi(s)
        rep.emit(render(cs.sentence), sentence=render(cs.sentence))
        return OK
    if not args.cls or args.size is None:
        raise UsageError("give --structure FILE, or --class NAME with --size")
    vocab = Vocabulary.parse(args.vocab) if args.vocab else None
    d = define_class_at_size(builtin_class(args.cls, vocab), args.size, args.budget)
    rep.emit(f"# {len(d.members)} member classes, {len(d.non_members)} non-member classes at size {d.size}")
    rep.emit("positive: " + render(d.positive.sentence))
    rep.emit("negative: " + render(d.negative.sentence))
    rep.emit(
        positive=render(d.positive.sentence),
        negative=render(d.negative.sentence),
        members=len(d.members),
        non_members=len(d.non_members),
        size=d.size,
    )
    return OK


def cmd_sigma_member(args, rep: Report) -> int:
    phi = _formula(args)
    s = parse_structure(_read(args.structure))
    d = _projection(phi, args.hidden, s.vocabulary, "d")
    member = sigma_membership(d, s, _env(args), args.budget)
    rep.emit("member" if member else "not a member", member=member)
    return OK if member else NEGATIVE


def cmd_delta_check(args, rep: Report) -> int:
    visible = Vocabulary.parse(args.visible)
    pos = _projection(parse(_strip_comments(_read(args.pos))), args.pos_hidden, visible, args.pos)
    neg = _projection(parse(_strip_comments(_read(args.neg))), args.neg_hidden, visible, args.neg)
    r = delta_check(pos, neg, args.max_size, _env(args), args.budget)
    if r.certified:
        rep.emit(f"certified up to size {args.max_size} ({r.checked} structures)")
    else:
        rep.emit(f"not certified: {len(r.violations)} violations shown")
        for s, a, b in r.violations:
            rep.emit(f"  pos={a} neg={b}: {format_structure(s).strip()}".replace("\n", " / "))
    rep.emit(
        certified=r.certified,
        checked=r.checked,
        violations=[{"structure": _structure_data(s), "pos": a, "neg": b} for s, a, b in r.violations],
    )
    return OK if r.certified else NEGATIVE


def cmd_proof_check(args, rep: Report) -> int:
    p = parse_proof(_read(args.proof))
    v = check_proof(p)
    rep.emit(str(v), accepted=v.accepted, line=v.line, reason=v.reason)
    return OK if v.accepted else NEGATIVE


def cmd_soundness_scan(args, rep: Report) -> int:
    axioms = [int(a) for a in args.axioms.split(",")]
    found = soundness_scan(args.k, args.max_size, axioms, args.budget)
    by_axiom = {a: [c for c in found if c.axiom == a] for a in axioms}
    for a in axioms:
        rep.emit(f"ax{a}: {len(by_axiom[a])} counterexamples")
        for c in by_axiom[a][: args.show]:
            rep.emit(f"  {render(c.instance)}  in  {format_structure(c.structure).strip()}".replace("\n", " / "))
    rep.emit(
        counts={f"ax{a}": len(by_axiom[a]) for a in axioms},
        examples=[
            {"axiom": c.axiom, "instance": render(c.instance), "structure": _structure_data(c.structure)}
            for a in axioms
            for c in by_axiom[a][: args.show]
        ],
    )
    return NEGATIVE if found else OK


def cmd_enumerate(args, rep: Report) -> int:
    v = Vocabulary.parse(args.vocab)
    items = isomorphism_classes(v, args.size, args.budget) if args.classes else list(enumerate_structures(v, args.size, args.budget))
    for s in items:
        rep.emit(format_structure(s).rstrip())
    rep.emit(count=len(items), structures=[_structure_data(s) for s in items])
    return OK


# ---------------------------------------------------------------------------
# parser


def _formula_flags(p):
    p.add_argument("--formula", help="formula text")
    p.add_argument("--formula-file", help="file holding one formula ('#' lines are comments); builtin:NAME for shipped files")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--budget", type=int, default=10**7, help="maximum structure/expansion visits")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--q", type=int, help="read the schematic Q as 'at least K'")

    parser = argparse.ArgumentParser(prog="fmtkit", description="Finite model theory workbench.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("eval", parents=[common], help="truth of a sentence in each structure of a file")
    p.add_argument("--structure", required=True)
    _formula_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("value", parents=[common], help="semantic value of a formula")
    p.add_argument("--structure", required=True)
    p.add_argument("--vars", help="comma-separated output variables (default: free variables, sorted)")
    _formula_flags(p)
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("spectrum", parents=[common], help="model sizes in [1..N]")
    _formula_flags(p)
    p.add_argument("--class", dest="cls", help="built-in class instead of a formula")
    p.add_argument("--vocab", help="vocabulary, e.g. 'P/1,R/2' (visible vocabulary with --hidden)")
    p.add_argument("--hidden", help="existentially quantified symbols, e.g. 'S/2'")
    p.add_argument("--max-size", type=int, required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("ls-check", parents=[common], help="finite-window LS(C,D) verdicts")
    p.add_argument("--formula", action="append")
    p.add_argument("--formula-file", action="append")
    p.add_argument("--C", required=True, help="'{1,2}', '[2,5]', 'even', 'odd', 'r mod m' or 'all'")
    p.add_argument("--D", required=True)
    p.add_argument("--max-size", type=int, required=True)
    p.set_defaults(func=cmd_ls_check)

    p = sub.add_parser("invariance", parents=[common], help="permutation invariance of an operation")
    p.add_argument("--op", help="operation table file")
    p.add_argument("--builtin", help="and, or, exists, complement")
    p.add_argument("--arity", type=int, default=1)
    p.add_argument("--max-size", type=int, default=3)
    p.add_argument("--random", type=int, default=0, help="check this many random table operations instead")
    p.add_argument("--inputs", default="1", help="input arities for --random")
    p.add_argument("--output", type=int, default=1, help="output arity for --random")
    p.set_defaults(func=cmd_invariance)

    p = sub.add_parser("describes", parents=[common], help="does a formula describe an operation")
    _formula_flags(p)
    p.add_argument("--op")
    p.add_argument("--builtin")
    p.add_argument("--arity", type=int, default=1)
    p.add_argument("--max-size", type=int, default=3)
    p.add_argument("--predicates", required=True, help="symbols read as the inputs, e.g. 'P0,P1'")
    p.add_argument("--vars")
    p.set_defaults(func=cmd_describes)

    p = sub.add_parser("scott", parents=[common], help="print eta_a (or eta'_a with --prime)")
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--prime", action="store_true")
    p.set_defaults(func=cmd_scott)

    p = sub.add_parser("mcgee", parents=[common], help="characterizing sentence of a structure, or a class at one size")
    p.add_argument("--structure")
    p.add_argument("--class", dest="cls")
    p.add_argument("--vocab")
    p.add_argument("--size", type=int)
    p.set_defaults(func=cmd_mcgee)

    p = sub.add_parser("sigma-member", parents=[common], help="membership in a projection class")
    p.add_argument("--structure", required=True)
    _formula_flags(p)
    p.add_argument("--hidden", required=True)
    p.set_defaults(func=cmd_sigma_member)

    p = sub.add_parser("delta-check", parents=[common], help="certify a pair of projection definitions as complements")
    p.add_argument("--pos", required=True)
    p.add_argument("--neg", required=True)
    p.add_argument("--pos-hidden", default="")
    p.add_argument("--neg-hidden", default="")
    p.add_argument("--visible", default="")
    p.add_argument("--max-size", type=int, required=True)
    p.set_defaults(func=cmd_delta_check)

    p = sub.add_parser("proof-check", parents=[common], help="check a proof file")
    p.add_argument("proof")
    p.set_defaults(func=cmd_proof_check)

    p = sub.add_parser("soundness-scan", parents=[common], help="Keisler axioms under 'at least k'")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-size", type=int, required=True)
    p.add_argument("--axioms", default="1,2,3,4")
    p.add_argument("--show", type=int, default=3, help="counterexamples printed per axiom")
    p.set_defaults(func=cmd_soundness_scan)

    p = sub.add_parser("enumerate", parents=[common], help="list structures (or class representatives)")
    p.add_argument("--vocab", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--classes", action="store_true")
    p.set_defaults(func=cmd_enumerate)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    rep = Report(args.format)
    try:
        code = args.func(args, rep)
    except EnumerationLimitError as exc:
        err.write(f"fmtkit: {exc}\n")
        return BUDGET
    except (FmtError, ValueError, OSError) as exc:
        err.write(f"fmtkit: {exc}\n")
        return USAGE
    rep.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
