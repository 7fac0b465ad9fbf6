"""Command line front end: `nrpq <command> ...`.

Exit status is 0 on success, 1 on user errors (bad files, parse errors,
engine/query mismatches) and 2 when an internal invariant breaks.
"""

from __future__ import annotations

import argparse
import itertools
import json
import random
import sys
import time
from pathlib import Path

from . import __version__
from .errors import InvariantError, NrpqError
from .evaluator import Evaluator, answers_on_interpretation
from .kb import (ConceptAssertion, KnowledgeBase, Name, NormalizedABox, NormalizedTBox, Role,
                 RoleAssertion, format_kb, normalize_kb, parse_kb)
from .loops import format_entry
from .query import (CN2RPQ, ConceptTest, Ind, RoleAtom, Sym, atom_nre, compile_nre,
                    eliminate_nominal_tests, format_query, parse_query, part_to_nre)
from .reasoner import ABoxReasoner, FiniteInterpretation, SaturatedTBox, materialize_canonical
from .reductions.atm import corpus, gen_atm_instance, parse_atm
from .reductions.horn import gen_horn_instance, parse_horn, random_horn
from .reductions.prop import ReductionPipeline, translate_cn2rpq
from .rewriter import Rewriter

ENGINES = ("rewrite", "reduction", "graph")
EMPTY_TEST = Sym(ConceptTest("NoAcceptingRun"))


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise NrpqError(f"file not found: {path}") from None
    except IsADirectoryError:
        raise NrpqError(f"not a file: {path}") from None


def _load_kb(path: str | None) -> KnowledgeBase:
    return parse_kb(_read(path)) if path else KnowledgeBase()


def _load_query(path: str) -> CN2RPQ:
    return parse_query(_read(path))


def _fmt_tuple(t: tuple) -> str:
    return ",".join(t)


# ---------------------------------------------------------------- engines

def _answer_rewrite(q: CN2RPQ, t: NormalizedTBox, a: NormalizedABox) -> set[tuple]:
    q2, ext = eliminate_nominal_tests(q)
    if ext:
        a = a.extend(concepts=ext)
    ev = Evaluator(t, a, q.individuals())
    if q.boolean:
        return {()} if ev.eval_query(q2) else set()
    return ev.certain_answers(q2)


def _answer_reduction(q: CN2RPQ, t: NormalizedTBox, a: NormalizedABox) -> set[tuple]:
    if len(q.atoms) != 1 or not isinstance(q.atoms[0], RoleAtom):
        raise NrpqError("engine 'reduction' answers single-atom queries E(s, t) only")
    atom = q.atoms[0]
    a = a.extend(inds=q.individuals())
    if not ABoxReasoner(SaturatedTBox(t), a).consistent:
        return _all_tuples(q, a.inds)
    pairs = ReductionPipeline(atom_nre(atom), (t, a)).all_pairs()
    out = set()
    for x, y in pairs:
        env: dict = {}
        ok = True
        for term, val in ((atom.left, x), (atom.right, y)):
            if isinstance(term, Ind):
                ok &= term.name == val
            elif env.setdefault(term, val) != val:
                ok = False
        if ok:
            out.add(tuple(env[v] for v in q.answer_vars))
    return out


def _answer_graph(q: CN2RPQ, t: NormalizedTBox, a: NormalizedABox, depth: int | None) -> set[tuple]:
    if depth is None:
        if t.axiom_count():
            raise NrpqError("engine 'graph' needs an empty TBox or --depth for a materialization")
        return answers_on_interpretation(q, FiniteInterpretation.from_abox(a))
    sat = SaturatedTBox(t)
    interp = materialize_canonical(sat, a, depth, q.individuals())
    named = set(interp.inds.values())
    return {tup for tup in answers_on_interpretation(q, interp) if all(x in named for x in tup)}


def _all_tuples(q: CN2RPQ, inds) -> set[tuple]:
    return set(itertools.product(sorted(inds), repeat=len(q.answer_vars)))


def answer(q: CN2RPQ, kb: KnowledgeBase, engine: str = "rewrite", depth: int | None = None) -> set[tuple]:
    t, a = normalize_kb(kb)
    if engine == "rewrite":
        return _answer_rewrite(q, t, a)
    if engine == "reduction":
        return _answer_reduction(q, t, a)
    if engine == "graph":
        return _answer_graph(q, t, a, depth)
    raise NrpqError(f"unknown engine {engine!r}")


# ---------------------------------------------------------------- commands

def cmd_answer(args, out) -> int:
    t0 = time.perf_counter()
    kb = _load_kb(args.kb)
    q = _load_query(args.query)
    t1 = time.perf_counter()
    res = answer(q, kb, args.engine, args.depth)
    t2 = time.perf_counter()
    rows = sorted(res)
    if args.json:
        doc = {"engine": args.engine, "query": q.name, "boolean": q.boolean,
               "answer_vars": [v.name for v in q.answer_vars],
               "answers": [list(r) for r in rows],
               "timings": {"parse_s": round(t1 - t0, 6), "answer_s": round(t2 - t1, 6)}}
        if q.boolean:
            doc["entailed"] = bool(rows)
        out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    elif q.boolean:
        out.write(("true" if rows else "false") + "\n")
    else:
        for r in rows:
            out.write(_fmt_tuple(r) + "\n")
    return 0


def cmd_check_sat(args, out) -> int:
    t, a = normalize_kb(_load_kb(args.kb))
    ok = ABoxReasoner(SaturatedTBox(t), a).consistent
    out.write(("sat" if ok else "unsat") + "\n")
    return 0


def cmd_rewrite(args, out) -> int:
    t, _ = normalize_kb(_load_kb(args.kb))
    q = _load_query(args.query)
    q2, ext = eliminate_nominal_tests(q)
    if ext:
        raise NrpqError("rewrite does not take nominal tests; use answer instead")
    qs = Rewriter(t).rewrite(q2, args.limit)
    for line in sorted(format_query(x) for x in qs):
        out.write(line + "\n")
    return 0


def cmd_translate(args, out) -> int:
    q = _load_query(args.query)
    q2, ext = eliminate_nominal_tests(q)
    if ext:
        raise NrpqError("translate does not take nominal tests")
    t2, q3 = translate_cn2rpq(q2)
    out.write(t2.format())
    out.write("\n" + format_query(q3) + "\n")
    return 0


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_gen_horn(args, out) -> int:
    if args.theory:
        h = parse_horn(_read(args.theory))
    else:
        h = random_horn(random.Random(args.seed))
    abox, e, (a, b) = gen_horn_instance(h)
    kb = KnowledgeBase((), tuple(_abox_assertions(abox)), "plain")
    q = CN2RPQ((), (RoleAtom(compile_nre(e), Ind(a), Ind(b), e),), "horn")
    d = Path(args.out)
    _write(d / "horn.theory", h.format())
    _write(d / "horn.kb", format_kb(kb))
    _write(d / "horn.nrpq", format_query(q) + "\n")
    out.write(f"wrote {d / 'horn.kb'} {d / 'horn.nrpq'}; pair {a},{b}\n")
    return 0


def cmd_gen_atm(args, out) -> int:
    if args.machine:
        m = parse_atm(_read(args.machine))
    else:
        named = {m.name: m for m, _ in corpus()}
        if args.corpus not in named:
            raise NrpqError(f"unknown corpus machine {args.corpus!r}; have {', '.join(sorted(named))}")
        m = named[args.corpus]
    kb, q, a = gen_atm_instance(m, args.variant)
    d = Path(args.out)
    note = ""
    if part_to_nre(q.atoms[0].part) is None:
        # the language is empty; NRE syntax has no symbol for that, so use a
        # test on a name the KB does not mention
        q = CN2RPQ((), (RoleAtom(compile_nre(EMPTY_TEST), Ind(a), Ind(a), EMPTY_TEST),), q.name)
        note = " (query language is empty)"
    _write(d / f"{m.name}.atm", m.format())
    _write(d / f"{m.name}.kb", format_kb(kb))
    _write(d / f"{m.name}.nrpq", format_query(q) + "\n")
    out.write(f"wrote {d / (m.name + '.kb')} {d / (m.name + '.nrpq')}; individual {a}{note}\n")
    return 0


def cmd_eval_graph(args, out) -> int:
    kb = parse_kb(_read(args.graph))
    if kb.tbox:
        raise NrpqError("a graph file holds assertions only")
    _, a = normalize_kb(kb)
    q = _load_query(args.query)
    rows = sorted(answers_on_interpretation(q, FiniteInterpretation.from_abox(a)))
    if q.boolean:
        out.write(("true" if rows else "false") + "\n")
    else:
        for r in rows:
            out.write(_fmt_tuple(r) + "\n")
    return 0


def cmd_dump_loops(args, out) -> int:
    t, a = normalize_kb(_load_kb(args.kb))
    q = _load_query(args.query)
    q2, ext = eliminate_nominal_tests(q)
    ev = Evaluator(t, a.extend(concepts=ext), q.individuals())
    if ev.consistent:
        if q2.boolean:
            ev.eval_query(q2)
        else:
            ev.certain_answers(q2)
    for line in sorted(format_entry(k, v) for k, v in ev.tables.entries()):
        out.write(line + "\n")
    return 0


def _abox_assertions(abox: NormalizedABox):
    for name, ind in sorted(abox.concepts):
        yield ConceptAssertion(Name(name), ind)
    for p, x, y in sorted(abox.roles):
        yield RoleAssertion(Role(p), x, y)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nrpq", description="Nested regular path queries over DL knowledge bases.")
    p.add_argument("--version", action="version", version=f"nrpq {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("answer", help="certain answers of a query")
    s.add_argument("--kb", help="KB file (empty KB if omitted)")
    s.add_argument("--query", required=True)
    s.add_argument("--engine", choices=ENGINES, default="rewrite")
    s.add_argument("--depth", type=int, help="materialization depth for --engine graph")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_answer)

    s = sub.add_parser("check-sat", help="KB consistency")
    s.add_argument("--kb", required=True)
    s.set_defaults(func=cmd_check_sat)

    s = sub.add_parser("rewrite", help="print the rewritten query set")
    s.add_argument("--kb", required=True)
    s.add_argument("--query", required=True)
    s.add_argument("--limit", type=int, help="stop after this many queries")
    s.set_defaults(func=cmd_rewrite)

    s = sub.add_parser("translate", help="TBox and plain query for a nested query")
    s.add_argument("--query", required=True)
    s.set_defaults(func=cmd_translate)

    g = sub.add_parser("gen", help="hardness instance generators")
    gs = g.add_subparsers(dest="generator", required=True)
    s = gs.add_parser("horn", help="Horn theory instance")
    s.add_argument("--theory", help="Horn theory file; random if omitted")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_gen_horn)
    s = gs.add_parser("atm", help="alternating Turing machine instance")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--machine", help="machine file")
    src.add_argument("--corpus", help="name of a built-in machine")
    s.add_argument("--variant", choices=("dl-lite", "el"), default="dl-lite")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_gen_atm)

    s = sub.add_parser("eval-graph", help="evaluate over a plain graph (closed world)")
    s.add_argument("--graph", required=True)
    s.add_argument("--query", required=True)
    s.set_defaults(func=cmd_eval_graph)

    s = sub.add_parser("dump-loops", help="answer a query and list the Loop/FLoop entries used")
    s.add_argument("--kb", required=True)
    s.add_argument("--query", required=True)
    s.set_defaults(func=cmd_dump_loops)
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except InvariantError as e:
        print(f"nrpq: internal error: {e}", file=sys.stderr)
        return 2
    except (NrpqError, ValueError) as e:
        print(f"nrpq: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
