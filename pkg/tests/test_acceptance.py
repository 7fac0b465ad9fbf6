"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with `pytest tests/test_acceptance.py -v`, or as a script.
"""

import random
import sys
import time

import pytest

from nestedrpq.evaluator import (Evaluator, answers_on_interpretation, certain_answers,
                                 eval_on_interpretation, eval_query)
from nestedrpq.kb import NormalizedTBox, make_abox, normalize_kb, parse_kb
from nestedrpq.loops import LoopTables
from nestedrpq.oracles import (check_run, existential_depth, find_run, nre_pairs, random_abox,
                               random_graph, random_nre, random_query, random_small_nre, random_tbox,
                               run_fixpoint)
from nestedrpq.query import NominalTest, compile_nre, parse_query, reduce_part, single_atom_query
from nestedrpq.reasoner import (ABoxReasoner, FiniteInterpretation, SaturatedTBox, conjunction_abox,
                                materialize_canonical)
from nestedrpq.reductions.atm import corpus, gen_atm_instance, simulate_atm
from nestedrpq.reductions.horn import gen_horn_instance, horn_entails, random_horn
from nestedrpq.reductions.prop import ReductionPipeline, translate_cn2rpq
from nestedrpq.rewriter import rewrite


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return emit


def _named(tuples, inds):
    return {t for t in tuples if set(t) <= inds}


# 1 ---------------------------------------------------------------- engines

def test_criterion_1_engine_agreement(report):
    rng = random.Random(11)
    done = bad = 0
    t0 = time.perf_counter()
    while done < 200:
        t = random_tbox(rng, rng.randint(1, 10))
        if t.axiom_count() > 10:
            continue
        ab = random_abox(rng, rng.randint(1, 8))
        if not ABoxReasoner(SaturatedTBox(t), ab).consistent:
            continue
        e = random_small_nre(rng, 6, 2, nominals=sorted(ab.inds))
        got = certain_answers(single_atom_query(e), (t, ab))
        ref = ReductionPipeline(e, (t, ab)).all_pairs()
        done += 1
        bad += got != ref
    secs = time.perf_counter() - t0
    ok = bad == 0 and secs <= 300
    assert report(1, ok, f"{done - bad}/{done} instances agree, {secs:.1f}s")


# 2 ---------------------------------------------------------------- empty TBox

def test_criterion_2_empty_tbox(report):
    rng = random.Random(3)
    bad = 0
    roles = ("r", "s", "p")
    for _ in range(100):
        ab = random_abox(rng, rng.randint(1, 8), roles=roles)
        q = random_query(rng, 3, 2, roles=roles)
        got = certain_answers(q, (NormalizedTBox(), ab))
        bad += got != answers_on_interpretation(q, FiniteInterpretation.from_abox(ab))
    assert report(2, bad == 0, f"{100 - bad}/100 instances agree")


# 3 ---------------------------------------------------------------- NRE/NNFA

def test_criterion_3_nre_nnfa(report):
    rng = random.Random(1)
    bad = 0
    for _ in range(100):
        e = random_nre(rng, 8)
        p = compile_nre(e)
        rp = reduce_part(p)
        for _ in range(20):
            g = random_graph(rng, 6)
            if not nre_pairs(e, g) == eval_on_interpretation(p, g) == eval_on_interpretation(rp, g):
                bad += 1
                break
    assert report(3, bad == 0, f"{100 - bad}/100 expressions agree on 20 interpretations each")


# 4 ---------------------------------------------------------------- Loop/FLoop

def test_criterion_4_loops(report):
    rng = random.Random(7)
    keys = bad = invariant_bad = 0
    while keys < 300:
        t = random_tbox(rng, rng.randint(1, 6))
        n = compile_nre(random_nre(rng, rng.randint(1, 6), depth=2)).nnfa
        if any(len(a.states) > 4 for a in n.automata):
            continue
        if any(isinstance(l, NominalTest) for a in n.automata for _, l, _ in a.transitions):
            continue
        sat, tab = SaturatedTBox(t), LoopTables(t)
        i = rng.randint(1, len(n.automata))
        st = n.states_of(i)
        c = frozenset(rng.sample(["A", "B", "C"], rng.randint(0, 1)))
        s1 = rng.choice(st)
        floop = rng.random() < 0.5
        target = frozenset(rng.sample(st, rng.randint(1, len(st)))) if floop else rng.choice(st)

        def member(cc, g=frozenset()):
            if floop:
                return tab.in_floop(n, cc, s1, target, g)
            return tab.in_loop(n, cc, s1, target, g)

        mem = member(c)
        keys += 1
        if sat.is_unsat(c):
            bad += not mem
        else:
            interp = materialize_canonical(sat, conjunction_abox(c), 3)
            run = find_run(n, interp, "a", s1, target, (), floop)
            dp = run_fixpoint(n, interp, "a", s1, target, (), floop)
            if run is not None and not check_run(n, interp, run, "a", s1, target, (), floop):
                bad += 1
            elif (run is not None and not mem) or dp != mem:
                bad += 1
        others = [s for j in n.referenced(i) for s in n.states_of(j)]
        g = frozenset(rng.sample(others, rng.randint(0, len(others))))
        if (mem and not member(c, g)) or (member(c, g) and not member(c, frozenset(others))):
            invariant_bad += 1
        if mem and not member(c | {rng.choice("ABC")}):
            invariant_bad += 1
    ok = bad == 0 and invariant_bad == 0
    assert report(4, ok, f"{keys - bad}/{keys} keys agree with run search, "
                         f"{invariant_bad} monotonicity violations")


# 5 ---------------------------------------------------------------- Horn

def test_criterion_5_horn(report):
    rng = random.Random(5)
    bad = entailed = 0
    for _ in range(100):
        h = random_horn(rng, 6, 8)
        ab, e, pair = gen_horn_instance(h)
        got = pair in answers_on_interpretation(single_atom_query(e), FiniteInterpretation.from_abox(ab))
        expected = horn_entails(h.normalized())
        entailed += expected
        bad += got != expected
    assert report(5, bad == 0, f"{100 - bad}/100 theories agree ({entailed} entail the goal)")


# 6 ---------------------------------------------------------------- ATM

def test_criterion_6_atm(report):
    cases = corpus()
    bad = 0
    slowest = 0.0
    for m, expected in cases:
        assert simulate_atm(m) == expected
        for variant in ("dl-lite", "el"):
            kb, q, _ = gen_atm_instance(m, variant)
            t0 = time.perf_counter()
            got = eval_query(q, kb)
            secs = time.perf_counter() - t0
            slowest = max(slowest, secs)
            bad += got != expected or secs > 60
    total = 2 * len(cases)
    alternating = any(m.universal for m, _ in cases)
    ok = bad == 0 and len(cases) >= 6 and alternating
    assert report(6, ok, f"{total - bad}/{total} instances agree, slowest {slowest:.2f}s")


# 7 ---------------------------------------------------------------- test elimination

def test_criterion_7_round_trip(report):
    rng = random.Random(5)
    done = bad = 0
    while done < 50:
        t = random_tbox(rng, rng.randint(1, 8))
        ab = random_abox(rng, rng.randint(1, 5))
        sat = SaturatedTBox(t)
        ar = ABoxReasoner(sat, ab)
        if not ar.consistent:
            continue
        d = existential_depth(sat, [ar.type_of(a) for a in ar.inds])
        if d is None:
            continue
        q = random_query(rng, 2, 2)
        t2, q2 = translate_cn2rpq(q)
        sat2 = SaturatedTBox(t.union(t2))
        ar2 = ABoxReasoner(sat2, ab)
        d2 = existential_depth(sat2, [ar2.type_of(a) for a in ar2.inds])
        inds = set(ab.inds) | q.individuals()
        before = _named(answers_on_interpretation(q, materialize_canonical(sat, ab, d, q.individuals())), inds)
        after = _named(answers_on_interpretation(q2, materialize_canonical(sat2, ab, d2, q.individuals())), inds)
        done += 1
        bad += before != after or before != certain_answers(q, (t, ab))
    assert report(7, bad == 0, f"{done - bad}/{done} instances agree")


# 8 ---------------------------------------------------------------- data scaling

SCALING_TBOX = "A <= exists r.B\nexists r.B <= C\n"
SCALING_QUERY = "q(x) <- (r . <r>)* . r(x, y), B(y)"


def _chain(n):
    inds = [f"a{k}" for k in range(n)]
    return make_abox([("A", inds[k]) for k in range(0, n, 3)],
                     [("r", inds[k], inds[k + 1]) for k in range(n - 1)], inds)


def test_criterion_8_scaling(report):
    t, _ = normalize_kb(parse_kb(SCALING_TBOX))
    q = parse_query(SCALING_QUERY)
    rewritten = rewrite(q, t)
    small = _chain(12)
    ref = _named(answers_on_interpretation(q, materialize_canonical(SaturatedTBox(t), small, 1)),
                 set(small.inds))
    assert Evaluator(t, small).certain_answers(q, rewritten) == ref
    times = {}
    for n in (10, 100, 1000):
        ab = _chain(n)
        t0 = time.perf_counter()
        ans = Evaluator(t, ab).certain_answers(q, rewritten)
        times[n] = time.perf_counter() - t0
        last = 3 * ((n - 1) // 3)   # the last individual in A
        assert ans == {(f"a{k}",) for k in range(last + 1)}
    ratio = times[1000] / times[100]
    ok = ratio <= 100     # 10x the data, at most 100x the time
    detail = ", ".join(f"n={n}: {s:.3f}s" for n, s in times.items())
    assert report(8, ok, f"{len(rewritten)} rewritten queries; {detail}; t(1000)/t(100) = {ratio:.1f} "
                         f"(quadratic bound 100)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
