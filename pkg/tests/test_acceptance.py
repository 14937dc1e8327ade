"""The nine acceptance criteria, each at its stated size, tolerance and time limit.

Every test prints one line ``CRITERION n: PASS|FAIL ...`` (also collected in
the terminal summary).  Exact equality is the tolerance throughout.
"""
import random
import time

import numpy as np
import pytest

from _support import flat_line, level, random_crystal, random_lifting
from conftest import ACCEPTANCE_LINES
from crystalcoh.cechalex import homotopy_check, poincare_lemma
from crystalcoh.compare import ExperimentSpec, base_change_check, bo_presentation, bo_torsion_experiment, compare_derham_ca
from crystalcoh.crystal import check_quasi_nilpotent, matmul, matrices_equal, taylor_transport
from crystalcoh.envelope import SchemePresentation, build_envelope, same_presentation
from crystalcoh.oracles import pd_axiom_trial, snf_valuations_oracle
from crystalcoh.ring import snf_dense, zmod


def report(n, ok, detail, seconds, limit):
    in_time = seconds < limit
    line = f"CRITERION {n}: {'PASS' if ok and in_time else 'FAIL'}  {detail}  [{seconds:.1f} s, limit {limit} s]"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, detail
    assert in_time, f"took {seconds:.1f} s, limit {limit} s"


def flat(p, names):
    return SchemePresentation.from_strings(p, 1, names, [])


def test_criterion_1_pd_axioms():
    t0 = time.perf_counter()
    rng = random.Random(20240601)
    done = failures = skipped = 0
    cases = [(p, e) for p in (2, 3, 5) for e in (1, 2, 3)]
    while done < 1000:
        p, e = cases[(done + skipped) % len(cases)]
        t = pd_axiom_trial(rng, p, e)
        if t.skipped:
            skipped += 1
            continue
        done += 1
        failures += not t.ok
    report(1, failures == 0, f"{done} non-lossy trials, {failures} failures ({skipped} lossy draws redrawn)",
           time.perf_counter() - t0, 10)


def test_criterion_2_homotopy_identities():
    t0 = time.perf_counter()
    rep = homotopy_check(4)
    report(2, rep.ok, rep.detail, time.perf_counter() - t0, 30)


def test_criterion_3_poincare_lemma():
    t0 = time.perf_counter()
    details, ok = [], True
    for names in (["x"], ["x", "y"]):
        runs = {}
        for d in (8, 10):
            env = build_envelope(flat(2, names), 2, d)
            rep = poincare_lemma(env)
            ok &= rep.ok
            runs[d] = {w: v for w, v in rep.witness["H0"].items() if w <= 8}
        stable = runs[8] == runs[10]
        ok &= stable
        details.append(f"A^{len(names)}: H^0 = D, H^>0 = 0, stable={stable}")
    report(3, ok, "; ".join(details), time.perf_counter() - t0, 120)


def test_criterion_4_main_comparison():
    t0 = time.perf_counter()
    bad = []
    runs = 0
    for names in (["x"], ["x", "y"]):
        for p in (2, 3):
            for e in (1, 2):
                rep = compare_derham_ca(ExperimentSpec(flat(p, names), e, 8, 2))
                runs += 1
                if not rep.ok:
                    bad.append(f"A^{len(names)} p={p} e={e}: {rep.status}")
    report(4, not bad, f"{runs} comparisons (de Rham = Tot = CA row in H^0, H^1, d=8 and 10)" + (f"; {bad}" if bad else ""),
           time.perf_counter() - t0, 600)


def test_criterion_5_transport_cocycle():
    t0 = time.perf_counter()
    rng = random.Random(7)
    env = flat_line(2, 2, 6)
    lvl = level(env, 2)
    B = lvl.env
    fails = 0
    for _ in range(20):
        c = random_crystal(env, rng)
        assert check_quasi_nilpotent(c).ok
        f1, f2, f3 = (random_lifting(env, lvl, rng) for _ in range(3))
        t12, t23, t13 = taylor_transport(c, f1, f2), taylor_transport(c, f2, f3), taylor_transport(c, f1, f3)
        eye = [[B.ambient.one() if i == j else B.ambient.zero() for j in range(c.rank)] for i in range(c.rank)]
        if not matrices_equal(B, matmul(B, t23, t12), t13) or not matrices_equal(B, taylor_transport(c, f2, f2), eye):
            fails += 1
    report(5, fails == 0, f"20 random triples, {fails} failures", time.perf_counter() - t0, 60)


def test_criterion_6_bo_torsion_at_stated_truncation():
    """Run exactly as stated: p in {2, 3}, e = 2, d in {4, 6}.

    Expected to be red: the first torsion class sits in weight 4p (see the
    supplementary test below and notes/decisions.md).
    """
    t0 = time.perf_counter()
    results = []
    for p in (2, 3):
        rep = bo_torsion_experiment(p, 2, 4, margin=2)  # runs d = 4 and d = 6
        results.append((p, rep.status, [c.name for c in rep.checks if c.status != "pass"]))
    ok = all(s == "pass" for _, s, _ in results)
    detail = "; ".join(f"p={p}: {s}" + (f" ({len(f)} checks red: no torsion in weights <= 6)" if f else "") for p, s, f in results)
    report(6, ok, detail, time.perf_counter() - t0, 300)


@pytest.mark.parametrize("p", [2, 3])
def test_criterion_6_supplement_torsion_from_weight_4p(p):
    t0 = time.perf_counter()
    rep = bo_torsion_experiment(p, 2, 4 * p, margin=2)
    line = f"CRITERION 6 (supplement, d = {4 * p}, {4 * p + 2}, p = {p}): {rep.status.upper()}  tau = {rep.extra['tau'][f'd={4 * p}']}  [{time.perf_counter() - t0:.1f} s]"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert rep.ok, rep.summary()


def test_criterion_7_base_change():
    t0 = time.perf_counter()
    good = base_change_check(ExperimentSpec(flat(2, ["x"]), 2, 8), 1)
    bad = base_change_check(ExperimentSpec(bo_presentation(2), 2, 8), 1)
    flat_ok = good.ok and not any(good.extra["h_minus_1"].values())
    bo_ok = bad.status == "fail" and all(bad.extra["h_minus_1"].values())
    report(7, flat_ok and bo_ok,
           f"flat line: {good.status}, H^-1 = 0; BO: {bad.status}, H^-1 != 0 = {all(bad.extra['h_minus_1'].values())}",
           time.perf_counter() - t0, 120)


def test_criterion_8_mod_p_envelope_invariance():
    t0 = time.perf_counter()
    same = []
    for p in (2, 3):
        for e in (2, 3):
            a = build_envelope(bo_presentation(p, N=e), e, 8)  # P/p^e -> A = P/(p^e, x^2, xy, y^2)
            b = build_envelope(bo_presentation(p, N=1), e, 8)  # P/p^e -> A/p
            same.append(same_presentation(a, b) and a.dump() == b.dump())
    report(8, all(same), f"{sum(same)}/{len(same)} presentations bitwise identical", time.perf_counter() - t0, 60)


def test_criterion_9_snf_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    fails = 0
    for k in range(500):
        p = (2, 3, 5)[k % 3]
        e = 1 + (k // 3) % 4
        r, c = (int(x) for x in rng.integers(1, 7, 2))
        a = rng.integers(0, p**e, (r, c))
        if k % 4 == 0:
            a = a * p ** int(rng.integers(1, e + 1)) % p**e
        res = snf_dense(a, zmod(p, e), want=("U", "V"))
        exps = sorted(list(res.vals) + [e] * (min(r, c) - res.rank))
        q = p**e
        D = res.U @ a % q @ res.V % q
        diag = np.zeros_like(D)
        for i, v in enumerate(res.vals):
            diag[i, i] = p**v
        if exps != snf_valuations_oracle(a, p, e) or np.any((D - diag) % q):
            fails += 1
    report(9, fails == 0, f"500 matrices, {fails} mismatches", time.perf_counter() - t0, 30)
