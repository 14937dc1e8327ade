"""Quick invariant suite behind ``crystalcoh selftest`` (a few seconds)."""
from __future__ import annotations

import random

import numpy as np

from .cechalex import check_cosimplicial_identities, diagonal_omega_check, homotopy_check
from .compare import ExperimentSpec, base_change_check, bo_presentation, compare_derham_ca
from .crystal import CrystalData, Lifting, taylor_transport, matmul, matrices_equal
from .envelope import SchemePresentation, build_envelope, same_presentation
from .oracles import pd_axiom_trial, snf_valuations_oracle
from .ring import snf_dense, zmod


def _snf_oracle(n: int = 100, seed: int = 0) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    for k in range(n):
        p = (2, 3, 5)[k % 3]
        e = 1 + k % 4
        r, c = (int(x) for x in rng.integers(1, 7, 2))
        a = rng.integers(0, p**e, (r, c))
        res = snf_dense(a, zmod(p, e), want=("U", "V"))
        got = sorted(list(res.vals) + [e] * (min(r, c) - res.rank))
        if got != snf_valuations_oracle(a, p, e):
            return False, f"matrix {a.tolist()} over Z/{p}^{e}"
        D = res.U @ a % p**e @ res.V % p**e
        diag = np.zeros_like(D)
        for i, v in enumerate(res.vals):
            diag[i, i] = p**v
        if np.any((D - diag) % p**e):
            return False, "U m V is not diagonal"
    return True, f"{n} matrices"


def _pd_axioms(n: int = 200, seed: int = 0) -> tuple[bool, str]:
    rng = random.Random(seed)
    for k in range(n):
        t = pd_axiom_trial(rng, (2, 3, 5)[k % 3], 1 + k % 3)
        if not t.ok:
            return False, f"{t.name} axiom failed at trial {k}"
    return True, f"{n} trials"


def _transport_cocycle(seed: int = 0) -> tuple[bool, str]:
    pres = SchemePresentation.from_strings(2, 1, ["x"], [])
    env = build_envelope(pres, 2, 6)
    c = CrystalData.from_strings(env, 2, {"x": [["2*x", "1"], ["0", "2"]]})
    from .cechalex import build_level

    lvl = build_level(env, 2)
    rng = random.Random(seed)
    shifts = []
    for _ in range(3):
        a = [rng.randrange(4) for _ in range(2)]
        shifts.append(lvl.env.ambient.zero() + lvl.xi(0, 1).scale(a[0]) + lvl.xi(0, 2).scale(a[1]))
    phis = [Lifting(env, lvl.env, (s,)) for s in shifts]
    t12 = taylor_transport(c, phis[0], phis[1])
    t23 = taylor_transport(c, phis[1], phis[2])
    t13 = taylor_transport(c, phis[0], phis[2])
    ok = matrices_equal(lvl.env, matmul(lvl.env, t23, t12), t13)
    return ok, "T23 T12 = T13" if ok else "cocycle identity fails"


def run_selftest() -> list[dict]:
    results = []

    def record(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed self-test, not a traceback
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append({"name": name, "ok": bool(ok), "detail": detail})

    a1 = SchemePresentation.from_strings(2, 1, ["x"], [])
    record("smith form matches the integer oracle", _snf_oracle)
    record("divided-power axioms", _pd_axioms)

    def homotopy():
        r = homotopy_check(3)
        return r.ok, r.detail

    record("cosimplicial homotopy identities", homotopy)

    def cosimplicial():
        r = check_cosimplicial_identities(build_envelope(a1, 2, 4), 2)
        return r.ok, r.detail

    record("cosimplicial identities of the levels", cosimplicial)

    def diagonal():
        r = diagonal_omega_check(build_envelope(a1, 2, 4))
        return r.ok, r.detail

    record("diagonal description of differentials", diagonal)
    record("transport cocycle", _transport_cocycle)

    def comparison():
        r = compare_derham_ca(ExperimentSpec(a1, 2, 4))
        return r.ok, r.status

    record("de Rham = Cech-Alexander (flat line, d=4)", comparison)

    def base_change():
        r = base_change_check(ExperimentSpec(a1, 2, 4), 1)
        return r.ok, r.status

    record("base change (flat line)", base_change)

    def modp():
        bo1 = build_envelope(bo_presentation(2, 1), 2, 6)
        bo2 = build_envelope(bo_presentation(2, 2), 2, 6)
        return same_presentation(bo1, bo2), "N=1 and N=2 envelopes agree"

    record("envelope independent of the nilpotency", modp)
    return results
