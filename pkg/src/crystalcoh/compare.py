"""Experiment drivers: de Rham versus Cech-Alexander, base change, and the
Berthelot-Ogus torsion example.

Every experiment is run at truncation ``d`` and ``d + margin``.  A check
passes only if it passes at both truncations and the cohomology in weights
``<= d`` is the same in both runs; a disagreement between the two runs makes
the result inconclusive rather than failed.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .cechalex import (
    column_map_check,
    double_complex,
    induced_image_length,
    projection_to_column,
    projection_to_row,
    totalize,
)
from .crystal import CrystalData, de_rham_complex, torsion_horizontal
from .envelope import EnvelopePresentation, SchemePresentation, build_envelope
from .pdpoly import format_element
from .ring import CochainComplex, CohomologyTable, cohomology, derived_mod_p

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass(frozen=True)
class CrystalSpec:
    rank: int = 1
    connection: Mapping[str, Sequence[Sequence[str]]] = field(default_factory=dict)

    def build(self, env: EnvelopePresentation) -> CrystalData:
        if not self.connection:
            return CrystalData.constant(env, self.rank)
        return CrystalData.from_strings(env, self.rank, self.connection)


@dataclass(frozen=True)
class ExperimentSpec:
    presentation: SchemePresentation
    e: int
    d: int
    L: int = 2
    crystal: CrystalSpec = field(default_factory=CrystalSpec)
    margin: int = 2

    def __post_init__(self):
        if self.e < self.presentation.N:
            raise ValueError("precision e must be at least N")
        w_max = max((sum(f) for f in self.presentation.generators), default=1)
        if self.d < 2 * w_max:
            raise ValueError(f"truncation d = {self.d} is below twice the largest generator weight ({w_max})")
        if self.margin < 1:
            raise ValueError("stability margin must be positive")

    @property
    def p(self) -> int:
        return self.presentation.p

    def envelope(self, d: int, e: int | None = None) -> EnvelopePresentation:
        return build_envelope(self.presentation, self.e if e is None else e, d)

    def truncations(self) -> tuple[int, int]:
        return (self.d, self.d + self.margin)

    def describe(self) -> dict:
        pres = self.presentation
        return {
            "p": pres.p,
            "N": pres.N,
            "e": self.e,
            "d": self.d,
            "L": self.L,
            "variables": list(pres.variables),
            "generators": [_mono_str(pres.variables, f) for f in pres.generators],
            "crystal": {"rank": self.crystal.rank, "connection": {k: [list(r) for r in v] for k, v in self.crystal.connection.items()}},
            "margin": self.margin,
        }


def _mono_str(names, f) -> str:
    parts = [n if a == 1 else f"{n}^{a}" for n, a in zip(names, f) if a]
    return "*".join(parts) or "1"


@dataclass
class Check:
    name: str
    status: str
    detail: str = ""


@dataclass
class ComparisonReport:
    experiment: str
    parameters: dict
    checks: list[Check] = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    stable_range: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    timing: float = 0.0

    @property
    def status(self) -> str:
        states = {c.status for c in self.checks}
        if FAIL in states:
            return FAIL
        if INCONCLUSIVE in states:
            return INCONCLUSIVE
        return PASS

    @property
    def ok(self) -> bool:
        return self.status == PASS

    def add(self, name: str, ok: bool | None, detail: str = ""):
        status = INCONCLUSIVE if ok is None else PASS if ok else FAIL
        self.checks.append(Check(name, status, detail))

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_document(self, include_timing: bool = False) -> dict:
        doc = {
            "experiment": self.experiment,
            "status": self.status,
            "parameters": self.parameters,
            "checks": [{"name": c.name, "status": c.status, "detail": c.detail} for c in self.checks],
            "stable_range": self.stable_range,
            "tables": self.tables,
        }
        if self.extra:
            doc["extra"] = self.extra
        if include_timing:
            doc["seconds"] = round(self.timing, 3)
        return doc

    def summary(self) -> str:
        lines = [f"{self.experiment}: {self.status.upper()}"]
        for c in self.checks:
            lines.append(f"  [{c.status}] {c.name}" + (f": {c.detail}" if c.detail else ""))
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# table helpers
# ---------------------------------------------------------------------------


def signature(tab: CohomologyTable, degrees: Sequence[int], max_weight: int | None) -> dict:
    """{degree: {weight: sorted exponents}} restricted to weights <= max_weight."""
    out = {}
    for k in degrees:
        bw = tab.by_weight(k, max_weight)
        out[k] = {w: ex for w, ex in bw.items() if ex}
    return out


def _sig_doc(sig: dict) -> dict:
    return {str(k): {("all" if w is None else str(w)): ex for w, ex in v.items()} for k, v in sig.items()}


def _graded(cx: CochainComplex) -> bool:
    return cx.weights is not None


def _iso_via(src: CochainComplex, tgt: CochainComplex, maps: dict[int, Any], degrees, max_weight, tab_src, tab_tgt) -> tuple[bool, str]:
    """Does the chain map (given per degree) induce isomorphisms in the listed degrees?"""
    for k in degrees:
        ws = sorted({s.weight for s in tab_src.groups.get(k, [])} | {s.weight for s in tab_tgt.groups.get(k, [])},
                    key=lambda w: -1 if w is None else w)
        for w in ws:
            if w is not None and max_weight is not None and w > max_weight:
                continue
            ls = sum(s.exponent for s in tab_src.groups.get(k, []) if s.weight == w)
            lt = sum(s.exponent for s in tab_tgt.groups.get(k, []) if s.weight == w)
            im = induced_image_length(src, tgt, maps[k], k, w)
            if not (ls == lt == im):
                return False, f"H^{k} weight {w}: source {ls}, target {lt}, image {im}"
    return True, "induced maps are isomorphisms"


# ---------------------------------------------------------------------------
# de Rham versus Cech-Alexander
# ---------------------------------------------------------------------------


def _compare_at(spec: ExperimentSpec, d: int) -> dict:
    env = spec.envelope(d)
    c = spec.crystal.build(env)
    nb = env.nb
    L = spec.L
    degrees = list(range(0, min(L - 1, nb) + 1))
    dr_cx = de_rham_complex(c).complex
    dc = double_complex(c, L)
    tot = totalize(dc)
    col0, row0 = dc.column(0), dc.row(0)
    dr = cohomology(dr_cx, degrees=degrees)
    tt = cohomology(tot, degrees=degrees)
    ca = cohomology(row0, degrees=degrees)
    c0 = cohomology(col0, degrees=degrees)
    graded = _graded(tot)
    mw = d if graded else None
    out = {
        "degrees": degrees,
        "graded": graded,
        "dc_check": dc.check(),
        "sig": {
            "de_rham": signature(dr, degrees, mw),
            "totalization": signature(tt, degrees, mw),
            "cech_alexander": signature(ca, degrees, mw),
        },
        "column0_matches_de_rham": signature(c0, degrees, mw) == signature(dr, degrees, mw),
    }
    out["to_column"] = _iso_via(tot, col0, {k: projection_to_column(dc, tot, k) for k in degrees}, degrees, mw, tt, c0)
    out["to_row"] = _iso_via(tot, row0, {k: projection_to_row(dc, tot, k) for k in degrees}, degrees, mw, tt, ca)
    return out


def compare_derham_ca(spec: ExperimentSpec) -> ComparisonReport:
    t0 = time.perf_counter()
    if spec.L < 1:
        raise ValueError("the comparison needs L >= 1")
    rep = ComparisonReport("compare_derham_ca", spec.describe())
    runs = {dd: _compare_at(spec, dd) for dd in spec.truncations()}
    d = spec.d
    for dd, r in runs.items():
        tag = f"d={dd}"
        rep.add(f"double complex identities ({tag})", r["dc_check"].ok, r["dc_check"].detail)
        s = r["sig"]
        rep.add(f"column 0 is the de Rham complex ({tag})", r["column0_matches_de_rham"])
        rep.add(f"de Rham = totalization ({tag})", s["de_rham"] == s["totalization"])
        rep.add(f"Cech-Alexander = totalization ({tag})", s["cech_alexander"] == s["totalization"])
        rep.add(f"Tot -> column 0 quasi-isomorphism ({tag})", r["to_column"][0], r["to_column"][1])
        rep.add(f"Tot -> row 0 quasi-isomorphism ({tag})", r["to_row"][0], r["to_row"][1])
    lo, hi = (runs[dd] for dd in spec.truncations())
    if lo["graded"]:
        hi_cut = {side: {k: {w: ex for w, ex in v.items() if w <= d} for k, v in sig.items()} for side, sig in hi["sig"].items()}
        rep.add("stable between d and d+margin", True if hi_cut == lo["sig"] else None,
                "weights <= d agree" if hi_cut == lo["sig"] else "tables differ in weights <= d")
        rep.stable_range = {"max_weight": d, "truncations": list(spec.truncations())}
    else:
        rep.stable_range = {"max_weight": None, "truncations": list(spec.truncations()),
                            "note": "connection is not weight-homogeneous; tables cover the whole truncated quotient"}
    rep.tables = {f"d={dd}": {side: _sig_doc(sig) for side, sig in r["sig"].items()} for dd, r in runs.items()}
    rep.timing = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# base change
# ---------------------------------------------------------------------------


def _derived_signature(spec: ExperimentSpec, d: int, e: int, k: int):
    env = spec.envelope(d, e)
    c = spec.crystal.build(env)
    cx = de_rham_complex(c).complex
    tab = derived_mod_p(cx, k)
    degs = sorted(tab.groups)
    return signature(tab, degs, d if _graded(cx) else None), cx


def base_change_check(spec: ExperimentSpec, e_prime: int) -> ComparisonReport:
    """Compare Z/p^{e'} (x)^L (de Rham complex) with the de Rham complex at precision e'.

    The derived side is computed at precision e and again at e + 1; the two
    must agree, otherwise the working precision is too small to read the
    complex as a Z_p-complex and the result is inconclusive.
    """
    t0 = time.perf_counter()
    if not 1 <= e_prime < spec.e:
        raise ValueError("need 1 <= e' < e")
    rep = ComparisonReport("base_change_check", {**spec.describe(), "e_prime": e_prime})
    d = spec.d
    tables = {}
    for dd in spec.truncations():
        derived, cx = _derived_signature(spec, dd, spec.e, e_prime)
        derived_hi, _ = _derived_signature(spec, dd, spec.e + 1, e_prime)
        env1 = spec.envelope(dd, e_prime)
        direct_cx = de_rham_complex(spec.crystal.build(env1)).complex
        degs = sorted(set(derived) | set(direct_cx.degrees))
        direct = signature(cohomology(direct_cx), degs, dd if _graded(direct_cx) else None)
        derived = {k: derived.get(k, {}) for k in degs}
        derived_hi = {k: derived_hi.get(k, {}) for k in degs}
        tag = f"d={dd}"
        rep.add(f"working precision suffices ({tag})", True if derived == derived_hi else None,
                f"precision {spec.e} and {spec.e + 1} agree" if derived == derived_hi else f"precision {spec.e} and {spec.e + 1} disagree")
        negative = {k: v for k, v in derived.items() if k < 0 and v}
        rep.add(f"no negative-degree cohomology ({tag})", not negative,
                "H^{<0} = 0" if not negative else f"H^{min(negative)} != 0: {_sig_doc({min(negative): negative[min(negative)]})}")
        rep.add(f"derived reduction = direct computation ({tag})", derived == direct)
        tables[tag] = {"derived": _sig_doc(derived), "direct": _sig_doc(direct)}
        rep.extra.setdefault("h_minus_1", {})[tag] = bool(derived.get(-1))
    rep.tables = tables
    rep.stable_range = {"max_weight": d, "truncations": list(spec.truncations())}
    lo, hi = (tables[f"d={dd}"] for dd in spec.truncations())
    cut = {side: {k: {w: ex for w, ex in v.items() if w == "all" or int(w) <= d} for k, v in t.items()} for side, t in hi.items()}
    rep.add("stable between d and d+margin", True if cut == lo else None)
    rep.timing = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# Berthelot-Ogus
# ---------------------------------------------------------------------------


def bo_presentation(p: int, N: int = 1) -> SchemePresentation:
    return SchemePresentation.from_strings(p, N, ["x", "y"], ["x^2", "x*y", "y^2"])


def bo_torsion_experiment(p: int, e: int, d: int, margin: int = 2) -> ComparisonReport:
    """Search for p-torsion horizontal elements of the envelope of (p, x^2, xy, y^2)
    and for H^{-1} of the derived reduction of its de Rham complex."""
    t0 = time.perf_counter()
    if e < 2:
        raise ValueError("the torsion experiment needs e >= 2")
    if d < 4:
        raise ValueError("the torsion experiment needs d >= 4")
    spec = ExperimentSpec(bo_presentation(p), e, d, margin=margin)
    rep = ComparisonReport("bo_torsion_experiment", spec.describe())
    found = {}
    for dd in spec.truncations():
        env = spec.envelope(dd)
        c = CrystalData.constant(env)
        taus = torsion_horizontal(c)
        found[dd] = (env, taus)
        tag = f"d={dd}"
        rep.add(f"p-torsion horizontal element exists ({tag})", bool(taus),
                f"{len(taus)} class(es)" if taus else "none in weights <= " + str(dd))
        for t in taus:
            ok = all(env.is_zero(a.scale(p)) for a in t) and all(v.is_zero() for v in _nabla(c, t))
            if not ok:
                rep.add(f"tau satisfies p*tau = 0 and nabla tau = 0 ({tag})", False, format_element(t[0]))
                break
        dr = de_rham_complex(c).complex
        der = derived_mod_p(dr, 1)
        h_1 = der.by_weight(-1, dd)
        rep.add(f"H^-1 of the derived reduction is nonzero ({tag})", bool(h_1), _sig_doc({-1: h_1}).get("-1") and str(_sig_doc({-1: h_1})["-1"]) or "H^-1 = 0")
    lo_env, lo = found[d]
    hi_env, hi = found[d + margin]
    lo_w = sorted(min(lo_env.ambient.weight(m) for m in t[0].terms) for t in lo if t[0].terms)
    hi_w = sorted(min(hi_env.ambient.weight(m) for m in t[0].terms) for t in hi if t[0].terms and min(hi_env.ambient.weight(m) for m in t[0].terms) <= d)
    rep.add("torsion classes stable between d and d+margin", lo_w == hi_w if lo else None,
            f"weights {lo_w} at d={d}, {hi_w} at d={d + margin}")
    rep.extra["tau"] = {f"d={dd}": [[format_element(a) for a in t] for t in taus] for dd, (_, taus) in found.items()}
    rep.stable_range = {"max_weight": d, "truncations": list(spec.truncations())}
    rep.timing = time.perf_counter() - t0
    return rep


def _nabla(c: CrystalData, v):
    out = []
    for i in range(len(c.env.omega_vars)):
        out.extend(c.nabla_dir(v, i))
    return out
