"""Presented divided-power envelopes, truncated in weight and reduced mod p^e.

An envelope is a quotient ``ambient / K`` of a divided-power polynomial
algebra.  The ambient has

* base variables ``x_i`` (weight 1),
* *attached* divided-power variables ``y_t`` standing for a monomial
  ``f_t`` in the ``x_i`` (weight ``deg f_t``),
* *free* divided-power variables (the diagonal coordinates of the Cech
  levels), which never enter a relation.

``K`` is spanned by monomial multiples of ``y_t - f_t`` and of the divided
powers of the pairwise lcm syzygies ``(L/f_t) y_t - (L/f_u) y_u``.  All
generators are homogeneous, so the quotient is computed one weight at a time
by a Howell form over Z/p^e.  A slice of weight ``w`` is in general a
torsion module; each surviving monomial carries the exponent of its cyclic
summand.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .pdpoly import (
    Monomial,
    PDElement,
    PDPolyAlgebra,
    format_element,
    format_monomial,
    gamma,
    parse_monomial_exponents,
    partial_var,
    weighted_monomials,
)
from .ring import Howell, Zmod, howell_form, reduce_rows, snf_dense, zmod


class EnvelopeKind(enum.Enum):
    FLAT_LIFT = "FlatLift"
    REGULAR_PD_POLYNOMIAL = "RegularPDPolynomial"
    MONOMIAL_IDEAL = "MonomialIdeal"


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class SchemePresentation:
    """``A = Z_p[x] / (p^N, f_1, ..., f_r)`` with monomial ``f_t``."""

    p: int
    N: int
    variables: tuple[str, ...]
    generators: tuple[Monomial, ...] = ()

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        for f in self.generators:
            if len(f) != len(self.variables):
                raise ValueError("generator exponent tuple has the wrong length")
            if not any(f):
                raise EnvelopeError("a generator equal to 1 makes A = 0")

    @classmethod
    def from_strings(cls, p: int, N: int, variables: Sequence[str], gens: Sequence[str]) -> "SchemePresentation":
        return cls(p, N, tuple(variables), tuple(parse_monomial_exponents(variables, g) for g in gens))

    def gen_name(self, t: int) -> str:
        return f"y{t + 1}"


def _lcm(a: Monomial, b: Monomial) -> Monomial:
    return tuple(max(x, y) for x, y in zip(a, b))


def _quot(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x - y for x, y in zip(a, b))


@dataclass(frozen=True)
class BasisElement:
    weight: int
    core_weight: int
    slot: int
    free: tuple[int, ...]
    order: int


@dataclass
class CoreSlice:
    """Decomposition of one core weight slice into cyclic summands.

    When every Howell pivot is a unit the summands are the non-pivot
    monomials.  Otherwise the pivots do not split the quotient (the span of
    (2, 1) in (Z/8)^2 has quotient Z/8, not Z/2 + Z/4), and the generators
    come from a Smith form of the relation rows.
    """

    orders: list[int]
    generators: list[np.ndarray]
    monomial: bool
    keep: list[int]
    V: np.ndarray | None
    howell: Howell | None
    zm: Zmod

    def coordinates(self, vec: np.ndarray) -> dict[int, int]:
        q = self.zm.q
        if self.monomial:
            red = vec % q if self.howell is None else reduce_rows(vec, self.howell)
            vals = red[self.keep]
        else:
            vals = (vec @ self.V)[self.keep] % q
        out = {}
        for slot, (v, a) in enumerate(zip(vals.tolist(), self.orders)):
            v %= self.zm.p**a
            if v:
                out[slot] = v
        return out


def _core_slice(cols: list, h: Howell | None, zm: Zmod) -> CoreSlice:
    n = len(cols)
    if h is None or all(v == 0 for _, v in h.pivots):
        piv = set() if h is None else {c for c, _ in h.pivots}
        keep = [j for j in range(n) if j not in piv]
        gens = []
        for j in keep:
            g = np.zeros(n, dtype=np.int64)
            g[j] = 1
            gens.append(g)
        return CoreSlice([zm.e] * len(keep), gens, True, keep, None, h, zm)
    res = snf_dense(h.rows, zm, want=("V", "Vinv"))
    keep, orders = [], []
    for j in range(n):
        a = res.vals[j] if j < res.rank else zm.e
        if a > 0:
            keep.append(j)
            orders.append(a)
    gens = [res.Vinv[j] % zm.q for j in keep]
    return CoreSlice(orders, gens, False, keep, res.V, h, zm)


@dataclass
class EnvelopePresentation:
    kind: EnvelopeKind
    ambient: PDPolyAlgebra
    attached: tuple[Monomial | None, ...]
    n_core: int
    relation_span: list[PDElement]
    howell: dict[int, Howell]
    columns: dict[int, list[Monomial]]
    presentation: SchemePresentation | None = None
    base_kind: EnvelopeKind | None = None
    _basis: list[tuple[Monomial, int]] | None = field(default=None, repr=False)
    _index: dict[Monomial, int] | None = field(default=None, repr=False)
    _nf_cache: dict = field(default_factory=dict, repr=False)
    _d_cache: dict = field(default_factory=dict, repr=False)
    _elem_cache: dict = field(default_factory=dict, repr=False)
    _dvec_cache: dict = field(default_factory=dict, repr=False)

    # ------------------------------------------------------------------ basics

    @property
    def p(self) -> int:
        return self.ambient.p

    @property
    def e(self) -> int:
        return self.ambient.e

    @property
    def d(self) -> int:
        return self.ambient.d

    @property
    def q(self) -> int:
        return self.ambient.q

    @property
    def nb(self) -> int:
        return self.ambient.nb

    @property
    def core_len(self) -> int:
        """Length of the part of a monomial that relations see."""
        return self.ambient.nb + self.n_core

    @property
    def free_pd(self) -> tuple[str, ...]:
        return self.ambient.pd[self.n_core :]

    @property
    def omega_names(self) -> tuple[str, ...]:
        """Names of the free generators of Omega^1: dx_i and d(free PD vars)."""
        return self.ambient.base + self.free_pd

    @property
    def omega_vars(self) -> list[int]:
        return list(range(self.nb)) + list(range(self.core_len, self.ambient.nvars))

    @property
    def w_max(self) -> int:
        return max(self.ambient.weights, default=1)

    def core_weight(self, core: Monomial) -> int:
        return sum(a * w for a, w in zip(core, self.ambient.weights[: self.core_len]))

    # ------------------------------------------------------------ normal form

    def _core_nf(self, w: int, vec: np.ndarray) -> np.ndarray:
        h = self.howell.get(w)
        if h is None or not h.pivots:
            return vec % self.q
        return reduce_rows(vec, h)

    def normal_form(self, a: PDElement) -> PDElement:
        if a.alg != self.ambient:
            raise ValueError("element is not in the ambient algebra of this envelope")
        cl = self.core_len
        if not self.howell:
            return PDElement(self.ambient, dict(a.terms), a.lossy)
        groups: dict[tuple, dict[Monomial, int]] = {}
        for m, c in a.terms.items():
            core, rest = m[:cl], m[cl:]
            groups.setdefault((self.core_weight(core), rest), {})[core] = c
        out: dict[Monomial, int] = {}
        for (w, rest), part in groups.items():
            cols = self.columns.get(w)
            if cols is None or w not in self.howell:
                for core, c in part.items():
                    out[core + rest] = c
                continue
            pos = self._colpos(w)
            vec = np.zeros(len(cols), dtype=np.int64)
            for core, c in part.items():
                vec[pos[core]] = c
            red = self._core_nf(w, vec)
            for j in np.nonzero(red)[0]:
                out[cols[j] + rest] = int(red[j])
        return PDElement(self.ambient, out, a.lossy)

    def _colpos(self, w: int) -> dict[Monomial, int]:
        key = ("pos", w)
        if key not in self._nf_cache:
            self._nf_cache[key] = {m: j for j, m in enumerate(self.columns[w])}
        return self._nf_cache[key]

    def slice(self, w: int) -> "CoreSlice":
        """Module structure of the core part of weight w."""
        key = ("slice", w)
        if key not in self._nf_cache:
            self._nf_cache[key] = _core_slice(self.columns.get(w, []), self.howell.get(w), self.ambient.zm)
        return self._nf_cache[key]

    def _free_monomials(self, w: int) -> list[tuple[int, ...]]:
        ws = self.ambient.weights[self.core_len :]
        return sorted(weighted_monomials(ws, w), reverse=True)

    @property
    def basis(self) -> list["BasisElement"]:
        """Generators of the truncated envelope, ordered by weight, then core
        generator, then free-variable monomial.  Each is a cyclic summand of
        the stated order."""
        if self._basis is None:
            out = []
            for w in range(self.d + 1):
                for wc in range(w + 1):
                    frees = self._free_monomials(w - wc)
                    if not frees:
                        continue
                    sl = self.slice(wc)
                    for slot, a in enumerate(sl.orders):
                        for fr in frees:
                            out.append(BasisElement(w, wc, slot, fr, a))
            self._basis = out
            self._index = {(b.core_weight, b.slot, b.free): i for i, b in enumerate(out)}
        return self._basis

    @property
    def index(self) -> dict[tuple, int]:
        self.basis
        return self._index

    def basis_weights(self) -> list[int]:
        return [b.weight for b in self.basis]

    def orders(self) -> list[int]:
        return [b.order for b in self.basis]

    def basis_element(self, i: int) -> PDElement:
        b = self.basis[i]
        hit = self._elem_cache.get(i)
        if hit is None:
            cols = self.columns.get(b.core_weight, [])
            gen = self.slice(b.core_weight).generators[b.slot]
            hit = PDElement(self.ambient, {cols[j] + b.free: int(c) for j, c in enumerate(gen) if c})
            self._elem_cache[i] = hit
        return hit

    def basis_label(self, i: int) -> str:
        return format_element(self.basis_element(i))

    def to_vector(self, a: PDElement, reduced: bool = False) -> dict[int, int]:
        """Coordinates on :attr:`basis` (each taken modulo its order)."""
        if a.alg != self.ambient:
            raise ValueError("element is not in the ambient algebra of this envelope")
        cl = self.core_len
        groups: dict[tuple, dict[Monomial, int]] = {}
        for m, c in a.terms.items():
            core, rest = m[:cl], m[cl:]
            groups.setdefault((self.core_weight(core), rest), {})[core] = c
        idx = self.index
        out: dict[int, int] = {}
        for (w, rest), part in groups.items():
            if w + self.ambient.weight((0,) * cl + rest) > self.d:
                continue
            pos = self._colpos(w)
            vec = np.zeros(len(self.columns[w]), dtype=np.int64)
            for core, c in part.items():
                vec[pos[core]] = c
            for slot, val in self.slice(w).coordinates(vec).items():
                out[idx[(w, slot, rest)]] = val
        return out

    def from_vector(self, vec: dict[int, int]) -> PDElement:
        out = self.ambient.zero()
        for i, c in vec.items():
            out = out + self.basis_element(i).scale(c)
        return self.normal_form(out)

    def mul(self, a: PDElement, b: PDElement) -> PDElement:
        return self.normal_form(a * b)

    def is_zero(self, a: PDElement) -> bool:
        return self.normal_form(a).is_zero()

    def d_vectors(self, i: int) -> list[dict[int, int]]:
        """Coordinates of the omega components of d(basis element i)."""
        hit = self._dvec_cache.get(i)
        if hit is None:
            hit = [self.to_vector(part, reduced=True) for part in self.differential(self.basis_element(i))]
            self._dvec_cache[i] = hit
        return hit

    # ------------------------------------------------------------- Omega^1

    def d_basis(self, m: Monomial) -> list[PDElement]:
        """Coefficients of d(m) on the omega basis, in normal form."""
        hit = self._d_cache.get(m)
        if hit is not None:
            return hit
        el = self.ambient.monomial(m)
        out = []
        alg = self.ambient
        for i in self.omega_vars:
            coef = partial_var(el, i)
            if i < self.nb:
                for t in range(self.n_core):
                    f = self.attached[t]
                    if f is None or f[i] == 0:
                        continue
                    dy = partial_var(el, self.nb + t)
                    if dy:
                        df = list(f) + [0] * (alg.nvars - self.nb)
                        df[i] -= 1
                        coef = coef + dy * alg.monomial(tuple(df), f[i])
            out.append(self.normal_form(coef))
        self._d_cache[m] = out
        return out

    def differential(self, a: PDElement) -> list[PDElement]:
        """da as coefficients on dx_i (and d of free PD variables)."""
        out = [self.ambient.zero() for _ in self.omega_vars]
        for m, c in a.terms.items():
            for k, part in enumerate(self.d_basis(m)):
                if part:
                    out[k] = out[k] + part.scale(c)
        return out

    def partial(self, a: PDElement, k: int) -> PDElement:
        """Component of da along the k-th omega generator."""
        out = self.ambient.zero()
        for m, c in a.terms.items():
            part = self.d_basis(m)[k]
            if part:
                out = out + part.scale(c)
        return out

    # ----------------------------------------------------------- dumps

    def normal_form_matrix(self, w: int) -> np.ndarray:
        """Matrix of the normal form on the core monomials of weight w."""
        cols = self.columns.get(w, [])
        n = len(cols)
        if n == 0:
            return np.zeros((0, 0), dtype=np.int64)
        return np.array([self._core_nf(w, row) for row in np.eye(n, dtype=np.int64)], dtype=np.int64).T

    def dump(self) -> str:
        lines = [
            f"envelope {self.kind.value} p={self.p} e={self.e} d={self.d}",
            "vars " + " ".join(self.ambient.names),
            "weights " + " ".join(map(str, self.ambient.weights)),
        ]
        for i, b in enumerate(self.basis):
            lines.append(f"basis {self.basis_label(i)} order {b.order}")
        for w in sorted(self.howell):
            h = self.howell[w]
            if not h.pivots:
                continue
            cols = self.columns[w]
            lines.append(f"# weight {w} normal form")
            for k, (c, v) in enumerate(h.pivots):
                row = " ".join(f"{int(h.rows[k, j])}:{j}" for j in np.nonzero(h.rows[k])[0])
                lines.append(f"pivot {c} p^{v} [{row}]")
            lines.append("cols " + " ".join(format_monomial(self.ambient, m + (0,) * (self.ambient.nvars - self.core_len)) for m in cols))
        return "\n".join(lines) + "\n"

    def check_consistent(self):
        if self.normal_form(self.ambient.one()).is_zero():
            raise EnvelopeError("inconsistent presentation: 1 reduces to 0")


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def _make(kind, ambient, attached, n_core, relations, pres, base_kind=None) -> EnvelopePresentation:
    zm = zmod(ambient.p, ambient.e)
    core_weights = ambient.weights[: ambient.nb + n_core]
    columns: dict[int, list[Monomial]] = {}
    rows: dict[int, list[np.ndarray]] = {}
    for w in range(ambient.d + 1):
        columns[w] = sorted(weighted_monomials(core_weights, w), reverse=True)
    pos = {w: {m: j for j, m in enumerate(cols)} for w, cols in columns.items()}
    cl = ambient.nb + n_core
    for r in relations:
        for m, c in r.terms.items():
            if any(m[cl:]):
                raise EnvelopeError("relations must not involve free divided-power variables")
        byw: dict[int, np.ndarray] = {}
        for m, c in r.terms.items():
            core = m[:cl]
            w = sum(a * x for a, x in zip(core, core_weights))
            vec = byw.setdefault(w, np.zeros(len(columns[w]), dtype=np.int64))
            vec[pos[w][core]] = c
        for w, vec in byw.items():
            rows.setdefault(w, []).append(vec)
    howell = {}
    for w, cols in columns.items():
        if rows.get(w):
            howell[w] = howell_form(np.array(rows[w]), zm, ncols=len(cols))
    env = EnvelopePresentation(kind, ambient, tuple(attached), n_core, list(relations), howell, columns, pres, base_kind)
    env.check_consistent()
    return env


def envelope_flat(pres: SchemePresentation, e: int, d: int) -> EnvelopePresentation:
    """P/p^e with its canonical divided powers on (p)."""
    if pres.generators:
        raise EnvelopeError("flat lift requires J = (p^N) only")
    if e < pres.N:
        raise EnvelopeError("need e >= N")
    amb = PDPolyAlgebra(pres.p, e, pres.variables, (), d)
    return _make(EnvelopeKind.FLAT_LIFT, amb, (), 0, [], pres)


def syzygy_elements(amb: PDPolyAlgebra, gens: Sequence[Monomial]) -> list[PDElement]:
    """(L/f_t) y_t - (L/f_u) y_u for every pair t < u (L = lcm(f_t, f_u))."""
    nb = amb.nb
    out = []
    for t, u in combinations(range(len(gens)), 2):
        L = _lcm(gens[t], gens[u])
        a = list(_quot(L, gens[t])) + [0] * (amb.nvars - nb)
        b = list(_quot(L, gens[u])) + [0] * (amb.nvars - nb)
        a[nb + t] += 1
        b[nb + u] += 1
        out.append(PDElement(amb, {tuple(a): 1}) - PDElement(amb, {tuple(b): 1}))
    return out


def envelope_monomial(pres: SchemePresentation, e: int, d: int) -> EnvelopePresentation:
    """Envelope of Z_p[x] -> Z_p[x]/(p^N, monomials), truncated at weight d."""
    if pres.N > e:
        raise EnvelopeError("need N <= e")
    if not pres.generators:
        amb = PDPolyAlgebra(pres.p, e, pres.variables, (), d)
        return _make(EnvelopeKind.FLAT_LIFT, amb, (), 0, [], pres)
    gens = list(pres.generators)
    names = tuple(pres.gen_name(t) for t in range(len(gens)))
    weights = tuple(sum(f) for f in gens)
    amb = PDPolyAlgebra(pres.p, e, pres.variables, names, d, pd_weights=weights)
    nb = amb.nb
    generators: list[PDElement] = []
    for t, f in enumerate(gens):
        y = [0] * amb.nvars
        y[nb + t] = 1
        fx = list(f) + [0] * len(gens)
        generators.append(PDElement(amb, {tuple(y): 1}) - PDElement(amb, {tuple(fx): 1}))
    for s in syzygy_elements(amb, gens):
        ws = s.min_weight()
        for n in range(1, d // ws + 1):
            g = gamma(s, n)
            if g:
                generators.append(g)
    relations = []
    for g in generators:
        wg = g.min_weight()
        for w in range(0, d - wg + 1):
            for m in amb.monomials_of_weight(w):
                r = amb.monomial(m) * g
                if r:
                    relations.append(r)
    return _make(EnvelopeKind.MONOMIAL_IDEAL, amb, tuple(gens), len(gens), relations, pres)


def envelope_regular(base: EnvelopePresentation, new_gens: Sequence[str]) -> EnvelopePresentation:
    """base<xi_1, ..., xi_k>: adjoin free divided-power variables of weight 1."""
    if not new_gens:
        return base
    amb = base.ambient.extend(new_gens)
    relations = [PDElement(amb, {m + (0,) * len(new_gens): c for m, c in r.terms.items()}) for r in base.relation_span]
    env = EnvelopePresentation(
        EnvelopeKind.REGULAR_PD_POLYNOMIAL,
        amb,
        base.attached,
        base.n_core,
        relations,
        base.howell,
        base.columns,
        base.presentation,
        base.base_kind or base.kind,
    )
    env.check_consistent()
    return env


def build_envelope(pres: SchemePresentation, e: int, d: int) -> EnvelopePresentation:
    if pres.generators:
        return envelope_monomial(pres, e, d)
    return envelope_flat(pres, e, d)


def same_presentation(a: EnvelopePresentation, b: EnvelopePresentation) -> bool:
    """Bitwise equality of basis, exponents and normal-form matrices."""
    if a.ambient != b.ambient or a.basis != b.basis:
        return False
    for w in range(a.d + 1):
        if not np.array_equal(a.normal_form_matrix(w), b.normal_form_matrix(w)):
            return False
    return True


@dataclass(frozen=True)
class OmegaModule:
    """Omega^1_D as the free D-module on dx_i (and d of free PD variables)."""

    env: EnvelopePresentation
    names: tuple[str, ...]

    @property
    def rank(self) -> int:
        return len(self.names)

    def d(self, a: PDElement) -> list[PDElement]:
        return self.env.differential(a)

    def dd_vanishes(self, a: PDElement) -> bool:
        """d(d a) = 0 in Omega^2, i.e. the mixed partials agree."""
        env = self.env
        first = env.differential(a)
        for i in range(self.rank):
            for j in range(i + 1, self.rank):
                if not env.normal_form(env.partial(first[j], i) - env.partial(first[i], j)).is_zero():
                    return False
        return True


def omega_module(env: EnvelopePresentation) -> OmegaModule:
    return OmegaModule(env, tuple("d" + n for n in env.omega_names))
