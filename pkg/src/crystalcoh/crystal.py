"""Crystals on the truncated envelope: free modules with an integrable connection.

``M = D^r`` with basis ``m_1..m_r`` and ``nabla(m_j) = sum_i Gamma_i[:, j] dx_i``.
Only the base directions ``dx_i`` carry connection data; along the diagonal
coordinates of a Cech level the connection is the plain derivative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Mapping, Sequence

import numpy as np

from .envelope import EnvelopePresentation
from .pdpoly import PDElement, RingMap, gamma
from .ring import CochainComplex, CohomologyTable, cohomology, howell_form, zmod

Vector = list  # list[PDElement] of length rank


class TransportError(ValueError):
    pass


@dataclass
class CrystalData:
    env: EnvelopePresentation
    rank: int
    connection: list[list[list[PDElement]]]  # connection[i][row][col], one matrix per base variable

    def __post_init__(self):
        nb = self.env.nb
        if len(self.connection) != nb:
            raise ValueError(f"need one connection matrix per base variable ({nb})")
        for G in self.connection:
            if len(G) != self.rank or any(len(row) != self.rank for row in G):
                raise ValueError("connection matrices must be rank x rank")
        self.connection = [[[self.env.normal_form(a) for a in row] for row in G] for G in self.connection]

    @classmethod
    def constant(cls, env: EnvelopePresentation, rank: int = 1) -> "CrystalData":
        z = env.ambient.zero()
        return cls(env, rank, [[[z] * rank for _ in range(rank)] for _ in range(env.nb)])

    @classmethod
    def from_strings(cls, env: EnvelopePresentation, rank: int, matrices: Mapping[str, Sequence[Sequence[str]]]) -> "CrystalData":
        unknown = set(matrices) - set(env.ambient.base)
        if unknown:
            raise ValueError(f"connection given for unknown variables {sorted(unknown)}")
        amb = env.ambient
        conn = []
        for name in amb.base:
            rows = matrices.get(name)
            if rows is None:
                conn.append([[amb.zero()] * rank for _ in range(rank)])
            else:
                conn.append([[amb.parse(s) for s in row] for row in rows])
        return cls(env, rank, conn)

    @property
    def is_constant(self) -> bool:
        return all(a.is_zero() for G in self.connection for row in G for a in row)

    def zero(self) -> Vector:
        return [self.env.ambient.zero() for _ in range(self.rank)]

    def unit(self, j: int, coef: PDElement | None = None) -> Vector:
        v = self.zero()
        v[j] = coef if coef is not None else self.env.ambient.one()
        return v

    def nabla_dir(self, v: Vector, i: int) -> Vector:
        """Covariant derivative along the i-th omega generator."""
        env = self.env
        out = [env.partial(a, i) for a in v]
        if i < env.nb:
            G = self.connection[i]
            for j, a in enumerate(v):
                if a.is_zero():
                    continue
                for l in range(self.rank):
                    if not G[l][j].is_zero():
                        out[l] = out[l] + a * G[l][j]
        return [env.normal_form(a) for a in out]

    def is_zero(self, v: Vector) -> bool:
        return all(self.env.normal_form(a).is_zero() for a in v)


@dataclass
class Report:
    ok: bool
    detail: str = ""
    witness: object = None

    def __bool__(self):
        return self.ok


def check_integrability(c: CrystalData) -> Report:
    env, r = c.env, c.rank
    amb = env.ambient
    for i, j in combinations(range(env.nb), 2):
        Gi, Gj = c.connection[i], c.connection[j]
        for a, b in product(range(r), repeat=2):
            val = env.partial(Gj[a][b], i) - env.partial(Gi[a][b], j)
            for k in range(r):
                val = val + Gi[a][k] * Gj[k][b] - Gj[a][k] * Gi[k][b]
            val = env.normal_form(val)
            if not val.is_zero():
                return Report(False, f"curvature ({i},{j}) entry ({a},{b}) = {val}", (i, j, a, b, val))
    return Report(True, "integrable")


def check_quasi_nilpotent(c: CrystalData) -> Report:
    """Every Z/p^e-basis vector of the truncated M dies under some power of
    each covariant derivative within (d+1)*e steps."""
    env = c.env
    bound = (env.d + 1) * env.e
    for i in range(env.nb):
        for j in range(c.rank):
            for k in range(len(env.basis)):
                v = c.unit(j, env.basis_element(k))
                for _ in range(bound):
                    if c.is_zero(v):
                        break
                    v = c.nabla_dir(v, i)
                else:
                    if not c.is_zero(v):
                        return Report(False, f"direction {env.ambient.base[i]} does not kill basis vector {k} of m_{j + 1}", (i, j, k))
    return Report(True, "quasi-nilpotent on the truncated slice")


# ---------------------------------------------------------------------------
# liftings and Taylor transport
# ---------------------------------------------------------------------------


@dataclass
class Lifting:
    """phi: D -> B lifting id_A, given by phi(x_i) = x_i + h_i with h_i in the PD ideal of B.

    Attached PD variables go to ``y_t + (f_t(x + h) - f_t(x))``; the bracket
    lies in the PD ideal, so divided powers of the image are defined.
    """

    source: EnvelopePresentation
    target: EnvelopePresentation
    shifts: list[PDElement]
    _map: RingMap | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.shifts) != self.source.nb:
            raise ValueError("one shift per base variable required")
        tgt = self.target.ambient
        self.shifts = [self.target.normal_form(h) for h in self.shifts]
        for h in self.shifts:
            if h.alg != tgt:
                raise ValueError("shift must live in the target envelope")
            if not h.in_pd_ideal():
                raise TransportError(f"h = {h} is not in the PD ideal of the target")

    @classmethod
    def identity(cls, env: EnvelopePresentation, target: EnvelopePresentation | None = None) -> "Lifting":
        tgt = target or env
        return cls(env, tgt, [tgt.ambient.zero() for _ in range(env.nb)])

    def image_of_base(self, i: int) -> PDElement:
        return self.target.ambient.var(self.target.ambient.base[i]) + self.shifts[i]

    @property
    def ring_map(self) -> RingMap:
        if self._map is None:
            src, tgt = self.source, self.target
            tam = tgt.ambient
            xs = [self.image_of_base(i) for i in range(src.nb)]
            images = list(xs)
            for t in range(src.n_core):
                f = src.attached[t]
                y = tam.var(tam.pd[t])
                fx_new, fx_old = tam.one(), tam.one()
                for i, a in enumerate(f):
                    fx_new = fx_new * xs[i] ** a
                    fx_old = fx_old * tam.var(tam.base[i]) ** a
                images.append(y + tgt.normal_form(fx_new - fx_old))
            for k in range(src.n_core, len(src.ambient.pd)):
                images.append(tam.var(src.ambient.pd[k]))
            self._map = RingMap(src.ambient, tam, images, post=tgt.normal_form)
        return self._map

    def __call__(self, a: PDElement) -> PDElement:
        return self.target.normal_form(self.ring_map(a))


def _multi_indices(n: int, max_total: int):
    for tot in range(max_total + 1):
        for E in product(range(tot + 1), repeat=n):
            if sum(E) == tot:
                yield E


def _gamma_powers(h: PDElement, tgt: EnvelopePresentation) -> list[PDElement]:
    """gamma_k(h) for k = 0..d; h has weight >= 1 in every use, so this is exhaustive."""
    out = [tgt.ambient.one()]
    for k in range(1, tgt.d + 1):
        g = tgt.normal_form(gamma(h, k))
        out.append(g)
    return out


def transport_element(c: CrystalData, phi1: Lifting, phi2: Lifting, v: Vector) -> Vector:
    """Image of v (x) 1 under M (x)_{phi1} B -> M (x)_{phi2} B:
    sum over E of phi2(nabla^E v) * prod gamma_{E_i}(phi1(x_i) - phi2(x_i))."""
    if phi1.target is not phi2.target and phi1.target.ambient != phi2.target.ambient:
        raise TransportError("liftings must share the target")
    if phi1.source is not c.env or phi2.source is not c.env:
        raise TransportError("liftings must start at the crystal's envelope")
    B = phi1.target
    hs = [B.normal_form(phi1.shifts[i] - phi2.shifts[i]) for i in range(c.env.nb)]
    gp = [_gamma_powers(h, B) for h in hs]
    bound = (c.env.d + 1) * c.env.e
    out = [B.ambient.zero() for _ in range(c.rank)]
    # nabla^E v, built along a tree of multi-indices
    cache: dict[tuple, Vector] = {(0,) * c.env.nb: v}
    for E in _multi_indices(c.env.nb, min(bound, B.d * max(1, c.env.e))):
        if E not in cache:
            i = max(k for k in range(len(E)) if E[k])
            prev = list(E)
            prev[i] -= 1
            base = cache.get(tuple(prev))
            if base is None:
                continue
            cache[E] = c.nabla_dir(base, i)
        w = cache[E]
        if c.is_zero(w):
            cache.pop(E)
            continue
        coef = B.ambient.one()
        for i, k in enumerate(E):
            coef = coef * gp[i][k] if k < len(gp[i]) else B.ambient.zero()
        coef = B.normal_form(coef)
        if coef.is_zero():
            continue
        for l in range(c.rank):
            if not w[l].is_zero():
                out[l] = out[l] + phi2(w[l]) * coef
    return [B.normal_form(a) for a in out]


def taylor_transport(c: CrystalData, phi1: Lifting, phi2: Lifting) -> list[list[PDElement]]:
    """r x r matrix over B; column j is the transport of m_j."""
    cols = [transport_element(c, phi1, phi2, c.unit(j)) for j in range(c.rank)]
    return [[cols[j][l] for j in range(c.rank)] for l in range(c.rank)]


def matmul(env: EnvelopePresentation, A, B) -> list[list[PDElement]]:
    n, m, k = len(A), len(B[0]), len(B)
    zero = env.ambient.zero()
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            s = zero
            for t in range(k):
                s = s + A[i][t] * B[t][j]
            row.append(env.normal_form(s))
        out.append(row)
    return out


def matrices_equal(env: EnvelopePresentation, A, B) -> bool:
    return all(env.normal_form(a - b).is_zero() for ra, rb in zip(A, B) for a, b in zip(ra, rb))


# ---------------------------------------------------------------------------
# de Rham complex
# ---------------------------------------------------------------------------


def _wedge_in(k: int, I: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    if k in I:
        return 0, I
    sign = -1 if sum(1 for a in I if a < k) % 2 else 1
    return sign, tuple(sorted(I + (k,)))


@dataclass
class DeRham:
    """M (x) Omega^* on the chosen omega directions, with explicit bases."""

    crystal: CrystalData
    directions: tuple[int, ...]
    bases: list[list[tuple[tuple[int, ...], int, int]]]
    complex: CochainComplex

    def element(self, deg: int, vec) -> list[tuple[tuple[int, ...], Vector]]:
        """Decode a coefficient vector in degree ``deg`` into (form index, module vector) pairs."""
        env, c = self.crystal.env, self.crystal
        acc: dict[tuple, Vector] = {}
        for idx, coef in enumerate(np.asarray(vec).tolist()):
            if coef % env.q == 0:
                continue
            I, j, b = self.bases[deg][idx]
            v = acc.setdefault(I, c.zero())
            v[j] = v[j] + env.basis_element(b).scale(coef)
        return sorted(acc.items())


def de_rham_complex(c: CrystalData, directions: Sequence[int] | None = None, max_form: int | None = None) -> DeRham:
    """The de Rham complex of (M, nabla); ``directions`` selects omega generators
    (all by default), e.g. only the diagonal ones for a relative complex."""
    env = c.env
    dirs = tuple(range(len(env.omega_vars))) if directions is None else tuple(directions)
    top = len(dirs) if max_form is None else min(max_form, len(dirs))
    basis = env.basis
    nB = len(basis)
    bweights = env.basis_weights()
    graded = c.is_constant
    bases, orders, weights = [], [], []
    for k in range(top + 1):
        # form weight = coefficient weight + k; keeping weight <= d is a quotient complex
        bk = [(I, j, b) for I in combinations(dirs, k) for j in range(c.rank) for b in range(nB) if bweights[b] + k <= env.d]
        bases.append(bk)
        orders.append([basis[b].order for (_, _, b) in bk])
        weights.append([bweights[b] + k for (_, _, b) in bk])

    # per basis monomial: components of d along each direction, as vectors
    dvec = [{dirn: env.d_vectors(b)[dirn] for dirn in dirs} for b in range(nB)]
    gvec = {}
    if not graded:
        for b in range(nB):
            mono = env.basis_element(b)
            for dirn in dirs:
                if dirn >= env.nb:
                    continue
                G = c.connection[dirn]
                for l, j in product(range(c.rank), repeat=2):
                    if not G[l][j].is_zero():
                        gvec[(b, dirn, l, j)] = env.to_vector(mono * G[l][j])

    diffs = []
    for k in range(top):
        src, tgt = bases[k], bases[k + 1]
        pos = {key: n for n, key in enumerate(tgt)}
        D = np.zeros((len(tgt), len(src)), dtype=np.int64)
        for col, (I, j, b) in enumerate(src):
            for dirn in dirs:
                sign, J = _wedge_in(dirn, I)
                if sign == 0:
                    continue
                for bb, coef in dvec[b][dirn].items():
                    t = pos.get((J, j, bb))
                    if t is not None:
                        D[t, col] += sign * coef
                if not graded and dirn < env.nb:
                    for l in range(c.rank):
                        for bb, coef in gvec.get((b, dirn, l, j), {}).items():
                            t = pos.get((J, l, bb))
                            if t is not None:
                                D[t, col] += sign * coef
        diffs.append(D % env.q)
    cx = CochainComplex(env.p, env.e, 0, [len(b) for b in bases], diffs, orders=orders, weights=weights if graded else None)
    return DeRham(c, dirs, bases, cx)


def horizontal_sections(c: CrystalData) -> CohomologyTable:
    return cohomology(de_rham_complex(c, max_form=1).complex, degrees=[0])


# ---------------------------------------------------------------------------
# torsion search
# ---------------------------------------------------------------------------


def _fp_kernel(A: np.ndarray, p: int) -> np.ndarray:
    """Basis (rows) of the right kernel of A over F_p."""
    zm = zmod(p, 1)
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n, dtype=np.int64)
    h = howell_form(A % p, zm, ncols=n)
    piv = [c for c, _ in h.pivots]
    free = [j for j in range(n) if j not in set(piv)]
    out = []
    for f in free:
        v = np.zeros(n, dtype=np.int64)
        v[f] = 1
        for k, c in enumerate(piv):
            v[c] = (-h.rows[k, f]) % p
        out.append(v)
    return np.array(out, dtype=np.int64).reshape(len(out), n)


def torsion_horizontal(c: CrystalData) -> list[Vector]:
    """Representatives of (ker nabla on M[p]) modulo (ker nabla on p^{e-1} M).

    Elements of ``p^{e-1} M`` are p-torsion only because we work mod p^e, so
    they are discarded; what remains is torsion of the envelope itself.
    """
    env = c.env
    p, e, q = env.p, env.e, env.q
    if e < 2:
        raise ValueError("torsion search needs e >= 2")
    dr = de_rham_complex(c, max_form=1)
    cx = dr.complex
    orders = np.array(cx.orders[0], dtype=np.int64)
    if cx.length(0) == 0 or len(cx.ranks) < 2:
        return []
    D = cx.diffs[0]
    P = np.array([p ** (int(a) - 1) for a in orders], dtype=np.int64)
    # c -> nabla(P c) lands in Omega[p]; divide by p^{b-1} on each target summand
    tgt = np.array(cx.orders[1], dtype=np.int64)
    img = (D * P[None, :]) % q
    scale = np.array([p ** (e - int(b)) for b in tgt], dtype=np.int64)
    img = (img * scale[:, None]) % q  # move to the top layer p^{e-1} Z/p^e
    A = (img // p ** (e - 1)) % p
    K = _fp_kernel(A, p)
    if K.size == 0:
        return []
    low = orders < e
    proj = K[:, low] % p
    if not proj.any():
        return []
    zm1 = zmod(p, 1)
    aug = np.concatenate([proj, K], axis=1) % p
    h = howell_form(aug, zm1, ncols=aug.shape[1])
    reps = []
    nlow = int(low.sum())
    for k, (col, _) in enumerate(h.pivots):
        if col >= nlow:
            break
        cvec = h.rows[k, nlow:]
        vec = (cvec * P) % q
        reps.append(dr.element(0, vec)[0][1] if dr.element(0, vec) else c.zero())
    return [[env.normal_form(a) for a in v] for v in reps]
