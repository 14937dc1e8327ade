"""Cech-Alexander levels, their cosimplicial structure, and the double complex.

Level n is ``D(n) = D<xi_i(1), ..., xi_i(n)>`` where ``xi_i(e) = x_i(e) - x_i(0)``
and ``x_i = x_i(0)``.  A monotone map ``f: [n] -> [m]`` acts by

    x_i      -> x_i + xi_i(f(0))
    xi_i(e)  -> xi_i(f(e)) - xi_i(f(0))          (xi_i(0) = 0)
    y_t      -> y_t + (f_t(x + xi(f(0))) - f_t(x))

Differential forms on a level are written on the slot basis ``dx_i(e)``,
where every structure map is a plain relabelling ``dx_i(e) -> dx_i(f(e))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement
from typing import Sequence

import numpy as np

from .crystal import CrystalData, Lifting, Report, taylor_transport
from .envelope import EnvelopeKind, EnvelopePresentation, envelope_regular
from .pdpoly import PDElement, RingMap
from .ring import CochainComplex, CohomologyTable, _kernel_generators, cohomology, submodule_length

MAX_LEVEL = 3


class LevelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# levels and structure maps
# ---------------------------------------------------------------------------


@dataclass
class CechLevel:
    n: int
    base: EnvelopePresentation
    env: EnvelopePresentation

    @property
    def nb(self) -> int:
        return self.base.nb

    def xi_index(self, i: int, e: int) -> int:
        """Ambient index of xi_i(e), e >= 1."""
        return self.env.core_len + (e - 1) * self.nb + i

    def xi(self, i: int, e: int) -> PDElement:
        amb = self.env.ambient
        if e == 0:
            return amb.zero()
        m = [0] * amb.nvars
        m[self.xi_index(i, e)] = 1
        return amb.monomial(tuple(m))

    def omega_dirs_of_slot(self) -> list[tuple[int, int]]:
        """(slot, variable) for each slot form dx_i(e), in basis order."""
        return [(e, i) for e in range(self.n + 1) for i in range(self.nb)]


def xi_names(base: EnvelopePresentation, n: int) -> list[str]:
    names = [f"{v}_{e}" for e in range(1, n + 1) for v in base.ambient.base]
    clash = set(names) & set(base.ambient.names)
    if clash:
        raise LevelError(f"variable names {sorted(clash)} collide with diagonal coordinates")
    return names


def build_level(env: EnvelopePresentation, n: int) -> CechLevel:
    if env.kind not in (EnvelopeKind.FLAT_LIFT, EnvelopeKind.MONOMIAL_IDEAL):
        raise LevelError(f"levels are built over flat-lift or monomial envelopes, not {env.kind.value}")
    if n < 0 or n > MAX_LEVEL + 1:
        raise LevelError(f"level {n} outside 0..{MAX_LEVEL + 1}")
    key = ("level", n)
    hit = env._nf_cache.get(key)
    if hit is None:
        hit = CechLevel(n, env, envelope_regular(env, xi_names(env, n)))
        env._nf_cache[key] = hit
    return hit


def monotone_maps(n: int, m: int) -> list[tuple[int, ...]]:
    return [tuple(c) for c in combinations_with_replacement(range(m + 1), n + 1)]


def coface_map(n: int, k: int) -> tuple[int, ...]:
    """delta^k: [n] -> [n+1], the injection skipping k."""
    if not 0 <= k <= n + 1:
        raise LevelError(f"coface position {k} out of range for level {n}")
    return tuple(i if i < k else i + 1 for i in range(n + 1))


def codegeneracy_map(n: int, k: int) -> tuple[int, ...]:
    """sigma^k: [n] -> [n-1], the surjection repeating k."""
    if not 0 <= k <= n - 1:
        raise LevelError(f"codegeneracy position {k} out of range for level {n}")
    return tuple(i if i <= k else i - 1 for i in range(n + 1))


@dataclass
class CosimplicialMap:
    source: CechLevel
    target: CechLevel
    f: tuple[int, ...]
    _map: RingMap | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.f) != self.source.n + 1 or any(not 0 <= v <= self.target.n for v in self.f):
            raise LevelError(f"{self.f} is not a map [{self.source.n}] -> [{self.target.n}]")
        if any(a > b for a, b in zip(self.f, self.f[1:])):
            raise LevelError(f"{self.f} is not monotone")

    @property
    def ring_map(self) -> RingMap:
        if self._map is None:
            src, tgt = self.source, self.target
            env = tgt.env
            f0 = self.f[0]
            lift = Lifting(src.base, env, [tgt.xi(i, f0) for i in range(src.nb)])
            core = lift.ring_map.images[: src.env.core_len]
            free = []
            for e in range(1, src.n + 1):
                for i in range(src.nb):
                    free.append(tgt.xi(i, self.f[e]) - tgt.xi(i, f0))
            self._map = RingMap(src.env.ambient, env.ambient, list(core) + free, post=env.normal_form)
        return self._map

    def __call__(self, a: PDElement) -> PDElement:
        return self.target.env.normal_form(self.ring_map(a))

    def transport(self, c: CrystalData) -> list[list[PDElement]]:
        """Comparison matrix: M (x)_{iota_{f(0)}} D(m) -> M (x)_{iota_0} D(m)."""
        key = ("transport", id(c), self.target.n, self.f[0])
        cache = self.target.env._nf_cache
        if key not in cache or cache[key][0] is not c:
            tgt = self.target
            phi1 = Lifting(c.env, tgt.env, [tgt.xi(i, self.f[0]) for i in range(tgt.nb)])
            phi2 = Lifting.identity(c.env, tgt.env)
            cache[key] = (c, taylor_transport(c, phi1, phi2))
        return cache[key][1]


def structure_map(env: EnvelopePresentation, f: Sequence[int], m: int) -> CosimplicialMap:
    return CosimplicialMap(build_level(env, len(f) - 1), build_level(env, m), tuple(f))


def coface(env: EnvelopePresentation, n: int, k: int) -> CosimplicialMap:
    return structure_map(env, coface_map(n, k), n + 1)


def codegeneracy(env: EnvelopePresentation, n: int, k: int) -> CosimplicialMap:
    return structure_map(env, codegeneracy_map(n, k), n - 1)


def compose(f: Sequence[int], g: Sequence[int]) -> tuple[int, ...]:
    """g o f."""
    return tuple(g[v] for v in f)


def check_cosimplicial_identities(env: EnvelopePresentation, max_level: int = 3) -> Report:
    """Induced ring maps compose like the underlying monotone maps (checked on generators)."""
    for n in range(max_level):
        src = build_level(env, n)
        gens = [src.env.ambient.var(v) for v in src.env.ambient.names]
        for m in range(max_level):
            for f in monotone_maps(n, m):
                F = structure_map(env, f, m)
                for k in range(max_level + 1):
                    for g in monotone_maps(m, k):
                        G = structure_map(env, g, k)
                        GF = structure_map(env, compose(f, g), k)
                        for a in gens:
                            if not GF.target.env.is_zero(G(F(a)) - GF(a)):
                                return Report(False, f"composition fails for f={f}, g={g} on {a}", (f, g, a))
    return Report(True, "cosimplicial identities hold")


# ---------------------------------------------------------------------------
# forms on a level in the slot basis
# ---------------------------------------------------------------------------


@dataclass
class FormSpace:
    """M(n) (x) Omega^k_{D(n)}, generators (I, j, b): dx_I (slot basis) * m_j * basis_b."""

    level: CechLevel
    k: int
    rank: int
    keys: list[tuple[tuple[int, ...], int, int]]
    pos: dict

    @property
    def orders(self) -> list[int]:
        basis = self.level.env.basis
        return [basis[b].order for (_, _, b) in self.keys]

    @property
    def weights(self) -> list[int]:
        ws = self.level.env.basis_weights()
        return [ws[b] + self.k for (_, _, b) in self.keys]


def form_space(level: CechLevel, k: int, rank: int) -> FormSpace:
    key = ("forms", k, rank)
    hit = level.env._nf_cache.get(key)
    if hit is None:
        slots = range(len(level.omega_dirs_of_slot()))
        ws = level.env.basis_weights()
        # form weight = coefficient weight + k; keeping weight <= d is a quotient complex
        keep = [b for b in range(len(ws)) if ws[b] + k <= level.env.d]
        keys = [(I, j, b) for I in combinations(slots, k) for j in range(rank) for b in keep]
        hit = FormSpace(level, k, rank, keys, {key: t for t, key in enumerate(keys)})
        level.env._nf_cache[key] = hit
    return hit


def _sort_sign(seq: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    if len(set(seq)) < len(seq):
        return 0, ()
    s = list(seq)
    sign = 1
    for i in range(len(s)):
        for j in range(len(s) - 1 - i):
            if s[j] > s[j + 1]:
                s[j], s[j + 1] = s[j + 1], s[j]
                sign = -sign
    return sign, tuple(s)


def _slot_derivatives(level: CechLevel, b: int) -> dict[int, dict[int, int]]:
    """d(basis_b) on the slot basis: coefficient vectors keyed by slot-form index.

    With x = x(0) and xi(e) = x(e) - x(0): dx = dx(0), dxi(e) = dx(e) - dx(0).
    """
    env = level.env
    key = ("slotd", b)
    hit = env._nf_cache.get(key)
    if hit is not None:
        return hit
    comps = env.d_vectors(b)  # along dx_i, then dxi_i(e) in ambient order
    nb = level.nb
    out: dict[int, dict[int, int]] = {}

    def add(slot_idx, vec, sign):
        acc = out.setdefault(slot_idx, {})
        for t, c in vec.items():
            acc[t] = acc.get(t, 0) + sign * c

    for i in range(nb):
        add(i, comps[i], 1)
    for e in range(1, level.n + 1):
        for i in range(nb):
            vec = comps[nb + (e - 1) * nb + i]
            add(e * nb + i, vec, 1)
            add(i, vec, -1)
    env._nf_cache[key] = out
    return out


def vertical_matrix(c: CrystalData, level: CechLevel, k: int) -> np.ndarray:
    """de Rham differential M(n) (x) Omega^k -> Omega^{k+1} on the slot basis.

    The connection on M(n) is pulled back along x -> x(0), so it only
    contributes along the slot-0 forms dx_i(0).
    """
    env = level.env
    src, tgt = form_space(level, k, c.rank), form_space(level, k + 1, c.rank)
    D = np.zeros((len(tgt.keys), len(src.keys)), dtype=np.int64)
    gamma_vecs = _pulled_connection(c, level)
    for col, (I, j, b) in enumerate(src.keys):
        for sidx, vec in _slot_derivatives(level, b).items():
            sign, J = _sort_sign((sidx,) + I)
            if sign == 0:
                continue
            for bb, coef in vec.items():
                t = tgt.pos.get((J, j, bb))
                if t is not None:
                    D[t, col] += sign * coef
        if gamma_vecs:
            for i in range(level.nb):
                sign, J = _sort_sign((i,) + I)
                if sign == 0:
                    continue
                for l in range(c.rank):
                    for bb, coef in gamma_vecs.get((b, i, l, j), {}).items():
                        t = tgt.pos.get((J, l, bb))
                        if t is not None:
                            D[t, col] += sign * coef
    return D % env.q


def _pulled_connection(c: CrystalData, level: CechLevel) -> dict:
    if c.is_constant:
        return {}
    env = level.env
    key = ("gamma", id(c))
    hit = env._nf_cache.get(key)
    if hit is not None and hit[0] is c:
        return hit[1]
    emb = Lifting.identity(c.env, env)
    G = [[[emb(a) for a in row] for row in Gi] for Gi in c.connection]
    out = {}
    for b in range(len(env.basis)):
        mono = env.basis_element(b)
        for i in range(level.nb):
            for l in range(c.rank):
                for j in range(c.rank):
                    if not G[i][l][j].is_zero():
                        out[(b, i, l, j)] = env.to_vector(mono * G[i][l][j])
    env._nf_cache[key] = (c, out)
    return out


def structure_matrix(c: CrystalData, F: CosimplicialMap, k: int) -> np.ndarray:
    """c_F on M(n) (x) Omega^k: m_j a dx_I -> c_F(m_j) F(a) dx_{F(I)}."""
    src_l, tgt_l = F.source, F.target
    src, tgt = form_space(src_l, k, c.rank), form_space(tgt_l, k, c.rank)
    env_t = tgt_l.env
    nb = src_l.nb
    T = None if (c.is_constant or F.f[0] == 0) else F.transport(c)
    D = np.zeros((len(tgt.keys), len(src.keys)), dtype=np.int64)
    img_cache: dict[int, PDElement] = {}
    for col, (I, j, b) in enumerate(src.keys):
        slots = [F.f[s // nb] * nb + s % nb for s in I]
        sign, J = _sort_sign(slots)
        if sign == 0:
            continue
        a = img_cache.get(b)
        if a is None:
            a = F(src_l.env.basis_element(b))
            img_cache[b] = a
        if T is None:
            for bb, coef in env_t.to_vector(a, reduced=True).items():
                t = tgt.pos.get((J, j, bb))
                if t is not None:
                    D[t, col] += sign * coef
        else:
            for l in range(c.rank):
                if T[l][j].is_zero():
                    continue
                for bb, coef in env_t.to_vector(a * T[l][j]).items():
                    t = tgt.pos.get((J, l, bb))
                    if t is not None:
                        D[t, col] += sign * coef
    return D % env_t.q


def horizontal_matrix(c: CrystalData, n: int, k: int) -> np.ndarray:
    """Alternating sum of cofaces M(n) (x) Omega^k -> M(n+1) (x) Omega^k."""
    total = None
    for pos in range(n + 2):
        M = structure_matrix(c, coface(c.env, n, pos), k)
        total = M if total is None else total + (-1) ** pos * M
    return total % c.env.q


# ---------------------------------------------------------------------------
# Cech-Alexander complex and rows
# ---------------------------------------------------------------------------


def _row_complex(c: CrystalData, k: int, L: int) -> CochainComplex:
    spaces = [form_space(build_level(c.env, n), k, c.rank) for n in range(L + 1)]
    diffs = [horizontal_matrix(c, n, k) for n in range(L)]
    graded = c.is_constant
    return CochainComplex(
        c.env.p, c.env.e, 0, [len(s.keys) for s in spaces], diffs,
        orders=[s.orders for s in spaces], weights=[s.weights for s in spaces] if graded else None,
    )


def ca_complex(c: CrystalData, L: int) -> CochainComplex:
    """M(0) -> M(1) -> ... -> M(L) with the alternating coface differential."""
    if not 0 <= L <= MAX_LEVEL:
        raise LevelError(f"maximal level must be in 0..{MAX_LEVEL}")
    return _row_complex(c, 0, L)


# ---------------------------------------------------------------------------
# the explicit homotopy
# ---------------------------------------------------------------------------


def alpha(n: int, j: int) -> tuple[int, ...]:
    """alpha^n_j: [n] -> [1], alpha(i) = 0 iff i < j (0 <= j <= n+1)."""
    return tuple(0 if i < j else 1 for i in range(n + 1))


def alpha_index(beta: Sequence[int]) -> int:
    return sum(1 for v in beta if v == 0)


@dataclass
class HomotopyGadget:
    """h_n(e_i)(alpha^n_j) = e_i if i < j else 0, on M_n = Z e_0 + ... + Z e_n."""

    def h(self, n: int, i: int, j: int) -> int:
        """Coefficient of e_i in h_n(e_i)(alpha^n_j)."""
        return 1 if i < j else 0

    def pullback_alpha(self, f: Sequence[int], m: int, j: int) -> int:
        """alpha^m_j o f = alpha^n_{j'}."""
        return sum(1 for v in f if v < j)

    # ev_0 and ev_1 are evaluation at alpha_0 (constant 1) and alpha_{n+1} (constant 0)
    def ev0(self, n: int) -> int:
        return 0

    def ev1(self, n: int) -> int:
        return n + 1


def _cosimplicial_matrix(f: Sequence[int], m: int) -> np.ndarray:
    M = np.zeros((m + 1, len(f)), dtype=np.int64)
    for i, v in enumerate(f):
        M[v, i] = 1
    return M


def _delta(n: int) -> np.ndarray:
    return sum((-1) ** k * _cosimplicial_matrix(coface_map(n, k), n + 1) for k in range(n + 2))


def _contraction(n: int, gadget: HomotopyGadget) -> np.ndarray:
    """s_n: M_n -> M_{n-1}, s = -sum_j (-1)^j sigma^j o ev_{alpha_{j+1}} o h."""
    S = np.zeros((n, n + 1), dtype=np.int64)
    for j in range(n):
        sig = _cosimplicial_matrix(codegeneracy_map(n, j), n - 1)
        H = np.diag([gadget.h(n, i, j + 1) for i in range(n + 1)])
        S -= (-1) ** j * sig @ H
    return S


def homotopy_check(L: int = 4) -> Report:
    """Cosimplicial morphism property, evaluations, and the chain contraction."""
    if not 0 <= L <= 4:
        raise LevelError("homotopy checks run for L <= 4")
    g = HomotopyGadget()
    checked = 0
    for n in range(L + 1):
        for m in range(L + 1):
            for f in monotone_maps(n, m):
                for i in range(n + 1):
                    for j in range(m + 2):
                        # h_m(M(f) e_i)(alpha_j) versus M(f)(h_n(e_i)(alpha_j o f))
                        lhs = g.h(m, f[i], j)
                        rhs = g.h(n, i, g.pullback_alpha(f, m, j))
                        checked += 1
                        if lhs != rhs:
                            return Report(False, f"cosimplicial property fails at f={f}, i={i}, j={j}", (f, i, j))
    for n in range(L + 1):
        for i in range(n + 1):
            if g.h(n, i, g.ev0(n)) != 0 or g.h(n, i, g.ev1(n)) != 1:
                return Report(False, f"evaluation identities fail at level {n}", n)
    top = min(L, 3)
    for n in range(top + 1):
        lhs = _contraction(n + 1, g) @ _delta(n)
        if n >= 1:
            lhs = lhs + _delta(n - 1) @ _contraction(n, g)
        if not np.array_equal(lhs, np.eye(n + 1, dtype=np.int64)):
            return Report(False, f"ds + sd != id at level {n}", lhs)
    return Report(True, f"{checked} cosimplicial identities, evaluations, and ds + sd = id for levels <= {top}")


def row_contraction(c: CrystalData, n: int, k: int) -> np.ndarray:
    """Homotopy M(n) (x) Omega^k -> M(n-1) (x) Omega^k obtained from h on the
    slot forms, tensored with the identity on coefficients.

    s(m a dx_I) = -sum_j (-1)^j [every slot of I is <= j] sigma^j(m a) dx_{sigma^j(I)}.
    """
    if n == 0:
        lvl = build_level(c.env, 0)
        sp = form_space(lvl, k, c.rank)
        return np.zeros((0, len(sp.keys)), dtype=np.int64)
    src_l = build_level(c.env, n)
    src = form_space(src_l, k, c.rank)
    tgt = form_space(build_level(c.env, n - 1), k, c.rank)
    nb = src_l.nb
    total = np.zeros((len(tgt.keys), len(src.keys)), dtype=np.int64)
    for j in range(n):
        F = codegeneracy(c.env, n, j)
        M = structure_matrix(c, F, k)
        mask = np.array([all(s // nb <= j for s in I) for (I, _, _) in src.keys], dtype=bool)
        total -= (-1) ** j * M * mask[None, :]
    return total % c.env.q


@dataclass
class RowWitness:
    complex: CochainComplex
    homotopies: list[np.ndarray]
    ok: bool
    detail: str


def omega_rows(c: CrystalData, k: int, L: int) -> RowWitness:
    """The row M(.) (x) Omega^k for k >= 1 with its contracting homotopy."""
    if k < 1:
        raise LevelError("rows are contractible only in form degree >= 1")
    if not 0 <= L <= MAX_LEVEL:
        raise LevelError(f"maximal level must be in 0..{MAX_LEVEL}")
    cx = _row_complex(c, k, L)
    q = c.env.q
    hs = [row_contraction(c, n, k) for n in range(L + 1)]
    # levels 0..L-1 have both neighbours inside the truncated row
    for n in range(L):
        lhs = hs[n + 1] @ cx.diffs[n]
        if n >= 1:
            lhs = lhs + cx.diffs[n - 1] @ hs[n]
        eye = np.eye(cx.ranks[n], dtype=np.int64)
        if np.any((lhs - eye) % q):
            return RowWitness(cx, hs, False, f"dh + hd != id at level {n}")
    if L == 0:
        return RowWitness(cx, hs, True, "single term: no level-1 term to contract through; nothing verified")
    return RowWitness(cx, hs, True, f"dh + hd = id on levels 0..{L - 1}")


# ---------------------------------------------------------------------------
# double complex
# ---------------------------------------------------------------------------


@dataclass
class DoubleComplex:
    crystal: CrystalData
    L: int
    max_form: int
    spaces: dict[tuple[int, int], FormSpace]
    horizontal: dict[tuple[int, int], np.ndarray]
    vertical: dict[tuple[int, int], np.ndarray]

    def check(self) -> Report:
        q = self.crystal.env.q
        for (n, m), H in self.horizontal.items():
            if (n + 1, m) in self.horizontal and np.any(self.horizontal[(n + 1, m)] @ H % q):
                return Report(False, f"horizontal^2 != 0 at ({n},{m})")
            if (n, m + 1) in self.horizontal and (n, m) in self.vertical and (n + 1, m) in self.vertical:
                lhs = self.horizontal[(n, m + 1)] @ self.vertical[(n, m)]
                rhs = self.vertical[(n + 1, m)] @ H
                if np.any((lhs - rhs) % q):
                    return Report(False, f"square ({n},{m}) does not commute")
        for (n, m), V in self.vertical.items():
            if (n, m + 1) in self.vertical and np.any(self.vertical[(n, m + 1)] @ V % q):
                return Report(False, f"vertical^2 != 0 at ({n},{m})")
        return Report(True, "double complex identities hold")

    def column(self, n: int) -> CochainComplex:
        ms = [m for m in range(self.max_form + 1) if (n, m) in self.spaces]
        sp = [self.spaces[(n, m)] for m in ms]
        graded = self.crystal.is_constant
        return CochainComplex(
            self.crystal.env.p, self.crystal.env.e, 0, [len(s.keys) for s in sp],
            [self.vertical[(n, m)] for m in ms[:-1]],
            orders=[s.orders for s in sp], weights=[s.weights for s in sp] if graded else None,
        )

    def row(self, m: int) -> CochainComplex:
        ns = [n for n in range(self.L + 1) if (n, m) in self.spaces]
        sp = [self.spaces[(n, m)] for n in ns]
        graded = self.crystal.is_constant
        return CochainComplex(
            self.crystal.env.p, self.crystal.env.e, 0, [len(s.keys) for s in sp],
            [self.horizontal[(n, m)] for n in ns[:-1]],
            orders=[s.orders for s in sp], weights=[s.weights for s in sp] if graded else None,
        )

    def dump(self) -> str:
        from .ring import SparseMatrix

        out = []
        p, e = self.crystal.env.p, self.crystal.env.e
        for kind, mats in (("h", self.horizontal), ("v", self.vertical)):
            for (n, m), M in sorted(mats.items()):
                out.append(f"# {kind} ({n}, {m})")
                out.append(SparseMatrix.from_dense(M, p, e).dump().rstrip("\n"))
        return "\n".join(out) + "\n"


def double_complex(c: CrystalData, L: int, max_form: int | None = None, max_total: int | None = None) -> DoubleComplex:
    """Entries M^{n,m} for n <= L, m <= max_form and n + m <= max_total.

    Both bounds default to L, which makes Tot^k complete for k <= L.
    """
    if not 0 <= L <= 2:
        raise LevelError("double complexes are built for L <= 2")
    top = L if max_form is None else max_form
    total = L if max_total is None else max_total
    spaces, hor, ver = {}, {}, {}
    for n in range(L + 1):
        lvl = build_level(c.env, n)
        nforms = len(lvl.omega_dirs_of_slot())
        for m in range(min(top, nforms) + 1):
            if n + m > total:
                continue
            spaces[(n, m)] = form_space(lvl, m, c.rank)
    for (n, m) in spaces:
        if (n + 1, m) in spaces:
            hor[(n, m)] = horizontal_matrix(c, n, m)
        if (n, m + 1) in spaces:
            ver[(n, m)] = vertical_matrix(c, build_level(c.env, n), m)
    return DoubleComplex(c, L, top, spaces, hor, ver)


def totalize(dc: DoubleComplex) -> CochainComplex:
    """Tot^k = sum_{n+m=k} M^{n,m}, d = horizontal + (-1)^n vertical."""
    q = dc.crystal.env.q
    degs = sorted({n + m for (n, m) in dc.spaces})
    layout: dict[int, list[tuple[int, int, int]]] = {}
    for k in degs:
        off = 0
        parts = []
        for n in range(k + 1):
            if (n, k - n) in dc.spaces:
                size = len(dc.spaces[(n, k - n)].keys)
                parts.append((n, k - n, off))
                off += size
        layout[k] = parts
    ranks, orders, weights, diffs = [], [], [], []
    for k in degs:
        ranks.append(sum(len(dc.spaces[(n, m)].keys) for n, m, _ in layout[k]))
        orders.append([a for n, m, _ in layout[k] for a in dc.spaces[(n, m)].orders])
        weights.append([w for n, m, _ in layout[k] for w in dc.spaces[(n, m)].weights])
    for t, k in enumerate(degs[:-1]):
        D = np.zeros((ranks[t + 1], ranks[t]), dtype=np.int64)
        tgt_off = {(n, m): off for n, m, off in layout[k + 1]}
        for n, m, off in layout[k]:
            size = len(dc.spaces[(n, m)].keys)
            if (n, m) in dc.horizontal and (n + 1, m) in tgt_off:
                H = dc.horizontal[(n, m)]
                o = tgt_off[(n + 1, m)]
                D[o : o + H.shape[0], off : off + size] += H
            if (n, m) in dc.vertical and (n, m + 1) in tgt_off:
                V = dc.vertical[(n, m)]
                o = tgt_off[(n, m + 1)]
                D[o : o + V.shape[0], off : off + size] += (-1) ** n * V
        diffs.append(D % q)
    graded = dc.crystal.is_constant
    return CochainComplex(
        dc.crystal.env.p, dc.crystal.env.e, degs[0], ranks, diffs, orders=orders, weights=weights if graded else None
    )


def projection_to_column(dc: DoubleComplex, tot: CochainComplex, k: int) -> np.ndarray:
    """Tot^k -> M^{0,k} (a chain map Tot -> column 0)."""
    sizes = []
    for n in range(k + 1):
        if (n, k - n) in dc.spaces:
            sizes.append((n, len(dc.spaces[(n, k - n)].keys)))
    total = sum(s for _, s in sizes)
    out = np.zeros((sizes[0][1] if sizes and sizes[0][0] == 0 else 0, total), dtype=np.int64)
    if out.shape[0]:
        out[:, : out.shape[0]] = np.eye(out.shape[0], dtype=np.int64)
    return out


def projection_to_row(dc: DoubleComplex, tot: CochainComplex, k: int) -> np.ndarray:
    """Tot^k -> M^{k,0} (a chain map Tot -> row 0 up to the sign (-1)^k on verticals)."""
    sizes = [(n, len(dc.spaces[(n, k - n)].keys)) for n in range(k + 1) if (n, k - n) in dc.spaces]
    total = sum(s for _, s in sizes)
    off = 0
    for n, s in sizes:
        if n == k:
            out = np.zeros((s, total), dtype=np.int64)
            out[:, off : off + s] = np.eye(s, dtype=np.int64)
            return out
        off += s
    return np.zeros((0, total), dtype=np.int64)


def induced_image_length(src: CochainComplex, tgt: CochainComplex, F: np.ndarray, deg: int,
                         weight: int | None = None) -> int:
    """Length of the image of H^deg(src) -> H^deg(tgt) under the chain map F."""
    zm = src.zm

    def block(cx, kk):
        if cx.weights is None or weight is None:
            return np.arange(cx.ranks[kk])
        return np.array([j for j, w in enumerate(cx.weights[kk]) if w == weight], dtype=np.int64)

    ks, kt = src.term(deg), tgt.term(deg)
    s_idx, t_idx = block(src, ks), block(tgt, kt)
    if s_idx.size == 0 or t_idx.size == 0:
        return 0
    if ks < len(src.diffs):
        nxt = block(src, ks + 1)
        d_out = src.diffs[ks][np.ix_(nxt, s_idx)]
        Z = _kernel_generators(d_out, [src.orders[ks + 1][j] for j in nxt], s_idx.size, zm, False)
    else:
        Z = np.eye(s_idx.size, dtype=np.int64)
    img = F[np.ix_(t_idx, s_idx)] @ Z % zm.q
    t_orders = [tgt.orders[kt][j] for j in t_idx]
    if kt >= 1:
        prv = block(tgt, kt - 1)
        B = tgt.diffs[kt - 1][np.ix_(t_idx, prv)]
    else:
        B = np.zeros((t_idx.size, 0), dtype=np.int64)
    both = np.hstack([img, B]) if B.size else img
    lb = submodule_length(B, zm, t_orders) if B.size else 0
    return submodule_length(both, zm, t_orders) - lb


def column_map_check(dc: DoubleComplex, degrees: Sequence[int]) -> Report:
    """Column cohomology H^m(M^{n,.}) is the same for every n, and the
    horizontal map between consecutive columns is 0 for n even and an
    isomorphism for n odd.  Only weights <= d are compared."""
    d = dc.crystal.env.d
    tables = {}

    def lengths(n, cx, m):
        if (n, m) not in tables:
            tab = cohomology(cx, degrees=[m])
            acc: dict = {}
            for s in tab.groups.get(m, []):
                acc[s.weight] = acc.get(s.weight, 0) + s.exponent
            tables[(n, m)] = acc
        return tables[(n, m)]

    msgs = []
    for n in range(dc.L):
        src, tgt = dc.column(n), dc.column(n + 1)
        for m in degrees:
            if m not in src.degrees or m not in tgt.degrees or (n, m) not in dc.horizontal:
                continue
            # cohomology in degree m is only complete if the next form degree is present
            full = all(
                (nn, m + 1) in dc.spaces or m + 1 > len(build_level(dc.crystal.env, nn).omega_dirs_of_slot())
                for nn in (n, n + 1)
            )
            if not full:
                continue
            F = dc.horizontal[(n, m)]
            ls, lt = lengths(n, src, m), lengths(n + 1, tgt, m)
            ws = sorted(set(src.weights[src.term(m)])) if src.weights is not None else [None]
            for w in ws:
                if w is not None and w > d:
                    continue
                hs, ht = ls.get(w, 0), lt.get(w, 0)
                if hs != ht:
                    return Report(False, f"H^{m} of columns {n} and {n + 1} differ in weight {w}: {hs} vs {ht}")
                im = induced_image_length(src, tgt, F, m, w)
                if n % 2 == 0 and im != 0:
                    return Report(False, f"H^{m} col {n} -> col {n + 1} (weight {w}) is nonzero")
                if n % 2 == 1 and im != ht:
                    return Report(False, f"H^{m} col {n} -> col {n + 1} (weight {w}) is not an isomorphism")
            msgs.append(f"H^{m}: col {n} -> col {n + 1} is {'0' if n % 2 == 0 else 'iso'}")
    return Report(True, "; ".join(msgs))


# ---------------------------------------------------------------------------
# diagonal description of Omega^1
# ---------------------------------------------------------------------------


def diagonal_omega_check(env: EnvelopePresentation) -> Report:
    """In D(1), I/I^[2] is free over D on the classes of xi_i, and
    a(x + xi) - a(x) is congruent to sum_i (d_i a) xi_i modulo I^[2]."""
    if env.kind != EnvelopeKind.FLAT_LIFT:
        raise LevelError("diagonal check is stated for flat lifts")
    lvl = build_level(env, 1)
    d1 = lvl.env
    cl = d1.core_len

    def xi_degree(b) -> int:
        return sum(b.free)

    # I/I^[2] = span of basis elements of xi-degree exactly 1
    lin = [b for b in d1.basis if xi_degree(b) == 1]
    want = sorted((b.order, b.weight + 1) for b in env.basis for _ in range(env.nb) if b.weight + 1 <= env.d)
    got = sorted((b.order, b.weight) for b in lin)
    if want != got:
        return Report(False, "I/I^[2] does not match Omega^1_D summand by summand")
    d0 = coface(env, 0, 0)
    dd1 = coface(env, 0, 1)
    for i in range(len(env.basis)):
        a = env.basis_element(i)
        diff = d1.normal_form(d0(a) - dd1(a))
        lin_part = d1.ambient.zero()
        for k in range(env.nb):
            lin_part = lin_part + lvl.xi(k, 1) * Lifting.identity(env, d1)(env.partial(a, k))
        r = d1.normal_form(diff - lin_part)
        if any(sum(m[cl:]) < 2 for m in r.terms):
            return Report(False, f"a(x+xi) - a(x) - sum d_i a xi_i not in I^[2] for a = {a}")
    return Report(True, "I/I^[2] = Omega^1_D with xi_i -> dx_i")


# ---------------------------------------------------------------------------
# Poincare lemma for D(n) over D
# ---------------------------------------------------------------------------


def relative_de_rham(env: EnvelopePresentation, n: int = 1):
    """de Rham complex of D(n) relative to D: only the xi-directions."""
    from .crystal import de_rham_complex

    lvl = build_level(env, n)
    c = CrystalData.constant(lvl.env)
    dirs = list(range(lvl.env.nb, lvl.env.nb + n * env.nb))
    return de_rham_complex(c, directions=dirs)


def poincare_lemma(env: EnvelopePresentation, n: int = 1) -> Report:
    """H^0 of the relative complex is D weight by weight and higher cohomology vanishes."""
    dr = relative_de_rham(env, n)
    tab = cohomology(dr.complex)
    want: dict[int, int] = {}
    for b in env.basis:
        want[b.weight] = want.get(b.weight, 0) + b.order
    got = {w: sum(ex) for w, ex in tab.by_weight(0).items()}
    higher = {k: tab.by_weight(k) for k in tab.groups if k > 0 and tab.groups[k]}
    summary = {"H0": got, "higher": {k: v for k, v in higher.items()}}
    if got != want:
        return Report(False, f"H^0 lengths {got} differ from D {want}", summary)
    if higher:
        return Report(False, f"nonzero H^{min(higher)}", summary)
    return Report(True, "H^0 = D and higher cohomology vanishes", summary)
