"""Exact linear algebra over Z/p^e.

Everything here works with residues in ``[0, p^e)`` held in numpy ``int64``
arrays.  The modulus is kept small (``p^e < 2^20``) so products and short
dot products never overflow.

The central routines are

* :func:`snf_dense` -- Smith normal form by minimal-valuation pivoting,
* :func:`howell_form` / :func:`reduce_rows` -- canonical reduction modulo a
  submodule (used for normal forms and for cohomology representatives),
* :func:`cohomology` -- elementary divisors and representatives of the
  cohomology of a bounded complex of finite Z/p^e-modules.

A term of a complex is a direct sum ``Z/p^{a_1} + ... + Z/p^{a_n}`` given by
its list of *orders* ``a_j``; free terms have every order equal to ``e``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_MODULUS = 1 << 20


class PrecisionError(ValueError):
    """Raised when an operation is meaningless at the requested precision."""


# ---------------------------------------------------------------------------
# scalars
# ---------------------------------------------------------------------------


class Zmod:
    """The ring Z/p^e together with valuation and unit-inverse tables."""

    def __init__(self, p: int, e: int):
        if p < 2 or any(p % k == 0 for k in range(2, int(p**0.5) + 1)):
            raise ValueError(f"{p} is not prime")
        if e < 1:
            raise ValueError("precision exponent must be >= 1")
        self.p = p
        self.e = e
        self.q = p**e
        if self.q >= MAX_MODULUS:
            raise ValueError(f"modulus {p}^{e} too large for int64 kernels")
        vals = np.full(self.q, e, dtype=np.int64)
        inv = np.zeros(self.q, dtype=np.int64)
        for x in range(1, self.q):
            v, u = 0, x
            while u % p == 0:
                u //= p
                v += 1
            vals[x] = v
            if v == 0:
                inv[x] = pow(x, -1, self.q)
        self.val_table = vals
        self.inv_table = inv

    def __repr__(self):
        return f"Zmod({self.p}, {self.e})"

    def __eq__(self, other):
        return isinstance(other, Zmod) and (self.p, self.e) == (other.p, other.e)

    def __hash__(self):
        return hash((self.p, self.e))

    def valuation(self, x: int) -> int:
        return int(self.val_table[x % self.q])

    def unit_inverse(self, u: int) -> int:
        u %= self.q
        if u % self.p == 0:
            raise ZeroDivisionError(f"{u} is not a unit mod {self.q}")
        return int(self.inv_table[u])

    def pow_p(self, k: int) -> int:
        return self.p**k % self.q if k < self.e else 0


@lru_cache(maxsize=None)
def zmod(p: int, e: int) -> Zmod:
    return Zmod(p, e)


@dataclass(frozen=True)
class ModularScalar:
    """A residue modulo p^e.  Arithmetic stays inside the same ring."""

    value: int
    p: int
    e: int

    def __post_init__(self):
        object.__setattr__(self, "value", self.value % self.p**self.e)

    def _wrap(self, v):
        return ModularScalar(v, self.p, self.e)

    def _other(self, o):
        if isinstance(o, ModularScalar):
            if (o.p, o.e) != (self.p, self.e):
                raise ValueError("scalars from different rings")
            return o.value
        return int(o)

    def __add__(self, o):
        return self._wrap(self.value + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return self._wrap(self.value - self._other(o))

    def __rsub__(self, o):
        return self._wrap(self._other(o) - self.value)

    def __mul__(self, o):
        return self._wrap(self.value * self._other(o))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.value)

    def __int__(self):
        return self.value

    @property
    def valuation(self) -> int:
        return zmod(self.p, self.e).valuation(self.value)


def legendre(n: int, p: int) -> int:
    """Exponent of p in n!."""
    s = 0
    while n:
        n //= p
        s += n
    return s


@lru_cache(maxsize=None)
def _factorial_units(p: int, e: int, n: int) -> tuple[int, ...]:
    q = p**e
    out = [1]
    acc = 1
    for i in range(1, n + 1):
        while i % p == 0:
            i //= p
        acc = acc * i % q
        out.append(acc)
    return tuple(out)


def factorial_unit(n: int, p: int, e: int) -> int:
    """n! / p^{v_p(n!)} reduced mod p^e."""
    size = 64
    while size < n:
        size *= 2
    return _factorial_units(p, e, size)[n]


def ratio_of_factorials(num: Sequence[int], den: Sequence[int], p: int, e: int, extra_val: int = 0) -> int:
    """p^extra_val * prod(num!) / prod(den!) mod p^e, for an integral result.

    Computed from Legendre valuations and unit parts, never via big
    integers.
    """
    q = p**e
    v = extra_val + sum(legendre(n, p) for n in num) - sum(legendre(n, p) for n in den)
    if v < 0:
        raise ValueError("ratio of factorials is not p-integral")
    if v >= e:
        return 0
    u = 1
    for n in num:
        u = u * factorial_unit(n, p, e) % q
    for n in den:
        u = u * pow(factorial_unit(n, p, e), -1, q) % q
    return p**v * u % q


def binom_mod(n: int, k: int, p: int, e: int) -> int:
    if k < 0 or k > n:
        return 0
    return ratio_of_factorials([n], [k, n - k], p, e)


def divided_power_of_p_power(n: int, v: int, p: int, e: int) -> int:
    """(p^v)^n / n! mod p^e, the value of gamma_n(p^v)."""
    if n == 0:
        return 1 % p**e
    return ratio_of_factorials([], [n], p, e, extra_val=v * n)


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SparseMatrix:
    """Matrix over Z/p^e keyed by (row, col); zero entries are never stored."""

    rows: int
    cols: int
    p: int
    e: int
    entries: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        q = self.p**self.e
        clean = {}
        for (i, j), v in self.entries.items():
            if not (0 <= i < self.rows and 0 <= j < self.cols):
                raise IndexError(f"entry ({i}, {j}) outside {self.rows}x{self.cols}")
            v = int(v) % q
            if v:
                clean[(i, j)] = v
        object.__setattr__(self, "entries", dict(sorted(clean.items())))

    @classmethod
    def from_dense(cls, a, p: int, e: int) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.int64) % p**e
        rows, cols = a.shape
        nz = np.nonzero(a)
        return cls(rows, cols, p, e, {(int(i), int(j)): int(a[i, j]) for i, j in zip(*nz)})

    @classmethod
    def identity(cls, n: int, p: int, e: int) -> "SparseMatrix":
        return cls(n, n, p, e, {(i, i): 1 for i in range(n)})

    def dense(self) -> np.ndarray:
        a = np.zeros((self.rows, self.cols), dtype=np.int64)
        for (i, j), v in self.entries.items():
            a[i, j] = v
        return a

    def __matmul__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.cols != other.rows or (self.p, self.e) != (other.p, other.e):
            raise ValueError("incompatible matrices")
        q = self.p**self.e
        by_row: dict[int, list[tuple[int, int]]] = {}
        for (k, j), v in other.entries.items():
            by_row.setdefault(k, []).append((j, v))
        out: dict[tuple[int, int], int] = {}
        for (i, k), v in self.entries.items():
            for j, w in by_row.get(k, ()):
                out[(i, j)] = (out.get((i, j), 0) + v * w) % q
        return SparseMatrix(self.rows, other.cols, self.p, self.e, out)

    def __eq__(self, other):
        return (
            isinstance(other, SparseMatrix)
            and (self.rows, self.cols, self.p, self.e) == (other.rows, other.cols, other.p, other.e)
            and self.entries == other.entries
        )

    def dump(self) -> str:
        lines = [f"{self.rows} {self.cols} {self.p} {self.e}"]
        lines += [f"{i} {j} {v}" for (i, j), v in self.entries.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "SparseMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        rows, cols, p, e = map(int, lines[0].split())
        entries = {}
        for ln in lines[1:]:
            i, j, v = map(int, ln.split())
            entries[(i, j)] = v
        return cls(rows, cols, p, e, entries)


def as_dense(m, zm: Zmod) -> np.ndarray:
    if isinstance(m, SparseMatrix):
        return m.dense()
    return np.asarray(m, dtype=np.int64).reshape(np.shape(m)) % zm.q


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------


@dataclass
class SNF:
    """Result of :func:`snf_dense`: ``U @ A @ V == D`` with ``D`` diagonal.

    ``vals`` lists the valuations of the nonzero diagonal entries, which are
    exactly ``p^vals[k]`` and nondecreasing.  Matrices not requested are None.
    """

    vals: list[int]
    D: np.ndarray
    U: np.ndarray | None = None
    V: np.ndarray | None = None
    Uinv: np.ndarray | None = None
    Vinv: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return len(self.vals)


def snf_dense(a, zm: Zmod, want: Iterable[str] = ("U", "V")) -> SNF:
    want = set(want)
    q, p, e = zm.q, zm.p, zm.e
    A = np.array(a, dtype=np.int64, copy=True) % q
    if A.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    m, n = A.shape
    U = np.eye(m, dtype=np.int64) if "U" in want else None
    Uinv = np.eye(m, dtype=np.int64) if "Uinv" in want else None
    V = np.eye(n, dtype=np.int64) if "V" in want else None
    Vinv = np.eye(n, dtype=np.int64) if "Vinv" in want else None
    vt = zm.val_table
    vals: list[int] = []
    k = 0
    while k < min(m, n):
        sub = vt[A[k:, k:]]
        flat = int(np.argmin(sub))
        r, c = divmod(flat, n - k)
        v = int(sub[r, c])
        if v >= e:
            break
        r += k
        c += k
        if r != k:
            A[[k, r]] = A[[r, k]]
            if U is not None:
                U[[k, r]] = U[[r, k]]
            if Uinv is not None:
                Uinv[:, [k, r]] = Uinv[:, [r, k]]
        if c != k:
            A[:, [k, c]] = A[:, [c, k]]
            if V is not None:
                V[:, [k, c]] = V[:, [c, k]]
            if Vinv is not None:
                Vinv[[k, c]] = Vinv[[c, k]]
        pv = p**v
        unit = int(A[k, k]) // pv
        if unit != 1:
            uinv = int(zm.inv_table[unit])
            A[k] = A[k] * uinv % q
            if U is not None:
                U[k] = U[k] * uinv % q
            if Uinv is not None:
                Uinv[:, k] = Uinv[:, k] * unit % q
        # row elimination below the pivot
        col = A[k + 1 :, k]
        nz = np.nonzero(col)[0]
        if nz.size:
            rows = k + 1 + nz
            t = col[nz] // pv
            A[rows, k:] = (A[rows, k:] - np.outer(t, A[k, k:])) % q
            if U is not None:
                U[rows] = (U[rows] - np.outer(t, U[k])) % q
            if Uinv is not None:
                Uinv[:, k] = (Uinv[:, k] + Uinv[:, rows] @ t) % q
        # column elimination right of the pivot
        row = A[k, k + 1 :]
        nz = np.nonzero(row)[0]
        if nz.size:
            cols = k + 1 + nz
            s = row[nz] // pv
            A[k, cols] = 0
            if V is not None:
                V[:, cols] = (V[:, cols] - np.outer(V[:, k], s)) % q
            if Vinv is not None:
                Vinv[k] = (Vinv[k] + s @ Vinv[cols]) % q
        vals.append(v)
        k += 1
    return SNF(vals, A, U, V, Uinv, Vinv)


def snf(m: SparseMatrix) -> tuple[list[ModularScalar], SparseMatrix, SparseMatrix]:
    """Smith normal form of a sparse matrix: ``(diag, U, V)`` with ``U m V = diag``.

    ``diag`` has ``min(rows, cols)`` entries ``p^{v_1}, ..., 0, ...``.
    """
    zm = zmod(m.p, m.e)
    res = snf_dense(m.dense(), zm, want=("U", "V"))
    diag = [ModularScalar(p_pow, m.p, m.e) for p_pow in (m.p**v for v in res.vals)]
    diag += [ModularScalar(0, m.p, m.e)] * (min(m.rows, m.cols) - len(diag))
    return (
        diag,
        SparseMatrix.from_dense(res.U, m.p, m.e),
        SparseMatrix.from_dense(res.V, m.p, m.e),
    )


def submodule_length(gens: np.ndarray, zm: Zmod, orders: Sequence[int] | None = None) -> int:
    """Length (as a Z/p-filtered module) of the span of the columns of ``gens``.

    With ``orders`` the ambient module is ``sum Z/p^{a_j}`` instead of free.
    """
    gens = np.asarray(gens, dtype=np.int64)
    n = gens.shape[0]
    if orders is None or all(a == zm.e for a in orders):
        if gens.size == 0:
            return 0
        return sum(zm.e - v for v in snf_dense(gens, zm, want=()).vals)
    # span(gens) + R has length = len(span) + len(R) - ..., use the quotient
    rel = _relation_columns(orders, zm)
    total = np.hstack([gens.reshape(n, -1), rel])
    full = sum(zm.e - v for v in snf_dense(total, zm, want=()).vals) if total.size else 0
    rel_len = sum(zm.e - a for a in orders)
    return full - rel_len


def _relation_columns(orders: Sequence[int], zm: Zmod) -> np.ndarray:
    idx = [j for j, a in enumerate(orders) if a < zm.e]
    r = np.zeros((len(orders), len(idx)), dtype=np.int64)
    for c, j in enumerate(idx):
        r[j, c] = zm.pow_p(orders[j])
    return r


# ---------------------------------------------------------------------------
# Howell form: canonical reduction modulo a row span
# ---------------------------------------------------------------------------


@dataclass
class Howell:
    """Reduced strong echelon form of a row span over Z/p^e.

    ``pivots[k] = (col, val)`` with ``rows[k]`` having ``p^val`` at ``col`` and
    zeros before it.  Reduction of any vector modulo the span is canonical.
    """

    ncols: int
    rows: np.ndarray
    pivots: list[tuple[int, int]]
    zm: Zmod

    def pivot_orders(self) -> dict[int, int]:
        return {c: v for c, v in self.pivots}

    def reduce(self, vecs: np.ndarray) -> np.ndarray:
        return reduce_rows(vecs, self)


def howell_form(rows, zm: Zmod, ncols: int | None = None) -> Howell:
    q, p, e = zm.q, zm.p, zm.e
    R = np.asarray(rows, dtype=np.int64)
    if ncols is None:
        ncols = R.shape[1] if R.ndim == 2 else 0
    R = R.reshape(-1, ncols) % q
    R = R[np.any(R, axis=1)]
    vt = zm.val_table
    pivot_rows: list[np.ndarray] = []
    pivots: list[tuple[int, int]] = []
    for c in range(ncols):
        if R.shape[0] == 0:
            break
        colvals = vt[R[:, c]]
        i = int(np.argmin(colvals))
        v = int(colvals[i])
        if v >= e:
            continue
        piv = R[i].copy()
        unit = int(piv[c]) // p**v
        if unit != 1:
            piv = piv * int(zm.inv_table[unit]) % q
        R = np.delete(R, i, axis=0)
        nz = np.nonzero(R[:, c])[0]
        if nz.size:
            t = R[nz, c] // p**v
            R[nz] = (R[nz] - np.outer(t, piv)) % q
        if v > 0:
            extra = piv * p ** (e - v) % q
            if np.any(extra):
                R = np.vstack([R, extra[None, :]])
        R = R[np.any(R, axis=1)]
        pivot_rows.append(piv)
        pivots.append((c, v))
    H = np.array(pivot_rows, dtype=np.int64).reshape(len(pivot_rows), ncols)
    # back-substitution: reduce each row at later pivot columns
    for a in range(len(pivots)):
        for b in range(a + 1, len(pivots)):
            c, v = pivots[b]
            x = int(H[a, c])
            if x >= p**v:
                H[a] = (H[a] - (x // p**v) * H[b]) % q
    return Howell(ncols, H, pivots, zm)


def reduce_rows(vecs, h: Howell) -> np.ndarray:
    """Canonical representatives of row vectors modulo the span of ``h``."""
    q, p = h.zm.q, h.zm.p
    X = np.array(vecs, dtype=np.int64, copy=True) % q
    single = X.ndim == 1
    X = X.reshape(-1, h.ncols)
    for k, (c, v) in enumerate(h.pivots):
        t = X[:, c] // p**v
        nz = np.nonzero(t)[0]
        if nz.size:
            X[nz] = (X[nz] - np.outer(t[nz], h.rows[k])) % q
    return X[0] if single else X


# ---------------------------------------------------------------------------
# complexes and cohomology
# ---------------------------------------------------------------------------


@dataclass
class CochainComplex:
    """Bounded cochain complex of finite Z/p^e-modules.

    ``ranks[k]`` generators sit in degree ``start + k``; ``diffs[k]`` is the
    ``ranks[k+1] x ranks[k]`` matrix of the differential out of that degree.
    ``orders[k][j]`` is the exponent of the cyclic summand of generator j
    (default ``e``).  ``weights`` optionally grades every term; differentials
    must then preserve weight, and cohomology is computed blockwise.
    """

    p: int
    e: int
    start: int
    ranks: list[int]
    diffs: list[np.ndarray]
    orders: list[list[int]] | None = None
    weights: list[list[int]] | None = None
    check: bool = True

    def __post_init__(self):
        zm = self.zm
        if len(self.diffs) != max(len(self.ranks) - 1, 0):
            raise ValueError("need one differential between consecutive degrees")
        self.diffs = [as_dense(d, zm).reshape(self.ranks[k + 1], self.ranks[k]) for k, d in enumerate(self.diffs)]
        if self.orders is None:
            self.orders = [[self.e] * r for r in self.ranks]
        else:
            self.orders = [list(o) for o in self.orders]
            if any(len(o) != r for o, r in zip(self.orders, self.ranks)):
                raise ValueError("orders do not match ranks")
            if any(not 0 <= a <= self.e for o in self.orders for a in o):
                raise ValueError("orders must lie in [0, e]")
        if self.weights is not None:
            self.weights = [list(w) for w in self.weights]
            if any(len(w) != r for w, r in zip(self.weights, self.ranks)):
                raise ValueError("weights do not match ranks")
        if self.check:
            self.validate()

    @property
    def zm(self) -> Zmod:
        return zmod(self.p, self.e)

    @property
    def degrees(self) -> range:
        return range(self.start, self.start + len(self.ranks))

    def term(self, deg: int) -> int:
        return deg - self.start

    def _reduce_to_orders(self, M: np.ndarray, orders: Sequence[int]) -> np.ndarray:
        mods = np.array([self.p**a for a in orders], dtype=np.int64).reshape(-1, 1)
        return M % mods if M.size else M

    def validate(self):
        zm = self.zm
        for k, d in enumerate(self.diffs):
            src, tgt = self.orders[k], self.orders[k + 1]
            # well defined on torsion generators
            scaled = d * np.array([zm.pow_p(a) if a < self.e else 0 for a in src], dtype=np.int64) % zm.q
            if np.any(self._reduce_to_orders(scaled, tgt)):
                raise ValueError(f"differential out of degree {self.start + k} is not well defined")
            if self.weights is not None:
                wt = np.array(self.weights[k + 1]).reshape(-1, 1)
                ws = np.array(self.weights[k]).reshape(1, -1)
                if np.any((d % zm.q != 0) & (wt != ws)):
                    raise ValueError(f"differential out of degree {self.start + k} does not preserve weight")
        for k in range(len(self.diffs) - 1):
            dd = self.diffs[k + 1] @ self.diffs[k] % zm.q
            if np.any(self._reduce_to_orders(dd, self.orders[k + 2])):
                raise ValueError(f"d o d != 0 out of degree {self.start + k}")

    def length(self, deg: int) -> int:
        return sum(self.orders[self.term(deg)])

    def dump(self) -> str:
        out = [f"complex {self.p} {self.e} start {self.start} ranks {' '.join(map(str, self.ranks))}"]
        for k, d in enumerate(self.diffs):
            out.append(f"# d{self.start + k}")
            out.append(SparseMatrix.from_dense(d, self.p, self.e).dump().rstrip("\n"))
        return "\n".join(out) + "\n"


@dataclass
class Summand:
    """One cyclic summand Z/p^exponent of a cohomology group."""

    exponent: int
    rep: dict[int, int]
    weight: int | None = None


@dataclass
class CohomologyTable:
    p: int
    e: int
    groups: dict[int, list[Summand]] = field(default_factory=dict)
    lifted: bool = False

    def exponents(self, deg: int, max_weight: int | None = None) -> list[int]:
        return sorted(
            s.exponent
            for s in self.groups.get(deg, [])
            if max_weight is None or s.weight is None or s.weight <= max_weight
        )

    def by_weight(self, deg: int, max_weight: int | None = None) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for s in self.groups.get(deg, []):
            if max_weight is not None and s.weight is not None and s.weight > max_weight:
                continue
            out.setdefault(s.weight, []).append(s.exponent)
        return {w: sorted(v) for w, v in sorted(out.items(), key=lambda kv: (kv[0] is None, kv[0]))}

    def length(self, deg: int) -> int:
        return sum(self.exponents(deg))

    def nonzero_degrees(self) -> list[int]:
        return sorted(d for d, g in self.groups.items() if g)

    def as_dict(self, max_weight: int | None = None) -> dict:
        return {
            str(d): [
                {"exponent": s.exponent, "weight": s.weight, "rep": {str(k): v for k, v in sorted(s.rep.items())}}
                for s in self.groups[d]
                if max_weight is None or s.weight is None or s.weight <= max_weight
            ]
            for d in sorted(self.groups)
        }

    def describe(self, deg: int, max_weight: int | None = None) -> str:
        ex = self.exponents(deg, max_weight)
        if not ex:
            return "0"
        parts = []
        for a in sorted(set(ex)):
            n = ex.count(a)
            name = ("Z_p" if self.lifted else f"Z/{self.p}^{a}") if a == self.e else f"Z/{self.p}^{a}"
            parts.append(name if n == 1 else f"({name})^{n}")
        return " + ".join(parts)


def _kernel_generators(d: np.ndarray, tgt_orders: Sequence[int], n_src: int, zm: Zmod, lifted: bool) -> np.ndarray:
    """Columns generating {x : d x = 0 in sum Z/p^{b_k}} (lifted to Z/p^e)."""
    rel = _relation_columns(tgt_orders, zm)
    M = np.hstack([d.reshape(len(tgt_orders), n_src), rel]) if rel.size else d.reshape(len(tgt_orders), n_src)
    ncols = M.shape[1]
    if M.shape[0] == 0 or not np.any(M):
        return np.eye(n_src, dtype=np.int64)
    res = snf_dense(M, zm, want=("V",))
    gens = []
    for j in range(ncols):
        if j < res.rank:
            v = res.vals[j]
            if lifted or v == 0:
                continue
            gens.append(res.V[:, j] * zm.pow_p(zm.e - v) % zm.q)
        else:
            gens.append(res.V[:, j])
    if not gens:
        return np.zeros((n_src, 0), dtype=np.int64)
    return np.array(gens, dtype=np.int64).T[:n_src]


def subquotient(G: np.ndarray, B: np.ndarray, zm: Zmod, lifted: bool = False) -> list[tuple[int, np.ndarray]]:
    """Decompose span(G)/span(B) for span(B) inside span(G).

    Returns ``(exponent, representative column)`` for every nontrivial cyclic
    summand.  In ``lifted`` mode the modules are read as Z_p-modules known
    modulo p^e: nonzero diagonal entries are treated as injective and the
    exponent ``e`` stands for a free summand.
    """
    q, p, e = zm.q, zm.p, zm.e
    n, s = G.shape
    if s == 0:
        return []
    res = snf_dense(G, zm, want=("U", "Uinv"))
    r = res.rank
    UB = res.U @ (B % q) % q if B.size else np.zeros((n, 0), dtype=np.int64)
    Y = np.zeros((s, UB.shape[1]), dtype=np.int64)
    for j in range(r):
        pv = p ** res.vals[j]
        if np.any(UB[j] % pv):
            raise ValueError("B is not contained in span(G)")
        Y[j] = UB[j] // pv
    if r < n and np.any(UB[r:]):
        raise ValueError("B is not contained in span(G)")
    kill = []
    for j in range(s):
        if j < r:
            if not lifted and res.vals[j] > 0:
                col = np.zeros(s, dtype=np.int64)
                col[j] = zm.pow_p(e - res.vals[j])
                kill.append(col)
        else:
            col = np.zeros(s, dtype=np.int64)
            col[j] = 1
            kill.append(col)
    R = np.hstack([Y, np.array(kill, dtype=np.int64).T.reshape(s, -1)]) if kill else Y
    if R.size and np.any(R):
        rr = snf_dense(R, zm, want=("Uinv",))
        vals = rr.vals + [e] * (s - rr.rank)
        Uinv = rr.Uinv
    else:
        vals = [e] * s
        Uinv = np.eye(s, dtype=np.int64)
    out = []
    scale = np.array([p ** res.vals[j] if j < r else 0 for j in range(s)], dtype=np.int64)
    for k, w in enumerate(vals):
        if w == 0:
            continue
        z = Uinv[:, k] * scale % q
        rep = res.Uinv[:, :r] @ z[:r] % q
        out.append((w, rep))
    return out


def _degree_block(c: CochainComplex, k: int, idx: dict[int, np.ndarray] | None):
    """Matrices and orders around term k restricted to a weight block."""
    def sel(kk):
        if kk < 0 or kk >= len(c.ranks):
            return np.zeros(0, dtype=np.int64)
        return idx[kk] if idx is not None else np.arange(c.ranks[kk])

    here, nxt, prv = sel(k), sel(k + 1), sel(k - 1)
    d_out = c.diffs[k][np.ix_(nxt, here)] if k < len(c.diffs) else np.zeros((0, here.size), dtype=np.int64)
    d_in = c.diffs[k - 1][np.ix_(here, prv)] if k >= 1 else np.zeros((here.size, 0), dtype=np.int64)
    o_here = [c.orders[k][j] for j in here]
    o_next = [c.orders[k + 1][j] for j in nxt] if k + 1 < len(c.ranks) else []
    return here, d_out, d_in, o_here, o_next


def _cohomology_block(c, k, idx, lifted, weight):
    zm = c.zm
    here, d_out, d_in, o_here, o_next = _degree_block(c, k, idx)
    n = here.size
    if n == 0:
        return []
    G = _kernel_generators(d_out, o_next, n, zm, lifted) if d_out.shape[0] else np.eye(n, dtype=np.int64)
    rel = _relation_columns(o_here, zm)
    B = np.hstack([d_in, rel]) if rel.size else d_in
    if lifted and B.size:
        # boundaries are cocycles of any Z_p-lift even when the chosen integer
        # representatives of d compose to p^e * (nonzero)
        G = np.hstack([G, B % zm.q])
    pieces = subquotient(G, B, zm, lifted=lifted)
    if not pieces:
        return []
    if B.size and np.any(B):
        h = howell_form(B.T, zm, ncols=n)
    else:
        h = None
    out = []
    for w, rep in pieces:
        if h is not None:
            rep = reduce_rows(rep, h)
        rep = np.array([int(x) % c.p ** o for x, o in zip(rep, o_here)], dtype=np.int64)
        out.append(Summand(w, {int(here[j]): int(rep[j]) for j in np.nonzero(rep)[0]}, weight))
    return out


def _weight_blocks(c: CochainComplex):
    if c.weights is None:
        return [(None, None)]
    ws = sorted({w for wl in c.weights for w in wl})
    blocks = []
    for w in ws:
        idx = {k: np.array([j for j, x in enumerate(wl) if x == w], dtype=np.int64) for k, wl in enumerate(c.weights)}
        blocks.append((w, idx))
    return blocks


def cohomology(c: CochainComplex, degrees: Iterable[int] | None = None, lifted: bool = False) -> CohomologyTable:
    """Cohomology of ``c`` as a table of elementary-divisor exponents with
    cocycle representatives (indices refer to the generators of each term)."""
    if lifted and c.e < 2:
        raise PrecisionError("lifted cohomology needs precision e >= 2")
    table = CohomologyTable(c.p, c.e, lifted=lifted)
    degs = list(c.degrees) if degrees is None else [d for d in degrees if d in c.degrees]
    for deg in degs:
        k = c.term(deg)
        summands = []
        for w, idx in _weight_blocks(c):
            summands.extend(_cohomology_block(c, k, idx, lifted, w))
        table.groups[deg] = summands
    return table


def multiplication_cone(c: CochainComplex, k: int = 1) -> CochainComplex:
    """Mapping cone of multiplication by p^k, indexed so that the cone of
    ``c -> c`` starts in degree ``c.start - 1``.

    cone^n = c^{n+1} + c^n with d(a, b) = (-d a, p^k a + d b).
    """
    q = c.zm.q
    pk = c.p**k % q
    n_terms = len(c.ranks) + 1
    ranks, orders, weights, diffs = [], [], [], []

    def part(j):
        return c.ranks[j] if 0 <= j < len(c.ranks) else 0

    for t in range(n_terms):
        # cone term t (degree start-1+t) = c^{t} + c^{t-1}
        ranks.append(part(t) + part(t - 1))
        orders.append((c.orders[t] if t < len(c.ranks) else []) + (c.orders[t - 1] if t >= 1 else []))
        if c.weights is not None:
            weights.append((c.weights[t] if t < len(c.ranks) else []) + (c.weights[t - 1] if t >= 1 else []))
    for t in range(n_terms - 1):
        a_src, b_src = part(t), part(t - 1)
        a_tgt, b_tgt = part(t + 1), part(t)
        M = np.zeros((a_tgt + b_tgt, a_src + b_src), dtype=np.int64)
        if t < len(c.diffs) and a_tgt and a_src:
            M[:a_tgt, :a_src] = -c.diffs[t] % q
        if a_src:
            M[a_tgt : a_tgt + b_tgt, :a_src] = np.eye(a_src, dtype=np.int64) * pk
        if t - 1 >= 0 and t - 1 < len(c.diffs) and b_src and b_tgt:
            M[a_tgt:, a_src:] = c.diffs[t - 1]
        diffs.append(M % q)
    return CochainComplex(
        c.p, c.e, c.start - 1, ranks, diffs, orders=orders, weights=weights if c.weights is not None else None
    )


def derived_mod_p(c: CochainComplex, k: int = 1) -> CohomologyTable:
    """Cohomology of ``c (x)^L Z/p^k`` computed as the cone of p^k.

    ``c`` is read as a complex of Z_p-modules known modulo p^e: summands of
    order ``e`` are free, smaller orders are genuine torsion.  Hence
    H^{start-1} of the result is the p^k-torsion of H^start(c).
    """
    if c.e < 2:
        raise PrecisionError("derived reduction needs e >= 2 (at e = 1, p is already zero)")
    if not 1 <= k < c.e:
        raise PrecisionError("need 1 <= k < e")
    return cohomology(multiplication_cone(c, k), lifted=True)


def euler_length(c: CochainComplex) -> int:
    return sum((-1) ** d * c.length(d) for d in c.degrees)
