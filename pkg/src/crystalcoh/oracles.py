"""Independent reference computations used by the test suite and ``selftest``.

Nothing here calls the package's own Smith form or Howell code: the SNF
oracle works over Z with Python integers, cohomology is counted by
enumeration, and divided-power constants come from exact factorials.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .pdpoly import PDElement, PDPolyAlgebra, gamma


# ---------------------------------------------------------------------------
# Smith form over Z
# ---------------------------------------------------------------------------


def integer_invariant_factors(rows: list[list[int]]) -> list[int]:
    """Invariant factors s_1 | s_2 | ... of an integer matrix (zeros at the end)."""
    a = [list(r) for r in rows]
    m = len(a)
    n = len(a[0]) if m else 0
    out = []
    for t in range(min(m, n)):
        while True:
            nz = [(abs(a[i][j]), i, j) for i in range(t, m) for j in range(t, n) if a[i][j]]
            if not nz:
                return out + [0] * (min(m, n) - len(out))
            _, i, j = min(nz)
            a[t], a[i] = a[i], a[t]
            for r in a:
                r[t], r[j] = r[j], r[t]
            piv = a[t][t]
            for i in range(t + 1, m):
                q = a[i][t] // piv
                if q:
                    a[i] = [x - q * y for x, y in zip(a[i], a[t])]
            for j in range(t + 1, n):
                q = a[t][j] // piv
                if q:
                    for r in a:
                        r[j] -= q * r[t]
            if any(a[i][t] for i in range(t + 1, m)) or any(a[t][j] for j in range(t + 1, n)):
                continue  # a smaller remainder appeared; pivot again
            bad = next((i for i in range(t + 1, m) for j in range(t + 1, n) if a[i][j] % piv), None)
            if bad is None:
                break
            a[t] = [x + y for x, y in zip(a[t], a[bad])]
        out.append(abs(a[t][t]))
    return out


def valuation(x: int, p: int, cap: int) -> int:
    if x == 0:
        return cap
    v = 0
    while x % p == 0 and v < cap:
        x //= p
        v += 1
    return v


def snf_valuations_oracle(a, p: int, e: int) -> list[int]:
    """Exponents of the Smith form of ``a`` over Z/p^e, via Z and localisation."""
    rows = [[int(x) for x in r] for r in np.asarray(a)]
    inv = integer_invariant_factors(rows)
    return sorted(min(valuation(s, p, e), e) for s in inv)


def minor_valuations_oracle(a, p: int, e: int) -> list[int]:
    """Same exponents from determinantal divisors (min valuation of k x k minors)."""
    A = [[int(x) for x in r] for r in np.asarray(a)]
    m = len(A)
    n = len(A[0]) if m else 0
    dk = [0]
    for k in range(1, min(m, n) + 1):
        best = None
        for rs in itertools.combinations(range(m), k):
            for cs in itertools.combinations(range(n), k):
                det = _bareiss([[A[i][j] for j in cs] for i in rs])
                v = valuation(det, p, 10**6) if det else None
                if v is not None and (best is None or v < best):
                    best = v
        if best is None:
            dk.extend([None] * (min(m, n) - k + 1))
            break
        dk.append(best)
    vals = []
    for k in range(1, min(m, n) + 1):
        if dk[k] is None:
            vals.append(e)
        else:
            vals.append(min(dk[k] - dk[k - 1], e))
    return sorted(vals)


def _bareiss(M: list[list[int]]) -> int:
    M = [r[:] for r in M]
    n = len(M)
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            sw = next((i for i in range(k + 1, n) if M[i][k]), None)
            if sw is None:
                return 0
            M[k], M[sw] = M[sw], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1] if n else 1


# ---------------------------------------------------------------------------
# cohomology by enumeration
# ---------------------------------------------------------------------------


def _module_elements(orders: list[int], p: int):
    return itertools.product(*[range(p**a) for a in orders])


def brute_cohomology_length(diff_in, diff_out, orders_prev, orders_here, orders_next, p: int, e: int) -> int:
    """log_p |ker(d_out) / im(d_in)| by listing every element of the modules.

    Only usable for tiny modules (a few thousand elements).
    """
    q = p**e
    here_mod = [p**a for a in orders_here]
    next_mod = [p**a for a in orders_next]

    def apply(d, vec, mods):
        if d is None or len(mods) == 0:
            return ()
        out = (np.asarray(d, dtype=np.int64) @ np.asarray(vec, dtype=np.int64)) % q if len(vec) else np.zeros(len(mods), dtype=np.int64)
        return tuple(int(x) % m for x, m in zip(out, mods))

    kernel = 0
    for v in _module_elements(orders_here, p):
        img = apply(diff_out, v, next_mod) if orders_next else ()
        if not any(img):
            kernel += 1
    image = set()
    if orders_prev:
        for u in _module_elements(orders_prev, p):
            image.add(apply(diff_in, u, here_mod))
    else:
        image.add(tuple(0 for _ in orders_here))
    ratio = Fraction(kernel, len(image))
    if ratio.denominator != 1:
        raise ValueError("image not contained in kernel")
    k = int(ratio)
    L = 0
    while k > 1:
        if k % p:
            raise ValueError("order is not a power of p")
        k //= p
        L += 1
    return L


# ---------------------------------------------------------------------------
# divided-power axioms
# ---------------------------------------------------------------------------


@dataclass
class AxiomTrial:
    name: str
    ok: bool
    skipped: bool = False


def random_ideal_element(alg: PDPolyAlgebra, rng: random.Random, max_weight: int = 2, terms: int = 3) -> PDElement:
    """Random element of the divided-power ideal: p*(anything) + (divided-power variables)."""
    out = alg.zero()
    monos = [m for w in range(0, max_weight + 1) for m in alg.monomials_of_weight(w)]
    for _ in range(rng.randint(1, terms)):
        m = rng.choice(monos)
        c = rng.randrange(1, alg.q)
        if not any(m[alg.nb :]):
            c = (c * alg.p) % alg.q or alg.p
        out = out + alg.monomial(m, c)
    return out


def random_element(alg: PDPolyAlgebra, rng: random.Random, max_weight: int = 2, terms: int = 3) -> PDElement:
    out = alg.zero()
    monos = [m for w in range(0, max_weight + 1) for m in alg.monomials_of_weight(w)]
    for _ in range(rng.randint(1, terms)):
        out = out + alg.monomial(rng.choice(monos), rng.randrange(alg.q))
    return out


def _lossy(*xs) -> bool:
    return any(x.lossy for x in xs)


def pd_axiom_trial(rng: random.Random, p: int, e: int) -> AxiomTrial:
    """One randomised check of a divided-power axiom, constants from exact factorials."""
    alg = PDPolyAlgebra(p, e, ("x",), ("u", "v"), d=40)
    q = alg.q
    kind = rng.choice(["product", "sum", "scalar", "multiplicative", "composition"])
    x = random_ideal_element(alg, rng)
    if kind == "product":
        m, n = rng.randint(0, 4), rng.randint(0, 4)
        lhs = gamma(x, m) * gamma(x, n)
        rhs = gamma(x, m + n).scale(math.comb(m + n, n) % q)
    elif kind == "sum":
        y = random_ideal_element(alg, rng)
        n = rng.randint(0, 5)
        lhs = gamma(x + y, n)
        rhs = alg.zero()
        for i in range(n + 1):
            rhs = rhs + gamma(x, i) * gamma(y, n - i)
    elif kind == "scalar":
        lam = rng.randrange(q)
        n = rng.randint(0, 5)
        lhs = gamma(x.scale(lam), n)
        rhs = gamma(x, n).scale(pow(lam, n, q))
    elif kind == "multiplicative":
        a = random_element(alg, rng, max_weight=1)
        n = rng.randint(0, 4)
        lhs = gamma(a * x, n)
        rhs = (a**n) * gamma(x, n)
    else:
        m, n = rng.randint(1, 3), rng.randint(0, 3)
        const = math.factorial(m * n) // (math.factorial(n) * math.factorial(m) ** n)
        lhs = gamma(gamma(x, m), n)
        rhs = gamma(x, m * n).scale(const % q)
    if _lossy(lhs, rhs):
        return AxiomTrial(kind, True, skipped=True)
    return AxiomTrial(kind, lhs == rhs)
