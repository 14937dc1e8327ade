"""Degree-truncated divided-power polynomial algebras over Z/p^e.

An algebra has ordinary ("base") variables ``x_i`` and divided-power
variables ``y_t``.  A monomial is an exponent tuple ``(alpha..., beta...)``
standing for ``x^alpha * prod gamma_{beta_t}(y_t)``; its weight is
``sum alpha_i wt(x_i) + sum beta_t wt(y_t)`` and only monomials of weight
``<= d`` are kept.  Dropping a heavier term sets the ``lossy`` flag on the
result.

Text syntax (used by fixtures and the CLI)::

    expr   := ['-'] term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := INT | NAME ['^' INT] | 'g(' NAME ',' INT ')'

``g(y,k)`` is gamma_k(y).  For a divided-power variable, ``y`` alone means
gamma_1(y) and ``y^k`` is the ordinary power ``k! gamma_k(y)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .ring import binom_mod, divided_power_of_p_power, ratio_of_factorials, zmod

Monomial = tuple[int, ...]


class PDIdealError(ValueError):
    """gamma_n applied to an element outside the divided-power ideal."""


class ParseError(ValueError):
    def __init__(self, msg: str, text: str, pos: int):
        super().__init__(f"{msg} at position {pos} in {text!r}")
        self.msg = msg
        self.text = text
        self.pos = pos

    def __str__(self):
        return f"{self.msg} at position {self.pos} in {self.text!r}"


def weighted_monomials(weights: Sequence[int], w: int) -> list[Monomial]:
    """All exponent tuples of total weight exactly ``w``."""
    n = len(weights)
    out: list[Monomial] = []

    def rec(i, left, acc):
        if i == n:
            if left == 0:
                out.append(tuple(acc))
            return
        wt = weights[i]
        for k in range(left // wt + 1):
            acc.append(k)
            rec(i + 1, left - k * wt, acc)
            acc.pop()

    if n == 0:
        return [()] if w == 0 else []
    rec(0, w, [])
    return out


@dataclass(frozen=True)
class PDPolyAlgebra:
    p: int
    e: int
    base: tuple[str, ...]
    pd: tuple[str, ...]
    d: int
    base_weights: tuple[int, ...] = ()
    pd_weights: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.base_weights:
            object.__setattr__(self, "base_weights", (1,) * len(self.base))
        if not self.pd_weights:
            object.__setattr__(self, "pd_weights", (1,) * len(self.pd))
        if len(self.base_weights) != len(self.base) or len(self.pd_weights) != len(self.pd):
            raise ValueError("one weight per variable")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        names = self.base + self.pd
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")
        zmod(self.p, self.e)

    @property
    def q(self) -> int:
        return self.p**self.e

    @property
    def zm(self):
        return zmod(self.p, self.e)

    @property
    def nb(self) -> int:
        return len(self.base)

    @property
    def nvars(self) -> int:
        return len(self.base) + len(self.pd)

    @property
    def names(self) -> tuple[str, ...]:
        return self.base + self.pd

    @property
    def weights(self) -> tuple[int, ...]:
        return self.base_weights + self.pd_weights

    def weight(self, m: Monomial) -> int:
        return sum(a * w for a, w in zip(m, self.weights))

    def index(self, name: str) -> int:
        return self.names.index(name)

    def monomials_of_weight(self, w: int) -> list[Monomial]:
        """Monomials of weight ``w`` in canonical (descending graded-lex) order."""
        return self._monos_cache(w)

    def _monos_cache(self, w):
        cache = self.__dict__.setdefault("_mono_cache", {})
        if w not in cache:
            cache[w] = sorted(weighted_monomials(self.weights, w), reverse=True)
        return cache[w]

    def monomials(self, max_weight: int | None = None) -> list[Monomial]:
        top = self.d if max_weight is None else min(max_weight, self.d)
        return [m for w in range(top + 1) for m in self.monomials_of_weight(w)]

    @cached_property
    def _mul_cache(self) -> dict:
        return {}

    def mono_mul(self, a: Monomial, b: Monomial) -> tuple[int, Monomial | None]:
        """Product of two monomials as ``(coefficient, monomial)``; the monomial
        is None when the product exceeds the truncation degree."""
        key = (a, b) if a <= b else (b, a)
        cache = self._mul_cache
        hit = cache.get(key)
        if hit is not None:
            return hit
        m = tuple(x + y for x, y in zip(a, b))
        if self.weight(m) > self.d:
            res = (0, None)
        else:
            c = 1
            nb = self.nb
            for t in range(nb, self.nvars):
                if a[t] and b[t]:
                    c = c * binom_mod(a[t] + b[t], a[t], self.p, self.e) % self.q
            res = (c, m)
        cache[key] = res
        return res

    # constructors -------------------------------------------------------

    def zero(self) -> "PDElement":
        return PDElement(self, {})

    def one(self) -> "PDElement":
        return self.const(1)

    def const(self, c: int) -> "PDElement":
        return PDElement(self, {(0,) * self.nvars: c})

    def monomial(self, m: Monomial, c: int = 1) -> "PDElement":
        if len(m) != self.nvars:
            raise ValueError("wrong monomial length")
        if self.weight(m) > self.d:
            return PDElement(self, {}, lossy=True)
        return PDElement(self, {tuple(m): c})

    def var(self, name: str) -> "PDElement":
        m = [0] * self.nvars
        m[self.index(name)] = 1
        return self.monomial(tuple(m))

    def gamma_var(self, name: str, k: int) -> "PDElement":
        i = self.index(name)
        if i < self.nb:
            raise ValueError(f"{name} is not a divided-power variable")
        m = [0] * self.nvars
        m[i] = k
        return self.monomial(tuple(m))

    def parse(self, text: str) -> "PDElement":
        return parse_element(self, text)

    def in_pd_ideal(self, m: Monomial, coef: int) -> bool:
        return any(m[self.nb :]) or coef % self.p == 0

    def extend(self, pd: Sequence[str], pd_weights: Sequence[int] | None = None, d: int | None = None) -> "PDPolyAlgebra":
        """Same algebra with additional divided-power variables appended."""
        pw = tuple(pd_weights) if pd_weights is not None else (1,) * len(pd)
        return PDPolyAlgebra(
            self.p, self.e, self.base, self.pd + tuple(pd), self.d if d is None else d,
            self.base_weights, self.pd_weights + pw,
        )


@dataclass
class PDElement:
    alg: PDPolyAlgebra
    terms: dict[Monomial, int] = field(default_factory=dict)
    lossy: bool = False

    def __post_init__(self):
        q = self.alg.q
        clean = {}
        for m, c in self.terms.items():
            c %= q
            if c:
                clean[m] = c
        self.terms = clean

    # arithmetic -------------------------------------------------------------

    def _check(self, other: "PDElement"):
        if other.alg != self.alg:
            raise ValueError("operands live in different algebras")

    def _coerce(self, other):
        if isinstance(other, PDElement):
            self._check(other)
            return other
        return self.alg.const(int(other))

    def __add__(self, other):
        other = self._coerce(other)
        t = dict(self.terms)
        for m, c in other.terms.items():
            t[m] = t.get(m, 0) + c
        return PDElement(self.alg, t, self.lossy or other.lossy)

    __radd__ = __add__

    def __neg__(self):
        return PDElement(self.alg, {m: -c for m, c in self.terms.items()}, self.lossy)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, c: int) -> "PDElement":
        return PDElement(self.alg, {m: v * c for m, v in self.terms.items()}, self.lossy)

    def __mul__(self, other):
        if not isinstance(other, PDElement):
            return self.scale(int(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.scale(int(other))

    def __pow__(self, n: int):
        out = self.alg.one()
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, int):
            other = self.alg.const(other)
        return isinstance(other, PDElement) and other.alg == self.alg and other.terms == self.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    # structure --------------------------------------------------------------

    def homogeneous(self, w: int) -> "PDElement":
        return PDElement(self.alg, {m: c for m, c in self.terms.items() if self.alg.weight(m) == w}, self.lossy)

    def weights(self) -> set[int]:
        return {self.alg.weight(m) for m in self.terms}

    def min_weight(self) -> int | None:
        return min(self.weights(), default=None)

    def in_pd_ideal(self) -> bool:
        return all(self.alg.in_pd_ideal(m, c) for m, c in self.terms.items())

    def coefficient(self, m: Monomial) -> int:
        return self.terms.get(tuple(m), 0)

    def __repr__(self):
        return f"PDElement({format_element(self)!r})"

    def __str__(self):
        return format_element(self)


def mul(a: PDElement, b: PDElement) -> PDElement:
    """Product; gamma_m(y) gamma_n(y) = C(m+n, n) gamma_{m+n}(y)."""
    a._check(b)
    alg = a.alg
    q = alg.q
    out: dict[Monomial, int] = {}
    lossy = a.lossy or b.lossy
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            c, m = alg.mono_mul(ma, mb)
            if m is None:
                lossy = True
                continue
            if c:
                out[m] = (out.get(m, 0) + ca * cb * c) % q
    return PDElement(alg, out, lossy)


def _gamma_term(alg: PDPolyAlgebra, m: Monomial, c: int, n: int) -> PDElement:
    """gamma_n of the single term c*m (which must lie in the PD ideal)."""
    if n == 0:
        return alg.one()
    if n == 1:
        return PDElement(alg, {m: c})
    p, e = alg.p, alg.e
    nb = alg.nb
    t = next((i for i in range(nb, alg.nvars) if m[i]), None)
    if t is not None:
        b = m[t]
        rest = list(m)
        rest[t] = 0
        # gamma_n(gamma_b(y)) = (nb)! / (n! (b!)^n) gamma_{nb}(y)
        coef = ratio_of_factorials([n * b], [n] + [b] * n, p, e)
        g = [0] * alg.nvars
        g[t] = n * b
        core = alg.monomial(tuple(g), coef)
        restel = PDElement(alg, {tuple(rest): c})
        return core * (restel**n)
    v = alg.zm.valuation(c)
    if v == 0:
        raise PDIdealError(f"term {format_monomial(alg, m, c)} is not in the divided-power ideal")
    unit = c // p**v
    scalar = divided_power_of_p_power(n, v, p, e)
    base = PDElement(alg, {m: unit}) ** n
    return base.scale(scalar)


def gamma(z: PDElement, n: int) -> PDElement:
    """n-th divided power of an element of the divided-power ideal."""
    if n < 0:
        raise ValueError("n must be >= 0")
    alg = z.alg
    for m, c in z.terms.items():
        if not alg.in_pd_ideal(m, c):
            raise PDIdealError(
                f"gamma_{n} undefined: term {format_monomial(alg, m, c)} is not in the divided-power ideal"
            )
    # fold gamma_k(a + b) = sum gamma_i(a) gamma_{k-i}(b) term by term
    acc = [alg.one()] + [alg.zero() for _ in range(n)]
    lossy = z.lossy
    for m, c in sorted(z.terms.items()):
        g = [_gamma_term(alg, m, c, k) for k in range(n + 1)]
        new = []
        for k in range(n + 1):
            s = alg.zero()
            for i in range(k + 1):
                if acc[i] and g[k - i]:
                    s = s + acc[i] * g[k - i]
            new.append(s)
        acc = new
    out = acc[n]
    out.lossy = out.lossy or lossy
    return out


def partial_mono(alg: PDPolyAlgebra, m: Monomial, i: int) -> tuple[int, Monomial | None]:
    """Derivative of a monomial with respect to variable i (base or PD)."""
    if m[i] == 0:
        return 0, None
    mm = list(m)
    mm[i] -= 1
    if i < alg.nb:
        return m[i] % alg.q, tuple(mm)
    # d gamma_k(y) = gamma_{k-1}(y) dy
    return 1, tuple(mm)


def partial_var(a: PDElement, i: int) -> PDElement:
    out: dict[Monomial, int] = {}
    q = a.alg.q
    for m, c in a.terms.items():
        k, mm = partial_mono(a.alg, m, i)
        if mm is not None and k:
            out[mm] = (out.get(mm, 0) + c * k) % q
    return PDElement(a.alg, out, a.lossy)


def partial(a: PDElement, i: int) -> PDElement:
    """d/dx_i for the base variable with index i."""
    if not 0 <= i < a.alg.nb:
        raise IndexError("base-variable index out of range")
    return partial_var(a, i)


def pd_d(a: PDElement) -> list[PDElement]:
    """Coefficients of da on the free basis dx_1..dx_n, dy_1..dy_r."""
    return [partial_var(a, i) for i in range(a.alg.nvars)]


class RingMap:
    """Divided-power algebra map determined by images of the variables.

    Images of divided-power variables must lie in the divided-power ideal of
    the target; gamma_k(y) maps to gamma_k(image of y).  Monomial images are
    memoised.
    """

    def __init__(self, source: PDPolyAlgebra, target: PDPolyAlgebra, images: Sequence[PDElement], post=None):
        if len(images) != source.nvars:
            raise ValueError("one image per source variable")
        for k in range(source.nb, source.nvars):
            if not images[k].in_pd_ideal():
                raise PDIdealError(f"image of {source.names[k]} is not in the divided-power ideal")
        self.source = source
        self.target = target
        self.images = list(images)
        self.post = post
        self._cache: dict[Monomial, PDElement] = {}
        self._pow: dict[tuple[int, int], PDElement] = {}

    def _factor(self, i: int, k: int) -> PDElement:
        key = (i, k)
        if key not in self._pow:
            if i < self.source.nb:
                val = self.images[i] ** k
            else:
                val = gamma(self.images[i], k)
            if self.post is not None:
                val = self.post(val)
            self._pow[key] = val
        return self._pow[key]

    def on_monomial(self, m: Monomial) -> PDElement:
        hit = self._cache.get(m)
        if hit is None:
            out = self.target.one()
            for i, k in enumerate(m):
                if k:
                    out = out * self._factor(i, k)
                    if self.post is not None:
                        out = self.post(out)
            self._cache[m] = hit = out
        return hit

    def __call__(self, a: PDElement) -> PDElement:
        out = self.target.zero()
        for m, c in a.terms.items():
            out = out + self.on_monomial(m).scale(c)
        out.lossy = out.lossy or a.lossy
        return out


# ---------------------------------------------------------------------------
# text syntax
# ---------------------------------------------------------------------------


def format_monomial(alg: PDPolyAlgebra, m: Monomial, c: int = 1) -> str:
    factors = []
    for i, k in enumerate(m):
        if not k:
            continue
        name = alg.names[i]
        if i < alg.nb:
            factors.append(name if k == 1 else f"{name}^{k}")
        else:
            factors.append(name if k == 1 else f"g({name},{k})")
    if not factors:
        return str(c)
    if c == 1:
        return "*".join(factors)
    return "*".join([str(c)] + factors)


def format_element(a: PDElement) -> str:
    if not a.terms:
        return "0"
    alg = a.alg
    items = sorted(a.terms.items(), key=lambda kv: (alg.weight(kv[0]), kv[0]), reverse=True)
    return " + ".join(format_monomial(alg, m, c) for m, c in items)


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*(?:\(\d+\))?)|(.))")


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        mt = _TOKEN.match(text, pos)
        num, name, other = mt.groups()
        start = mt.start(1) if num else mt.start(2) if name else mt.start(3)
        if num:
            toks.append(("int", int(num), start))
        elif name:
            toks.append(("name", name, start))
        else:
            toks.append(("op", other, start))
        pos = mt.end()
    toks.append(("end", None, len(text)))
    return toks


def parse_element(alg: PDPolyAlgebra, text: str) -> PDElement:
    toks = _tokenize(text)
    i = 0

    def peek():
        return toks[i]

    def take(kind=None, value=None, what="token"):
        nonlocal i
        t = toks[i]
        if (kind and t[0] != kind) or (value is not None and t[1] != value):
            raise ParseError(f"expected {what}", text, t[2])
        i += 1
        return t

    def factor():
        t = peek()
        if t[1] == "(" and t[0] == "op":
            take()
            inner = expr()
            take("op", ")", "')'")
            if peek()[1] == "^":
                take()
                return inner ** take("int", what="integer exponent")[1]
            return inner
        if t[0] == "int":
            take()
            return alg.const(t[1])
        if t[0] == "name" and t[1] == "g" and toks[i + 1][1] == "(":
            take()
            take("op", "(", "'('")
            nt = take("name", what="variable name")
            take("op", ",", "','")
            kt = take("int", what="integer")
            take("op", ")", "')'")
            if nt[1] not in alg.names:
                raise ParseError(f"unknown variable {nt[1]!r}", text, nt[2])
            if alg.index(nt[1]) < alg.nb:
                raise ParseError(f"{nt[1]!r} is not a divided-power variable", text, nt[2])
            return alg.gamma_var(nt[1], kt[1])
        if t[0] == "name":
            take()
            if t[1] not in alg.names:
                raise ParseError(f"unknown variable {t[1]!r}", text, t[2])
            v = alg.var(t[1])
            if peek()[1] == "^":
                take()
                kt = take("int", what="integer exponent")
                return v ** kt[1]
            return v
        raise ParseError("expected a number, variable or g(var,k)", text, t[2])

    def term():
        out = factor()
        while peek()[1] == "*":
            take()
            out = out * factor()
        return out

    def expr():
        sign = 1
        if peek()[1] == "-":
            take()
            sign = -1
        total = term().scale(sign)
        while peek()[1] in ("+", "-"):
            op = take()[1]
            t = term()
            total = total + t if op == "+" else total - t
        return total

    total = expr()
    if peek()[0] != "end":
        raise ParseError("unexpected input", text, peek()[2])
    return total


def parse_monomial_exponents(names: Sequence[str], text: str) -> Monomial:
    """Parse a monic base monomial like ``x^2*y`` into an exponent tuple."""
    alg = PDPolyAlgebra(1009, 1, tuple(names), (), 10**6)
    el = parse_element(alg, text)
    if len(el.terms) != 1:
        raise ParseError("expected a single monomial", text, 0)
    (m, c), = el.terms.items()
    if c != 1:
        raise ParseError("expected a monic monomial", text, 0)
    return m


def iter_terms(a: PDElement) -> Iterable[tuple[Monomial, int]]:
    return sorted(a.terms.items())
