import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crystalcoh.oracles import brute_cohomology_length, minor_valuations_oracle, snf_valuations_oracle
from crystalcoh.ring import (
    CochainComplex,
    PrecisionError,
    SparseMatrix,
    cohomology,
    derived_mod_p,
    euler_length,
    howell_form,
    reduce_rows,
    snf,
    snf_dense,
    submodule_length,
    zmod,
)

PE = st.sampled_from([(2, 1), (2, 2), (2, 3), (2, 4), (3, 1), (3, 2), (3, 3), (5, 1), (5, 2)])


@st.composite
def matrices(draw, max_dim=6):
    p, e = draw(PE)
    r = draw(st.integers(1, max_dim))
    c = draw(st.integers(1, max_dim))
    entries = draw(st.lists(st.integers(0, p**e - 1), min_size=r * c, max_size=r * c))
    a = np.array(entries, dtype=np.int64).reshape(r, c)
    if draw(st.booleans()):
        a = a * p % p**e  # push valuations up
    return p, e, a


def _exponents(res, r, c, e):
    return sorted(list(res.vals) + [e] * (min(r, c) - res.rank))


@given(matrices())
def test_snf_matches_integer_oracle(data):
    p, e, a = data
    res = snf_dense(a, zmod(p, e), want=("U", "V", "Uinv", "Vinv"))
    assert _exponents(res, *a.shape, e) == snf_valuations_oracle(a, p, e)
    q = p**e
    D = res.U @ a % q @ res.V % q
    want = np.zeros_like(D)
    for i, v in enumerate(res.vals):
        want[i, i] = p**v
    assert not np.any((D - want) % q)
    assert np.array_equal(res.U @ res.Uinv % q, np.eye(a.shape[0], dtype=np.int64))
    assert np.array_equal(res.V @ res.Vinv % q, np.eye(a.shape[1], dtype=np.int64))


@given(matrices(max_dim=4))
def test_snf_matches_determinantal_divisors(data):
    p, e, a = data
    res = snf_dense(a, zmod(p, e))
    assert _exponents(res, *a.shape, e) == minor_valuations_oracle(a, p, e)


def test_snf_sparse_interface():
    m = SparseMatrix.from_dense([[2, 4], [6, 0]], 2, 3)
    diag, U, V = snf(m)
    assert [d.valuation for d in diag] == [1, 2]
    prod = U @ m @ V
    assert prod.entries == {(0, 0): 2, (1, 1): 4}
    assert SparseMatrix.parse(m.dump()) == m


def test_snf_zero_matrix():
    diag, _, _ = snf(SparseMatrix(3, 2, 3, 2))
    assert [d.value for d in diag] == [0, 0]


@given(matrices(max_dim=5), st.integers(0, 2**31))
def test_howell_form_is_canonical(data, seed):
    p, e, a = data
    zm = zmod(p, e)
    rng = np.random.default_rng(seed)
    # same row span: unimodular row operations plus redundant combinations
    T = np.eye(a.shape[0], dtype=np.int64)
    for _ in range(6):
        i, j = rng.integers(0, a.shape[0], 2)
        if i != j:
            T[i] = (T[i] + int(rng.integers(0, p**e)) * T[j]) % p**e
    b = np.vstack([T @ a % p**e, rng.integers(0, p**e, (2, a.shape[0])) @ a % p**e])
    h1 = howell_form(a, zm)
    h2 = howell_form(b, zm)
    assert h1.pivots == h2.pivots
    assert np.array_equal(h1.rows, h2.rows)
    # reduction is idempotent and kills the span
    assert not np.any(reduce_rows(a, h1))
    v = rng.integers(0, p**e, a.shape[1])
    r = reduce_rows(v, h1)
    assert np.array_equal(reduce_rows(r, h1), r)


def test_submodule_length():
    zm = zmod(2, 3)
    assert submodule_length(np.array([[2, 0], [0, 4]]), zm) == 2 + 1
    assert submodule_length(np.array([[1], [2]]), zm, orders=[3, 1]) == 3


def _unimodular(rng, n, p, e):
    q = p**e
    g = np.eye(n, dtype=np.int64)
    gi = np.eye(n, dtype=np.int64)
    for _ in range(3 * n):
        i, j = rng.integers(0, n, 2)
        if i == j:
            continue
        t = int(rng.integers(0, q))
        g[i] = (g[i] + t * g[j]) % q  # row op E on g
        gi[:, j] = (gi[:, j] - t * gi[:, i]) % q  # inverse column op on g^-1
    return g, gi


@st.composite
def small_complexes(draw):
    """Direct sums of elementary complexes, conjugated by random base changes."""
    p, e = draw(st.sampled_from([(3, 2), (2, 2), (2, 3)]))
    pieces = draw(st.lists(st.tuples(st.integers(0, 1), st.integers(0, e)), min_size=1, max_size=3))
    n0 = sum(1 for deg, _ in pieces if deg == 0) + draw(st.integers(0, 1))
    ranks = [0, 0, 0]
    blocks = []
    for deg, v in pieces:
        blocks.append((deg, v))
        ranks[deg] += 1
        ranks[deg + 1] += 1
    ranks[0] += draw(st.integers(0, 1))
    d0 = np.zeros((ranks[1], ranks[0]), dtype=np.int64)
    d1 = np.zeros((ranks[2], ranks[1]), dtype=np.int64)
    pos = [0, 0, 0]
    for deg, v in blocks:
        s, t = pos[deg], pos[deg + 1]
        (d0 if deg == 0 else d1)[t, s] = (p**v) % p**e
        pos[deg] += 1
        pos[deg + 1] += 1
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    q = p**e
    gs = [_unimodular(rng, n, p, e) if n else (np.zeros((0, 0), dtype=np.int64),) * 2 for n in ranks]
    D0 = gs[1][0] @ d0 @ gs[0][1] % q if d0.size else d0
    D1 = gs[2][0] @ d1 @ gs[1][1] % q if d1.size else d1
    return CochainComplex(p, e, 0, ranks, [D0, D1])


@given(small_complexes())
def test_cohomology_matches_enumeration(c):
    c.validate()
    tab = cohomology(c)
    orders = c.orders
    for k in range(3):
        if c.p ** (c.e * c.ranks[k]) > 20000:
            continue
        d_in = c.diffs[k - 1] if k >= 1 else None
        d_out = c.diffs[k] if k < 2 else None
        brute = brute_cohomology_length(
            d_in, d_out,
            orders[k - 1] if k >= 1 else [],
            orders[k],
            orders[k + 1] if k < 2 else [],
            c.p, c.e,
        )
        assert tab.length(k) == brute


def test_cohomology_with_torsion_generators():
    # Z/9 --1--> Z/3 (a torsion generator) --0--> 0
    c = CochainComplex(3, 2, 0, [1, 1], [np.array([[1]])], orders=[[2], [1]])
    tab = cohomology(c)
    assert tab.exponents(0) == [1]  # kernel 3*Z/9
    assert tab.exponents(1) == []
    assert tab.length(0) == brute_cohomology_length(None, [[1]], [], [2], [1], 3, 2)


def test_cohomology_representatives_are_cocycles():
    c = CochainComplex(2, 2, 0, [2, 2], [np.array([[2, 0], [0, 0]])])
    tab = cohomology(c)
    assert tab.exponents(0) == [1, 2]
    assert tab.exponents(1) == [1, 2]
    for s in tab.groups[0]:
        v = np.zeros(2, dtype=np.int64)
        for i, x in s.rep.items():
            v[i] = x
        assert not np.any(c.diffs[0] @ v % 4)


def test_euler_length_is_invariant():
    c = CochainComplex(3, 2, 0, [2, 3], [np.array([[1, 0], [0, 3], [0, 0]])])
    tab = cohomology(c)
    assert euler_length(c) == tab.length(0) - tab.length(1)


def test_validate_rejects_non_complex():
    with pytest.raises(ValueError, match="d o d"):
        CochainComplex(2, 1, 0, [1, 1, 1], [np.array([[1]]), np.array([[1]])])
    with pytest.raises(ValueError, match="well defined"):
        CochainComplex(3, 2, 0, [1, 1], [np.array([[1]])], orders=[[1], [2]])


def test_derived_mod_p_of_free_complex_has_no_negative_degree():
    # Z_p --p--> Z_p read at precision 3: H^0 = 0, H^1 = Z/p
    c = CochainComplex(3, 3, 0, [1, 1], [np.array([[3]])])
    tab = derived_mod_p(c)
    assert tab.exponents(-1) == []
    assert tab.exponents(0) == [1]
    assert tab.exponents(1) == [1]


def test_derived_mod_p_sees_torsion_in_negative_degree():
    # H^0 = Z/p^2 as a genuine torsion module: Tor_1(Z/p^2, Z/p) = Z/p
    c = CochainComplex(3, 3, 0, [1], [], orders=[[2]])
    tab = derived_mod_p(c)
    assert tab.exponents(-1) == [1]
    assert tab.exponents(0) == [1]


def test_derived_mod_p_needs_precision():
    c = CochainComplex(2, 1, 0, [1], [])
    with pytest.raises(PrecisionError):
        derived_mod_p(c)
