import numpy as np
import pytest

from _support import flat_line, level
from crystalcoh.cechalex import (
    LevelError,
    ca_complex,
    check_cosimplicial_identities,
    codegeneracy_map,
    coface_map,
    column_map_check,
    compose,
    diagonal_omega_check,
    double_complex,
    form_space,
    homotopy_check,
    monotone_maps,
    omega_rows,
    poincare_lemma,
    structure_map,
    totalize,
)
from crystalcoh.compare import bo_presentation
from crystalcoh.crystal import CrystalData, de_rham_complex
from crystalcoh.envelope import SchemePresentation, build_envelope
from crystalcoh.ring import cohomology


def plane(p=2, e=2, d=4):
    return build_envelope(SchemePresentation.from_strings(p, 1, ["x", "y"], []), e, d)


def test_monotone_maps_count():
    from math import comb

    for n in range(4):
        for m in range(4):
            assert len(monotone_maps(n, m)) == comb(n + m + 1, n + 1)


def test_simplicial_identities_on_maps():
    # d^j d^i = d^i d^(j-1) for i < j, s^j d^i = d^i s^(j-1) for i < j
    for n in range(3):
        for i in range(n + 2):
            for j in range(i + 1, n + 3):
                # compose(f, g) is "f, then g"
                lhs = compose(coface_map(n, i), coface_map(n + 1, j))
                rhs = compose(coface_map(n, j - 1), coface_map(n + 1, i))
                assert lhs == rhs
    for n in range(3):
        for i in range(n + 1):
            assert compose(coface_map(n, i), codegeneracy_map(n + 1, i)) == tuple(range(n + 1))


def test_homotopy_identities():
    rep = homotopy_check(3)
    assert rep.ok, rep.detail


@pytest.mark.parametrize("env_fn", [lambda: flat_line(2, 2, 4), lambda: plane(3, 2, 3),
                                    lambda: build_envelope(bo_presentation(2), 2, 4)])
def test_levels_form_a_cosimplicial_ring(env_fn):
    rep = check_cosimplicial_identities(env_fn(), 2)
    assert rep.ok, rep.detail


def test_structure_maps_fix_divided_powers():
    env = build_envelope(bo_presentation(3), 2, 6)
    F = structure_map(env, (0, 2), 2)
    y = env.ambient.var("y1")
    img = F(y)
    assert img.in_pd_ideal()


def test_ca_differential_on_the_line():
    env = flat_line(3, 2, 5)
    c = CrystalData.constant(env)
    cx = ca_complex(c, 1)
    lvl = level(env, 1)
    fs0, fs1 = form_space(level(env, 0), 0, 1), form_space(lvl, 0, 1)
    B = lvl.env
    x = B.ambient.var("x")
    xi = lvl.xi(0, 1)
    for k in range(6):
        b = next(i for i in range(len(env.basis)) if env.basis_label(i) == ("1" if k == 0 else "x" if k == 1 else f"x^{k}"))
        got = cx.diffs[0][:, fs0.pos[((), 0, b)]] % env.q
        want_el = B.normal_form((x + xi) ** k - x**k)
        want = np.zeros(len(fs1.keys), dtype=np.int64)
        for t, v in B.to_vector(want_el).items():
            want[fs1.pos[((), 0, t)]] = v
        assert np.array_equal(got, want % env.q), k


def test_ca_h0_equals_de_rham_h0():
    env = flat_line(2, 2, 6)
    c = CrystalData.constant(env)
    ca = cohomology(ca_complex(c, 1), degrees=[0])
    dr = cohomology(de_rham_complex(c).complex, degrees=[0])
    assert ca.by_weight(0) == dr.by_weight(0)


@pytest.mark.parametrize("k", [1, 2])
def test_omega_rows_contract(k):
    env = plane(2, 2, 4)
    w = omega_rows(CrystalData.constant(env), k, 3)
    assert w.ok, w.detail
    tab = cohomology(w.complex, degrees=[0, 1, 2])
    assert all(not tab.groups[d] for d in (0, 1, 2))


def test_omega_rows_with_connection():
    env = flat_line(2, 2, 4)
    c = CrystalData.from_strings(env, 2, {"x": [["2*x", "1"], ["0", "2"]]})
    w = omega_rows(c, 1, 2)
    assert w.ok, w.detail


def test_omega_rows_reject_degree_zero():
    with pytest.raises(LevelError):
        omega_rows(CrystalData.constant(flat_line()), 0, 2)


def test_double_complex_identities_and_columns():
    env = flat_line(2, 2, 6)
    c = CrystalData.constant(env)
    dc = double_complex(c, 2, max_form=1, max_total=3)
    assert dc.check().ok
    rep = column_map_check(dc, [0])
    assert rep.ok, rep.detail
    tot = totalize(dc)
    tot.validate()


def test_double_complex_with_connection_commutes():
    env = flat_line(2, 2, 5)
    c = CrystalData.from_strings(env, 2, {"x": [["2*x", "1"], ["0", "2"]]})
    dc = double_complex(c, 2, max_form=1, max_total=3)
    assert dc.check().ok
    dump = dc.dump()
    assert dump.startswith("# h (0, 0)")


def test_diagonal_description():
    for env in (flat_line(2, 2, 5), plane(3, 2, 4)):
        rep = diagonal_omega_check(env)
        assert rep.ok, rep.detail


@pytest.mark.parametrize("names", [["x"], ["x", "y"]])
def test_poincare_lemma(names):
    env = build_envelope(SchemePresentation.from_strings(2, 1, names, []), 2, 6)
    rep = poincare_lemma(env)
    assert rep.ok, rep.detail


def test_level_cap():
    with pytest.raises(LevelError):
        ca_complex(CrystalData.constant(flat_line()), 4)
