import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from _support import flat_line, level, random_crystal, random_lifting
from crystalcoh.crystal import (
    CrystalData,
    Lifting,
    TransportError,
    check_integrability,
    check_quasi_nilpotent,
    de_rham_complex,
    horizontal_sections,
    matmul,
    matrices_equal,
    taylor_transport,
    torsion_horizontal,
    transport_element,
)
from crystalcoh.envelope import SchemePresentation, build_envelope
from crystalcoh.ring import cohomology


def plane(p=2, e=2, d=5):
    return build_envelope(SchemePresentation.from_strings(p, 1, ["x", "y"], []), e, d)


def test_constant_crystal_is_integrable_and_quasi_nilpotent():
    c = CrystalData.constant(plane())
    assert check_integrability(c).ok
    assert check_quasi_nilpotent(c).ok


def test_integrability_detects_curvature():
    env = plane()
    good = CrystalData.from_strings(env, 1, {"x": [["2*y"]], "y": [["2*x"]]})
    bad = CrystalData.from_strings(env, 1, {"x": [["2*y"]]})
    assert check_integrability(good).ok
    rep = check_integrability(bad)
    assert not rep.ok and "curvature" in rep.detail


def test_quasi_nilpotence_fails_for_unit_connection():
    env = flat_line(2, 2, 4)
    assert not check_quasi_nilpotent(CrystalData.from_strings(env, 1, {"x": [["1"]]})).ok
    assert check_quasi_nilpotent(CrystalData.from_strings(env, 1, {"x": [["2"]]})).ok
    assert check_quasi_nilpotent(CrystalData.from_strings(env, 2, {"x": [["0", "1"], ["0", "0"]]})).ok


def test_connection_needs_known_variables():
    with pytest.raises(ValueError):
        CrystalData.from_strings(flat_line(), 1, {"z": [["1"]]})


@given(st.integers(0, 2**32))
def test_random_crystals_are_quasi_nilpotent(seed):
    env = flat_line(2, 2, 5)
    assert check_quasi_nilpotent(random_crystal(env, random.Random(seed))).ok


@given(st.integers(0, 2**32))
def test_transport_identity_and_cocycle(seed):
    rng = random.Random(seed)
    env = flat_line(2, 2, 5)
    c = random_crystal(env, rng)
    lvl = level(env, 2)
    f1, f2, f3 = (random_lifting(env, lvl, rng) for _ in range(3))
    B = lvl.env
    t12, t23, t13 = taylor_transport(c, f1, f2), taylor_transport(c, f2, f3), taylor_transport(c, f1, f3)
    assert matrices_equal(B, matmul(B, t23, t12), t13)
    eye = [[B.ambient.one() if i == j else B.ambient.zero() for j in range(c.rank)] for i in range(c.rank)]
    assert matrices_equal(B, taylor_transport(c, f1, f1), eye)


def test_transport_of_a_function_is_its_pullback():
    # for the constant crystal, the transport of a*m from phi_2 to phi_1 is phi_1(a)*m
    env = flat_line(3, 2, 4)
    lvl = level(env, 1)
    c = CrystalData.constant(env)
    ident = Lifting.identity(env, lvl.env)
    shift = Lifting(env, lvl.env, (lvl.xi(0, 1),))
    x = env.ambient.var("x")
    B = lvl.env
    a = x**2 + x.scale(5)
    there = transport_element(c, shift, ident, c.unit(0, a))
    back = transport_element(c, ident, shift, c.unit(0, a))
    assert B.normal_form(there[0]) == B.normal_form(shift(a))
    assert B.normal_form(back[0]) == B.normal_form(ident(a))


def test_lifting_shift_must_be_divided_power():
    env = flat_line(2, 2, 4)
    lvl = level(env, 1)
    with pytest.raises(TransportError):
        Lifting(env, lvl.env, (lvl.env.ambient.var("x"),))


def test_horizontal_sections_of_flat_line():
    # Z/4[x] truncated at 4: ker d = Z/4 + 2x^2 Z/4 + x^4 Z/4 (weights 0, 2, 4)
    tab = horizontal_sections(CrystalData.constant(flat_line(2, 2, 4)))
    assert tab.exponents(0) == [1, 2, 2]
    assert tab.by_weight(0) == {0: [2], 2: [1], 4: [2]}


def test_horizontal_sections_contain_the_constants():
    for p in (2, 3, 5):
        tab = horizontal_sections(CrystalData.constant(plane(p, 2, 3)))
        assert tab.by_weight(0)[0] == [2]


def test_de_rham_complex_is_a_complex_with_connection():
    env = plane(2, 2, 4)
    c = CrystalData.from_strings(env, 2, {"x": [["2*y", "1"], ["0", "0"]], "y": [["0", "0"], ["0", "2*x"]]})
    if check_integrability(c).ok:
        dr = de_rham_complex(c)
        dr.complex.validate()


def test_de_rham_cohomology_of_the_line_mod_p():
    dr = de_rham_complex(CrystalData.constant(flat_line(2, 1, 8)))
    tab = cohomology(dr.complex)
    # Cartier pattern: H^0 spanned by x^(2k), H^1 by x^(2k-1) dx
    assert sorted(tab.by_weight(0)) == [0, 2, 4, 6, 8]
    assert sorted(tab.by_weight(1)) == [2, 4, 6, 8]


def test_no_torsion_on_a_flat_lift():
    assert torsion_horizontal(CrystalData.constant(flat_line(2, 2, 6))) == []


def test_torsion_needs_precision_two():
    with pytest.raises(ValueError):
        torsion_horizontal(CrystalData.constant(flat_line(2, 1, 4)))


def test_connection_x_is_not_quasi_nilpotent_at_two():
    # theta = d/dx + x: theta^(2k)(1) has constant term (2k-1)!!, always odd
    def iterate(P):
        dP = [(i + 1) * P[i + 1] for i in range(len(P) - 1)] or [0]
        xP = [0] + P
        return [(dP[i] if i < len(dP) else 0) + xP[i] for i in range(len(xP))]
    consts, P = [], [1]
    for _ in range(12):
        P = iterate(P)
        consts.append(P[0])
    assert all(c % 2 == 1 for c in consts[1::2])
    for p, expect in ((2, False), (3, True)):
        env = flat_line(p, 2, 8)
        assert check_quasi_nilpotent(CrystalData.from_strings(env, 1, {"x": [["x"]]})).ok is expect
