"""Shared generators for the test modules."""
import random

from crystalcoh.cechalex import build_level
from crystalcoh.crystal import CrystalData, Lifting
from crystalcoh.envelope import SchemePresentation, build_envelope


def flat_line(p=2, e=2, d=6):
    return build_envelope(SchemePresentation.from_strings(p, 1, ["x"], []), e, d)


def random_crystal(env, rng: random.Random, rank=None):
    """Random connection on the line: p*(anything) plus a strictly upper part.

    Both pieces are nilpotent modulo p, so the result is quasi-nilpotent.
    """
    r = rank or rng.randint(1, 2)
    amb = env.ambient
    p, q = env.p, env.q
    rows = []
    for a in range(r):
        row = []
        for b in range(r):
            terms = {}
            for k in range(rng.randint(0, 2)):
                deg = rng.randint(0, 2)
                scale = 1 if a < b else p
                terms[deg] = (terms.get(deg, 0) + scale * rng.randrange(q)) % q
            el = amb.zero()
            for deg, c in terms.items():
                el = el + amb.var("x") ** deg * c if deg else el + amb.const(c)
            row.append(el)
        rows.append(row)
    return CrystalData(env, r, [rows])


def random_lifting(env, level, rng: random.Random):
    """x -> x + h with h a random element of the PD ideal of the level."""
    amb = level.env.ambient
    h = amb.zero()
    for e in range(1, level.n + 1):
        h = h + level.xi(0, e).scale(rng.randrange(env.q))
    if rng.random() < 0.5:
        h = h + level.xi(0, rng.randint(1, level.n)) * level.xi(0, rng.randint(1, level.n)).scale(rng.randrange(env.q))
    h = h + amb.var("x").scale(env.p * rng.randrange(env.q))
    return Lifting(env, level.env, (level.env.normal_form(h),))


def level(env, n):
    return build_level(env, n)
