import random
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import as_pi, numeric_arrow_count, numeric_levels, numeric_singular, numeric_stokes
from wildstokes.fixtures import random_class, weber_class
from wildstokes.irregular import (
    GREATER,
    LESS,
    OSCILLATORY,
    CoverPoint,
    ExponentialFactor,
    Fiber,
    IrregularClass,
    NotRepresentableError,
    class_algebra,
    cover_monodromy,
    dominance_compare,
    fiber,
    fission_tree,
    levels,
    natural_quotient,
    singular_directions,
    stokes_arrows_at,
    stokes_directions,
)

E = ExponentialFactor.of


def cls(*items):
    return IrregularClass.of(*items)


# frozen from the exact code and confirmed by the float scan in oracles.py
EXAMPLES = {
    "airy": (cls((E((F(3, 2), F(2, 3), 0)), 1)),
             ["1/3", "1", "5/3"], ["0", "2/3", "4/3"], ["3/2"], 3, [2, 1]),
    "two_level": (cls((E((2, 1, 0), (1, 1, F(1, 2))), 1), (E((2, 1, 0)), 1), (E((1, 1, 1)), 1)),
                  ["0", "1/4", "3/4", "1", "5/4", "7/4"], ["0", "1/2", "1", "3/2"], ["1", "2"], 10, [3, 2, 1]),
    "pole_mix": (cls((E((1, 1, 0)), 1), (E((2, 1, 0)), 1)),
                 ["1/4", "3/4", "5/4", "7/4"], ["0", "1/2", "1", "3/2"], ["2"], 4, [2, 1]),
    "z52": (cls((E((F(5, 2), 1, 0)), 1)),
            ["1/5", "3/5", "1", "7/5", "9/5"], ["0", "2/5", "4/5", "6/5", "8/5"], ["5/2"], 5, [2, 1]),
    "tame_plus": (cls((ExponentialFactor(), 2), (E((F(1, 3), 1, F(1, 2))), 1)),
                  ["0", "1/2", "1", "3/2"], ["0", "1/2", "1", "3/2"], ["1/3"], 4, [4, 1]),
}


def _strs(xs):
    return [str(F(x)) for x in xs]


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_frozen_examples(name):
    theta, s, a, lv, arrows, degrees = EXAMPLES[name]
    fib = Fiber.of_class(theta)
    assert _strs(fib.stokes_directions()) == s
    assert _strs(fib.singular_directions()) == a
    assert _strs(fib.levels()) == lv
    assert sum(len(fib.arrows_at(t)) for t in fib.singular_directions()) == arrows
    assert fission_tree(theta).degrees == degrees


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_frozen_examples_against_float_scan(name):
    theta, s, a, lv, arrows, _ = EXAMPLES[name]
    assert [round(x, 6) for x in as_pi(numeric_stokes(theta))] == [round(float(F(x)), 6) for x in s]
    assert [round(x, 6) for x in as_pi(numeric_singular(theta))] == [round(float(F(x)), 6) for x in a]
    assert numeric_levels(theta) == pytest.approx([float(F(x)) for x in lv])
    assert numeric_arrow_count(theta) == arrows


def test_weber_directions():
    theta = weber_class()
    assert [d.t for d in stokes_directions(theta)] == [F(1, 4), F(3, 4), F(5, 4), F(7, 4)]
    assert [d.t for d in singular_directions(theta)] == [0, F(1, 2), 1, F(3, 2)]
    assert levels(theta) == [2]
    arrows = [stokes_arrows_at(theta, d) for d in singular_directions(theta)]
    assert [len(a) for a in arrows] == [1, 1, 1, 1]


def test_weber_dominance_flips():
    theta = weber_class()
    i, j = fiber(theta)
    first = dominance_compare(theta, i, j, F(1, 8))
    assert first in (LESS, GREATER)
    assert dominance_compare(theta, i, j, F(1, 4)) == OSCILLATORY
    assert dominance_compare(theta, i, j, F(3, 8)) != first


def test_arrows_alternate_for_weber():
    theta = weber_class()
    fib = Fiber.of_class(theta)
    ends = [fib.arrows_at(t)[0][:2] for t in fib.singular_directions()]
    assert ends[0] == ends[2] and ends[1] == ends[3] and ends[0] == ends[1][::-1]


def test_tame_class_has_no_directions():
    theta = cls((ExponentialFactor(), 3))
    assert stokes_directions(theta) == []
    assert singular_directions(theta) == []
    assert levels(theta) == []
    assert fission_tree(theta).degrees == [1]


def test_ramified_cover_monodromy_cycles():
    theta = EXAMPLES["z52"][0]
    mono = cover_monodromy(theta)
    a, b = CoverPoint(0, 0), CoverPoint(0, 1)
    assert mono[a] == b and mono[b] == a
    three = cls((E((F(1, 3), 1, 0)), 1))
    m3 = cover_monodromy(three)
    p = CoverPoint(0, 0)
    assert m3[m3[m3[p]]] == p and m3[p] != p


def test_level_of_mixed_pole_orders_is_the_larger_slope():
    # <z^-1> + <z^-2>: the only difference has slope 2
    assert levels(EXAMPLES["pole_mix"][0]) == [2]


def test_natural_quotient_two_level():
    theta = EXAMPLES["two_level"][0]
    q = natural_quotient(theta, 1)
    assert len(fiber(q.target)) == 2
    img = {p: q.projection[p] for p in fiber(theta)}
    # the two factors agreeing at order 2 are identified
    assert len(set(img.values())) == 2
    with pytest.raises(ValueError):
        natural_quotient(theta, 0)


def test_class_algebra():
    w = weber_class()
    assert class_algebra("dual", w) == w
    end = class_algebra("end", w)
    assert end.rank == 4
    assert levels(end) == [2]
    t = class_algebra("tensor", w, cls((ExponentialFactor(), 1)))
    assert t == w


def test_tensor_outside_rational_polar_forms():
    a = cls((E((1, 1, F(1, 12))), 1))
    b = cls((E((1, 1, F(5, 12))), 1))
    with pytest.raises(NotRepresentableError):
        class_algebra("tensor", a, b)


def test_json_round_trip():
    theta = EXAMPLES["two_level"][0]
    assert IrregularClass.from_json(theta.to_json()) == theta
    with pytest.raises(ValueError):
        IrregularClass.from_json({"not": "a list"})


def test_bad_factors():
    with pytest.raises(ValueError):
        E((0, 1, 0))
    with pytest.raises(ValueError):
        cls((E((1, 1, 0)), 0))


@given(st.integers(min_value=0, max_value=10**6))
def test_exact_directions_match_float_scan(seed):
    theta = random_class(random.Random(seed), rank_max=4)
    fib = Fiber.of_class(theta)
    assert [float(x) for x in fib.stokes_directions()] == pytest.approx(as_pi(numeric_stokes(theta)), abs=1e-6)
    assert [float(x) for x in fib.singular_directions()] == pytest.approx(as_pi(numeric_singular(theta)), abs=1e-6)
    assert sum(len(fib.arrows_at(t)) for t in fib.singular_directions()) == numeric_arrow_count(theta)


@given(st.integers(min_value=0, max_value=10**6))
def test_orders_are_total_off_stokes(seed):
    theta = random_class(random.Random(seed), rank_max=5)
    fib = Fiber.of_class(theta)
    s = fib.stokes_directions() + [F(2)]
    for a, b in zip(s, s[1:]):
        mid = (a + b) / 2
        order = fib.order_at(mid)
        assert sorted(order) == sorted(fib.labels)


@given(st.integers(min_value=0, max_value=10**6))
def test_arrows_are_transitive_and_point_to_dominant(seed):
    theta = random_class(random.Random(seed), rank_max=5)
    fib = Fiber.of_class(theta)
    for t in fib.singular_directions():
        rel = {(i, j) for i, j, _ in fib.arrows_at(t)}
        for i, j in rel:
            for k, l in rel:
                if j == k:
                    assert (i, l) in rel
        for i, j in rel:
            # just off the singular direction, i is still below j
            eps = F(1, 10**6)
            assert fib.compare(i, j, t + eps) == -1 and fib.compare(i, j, t - eps) == -1


@given(st.integers(min_value=0, max_value=10**6))
def test_fission_degrees_decrease(seed):
    theta = random_class(random.Random(seed), rank_max=6)
    d = fission_tree(theta).degrees
    assert d[0] == len(fiber(theta))
    assert all(a > b for a, b in zip(d, d[1:]))
    assert d[-1] >= 1
