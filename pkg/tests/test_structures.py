import json
import random
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wildstokes import matrix as mx
from wildstokes.exact import GaussianRational as G
from wildstokes.fixtures import (
    random_class,
    random_graded,
    random_stokes_element,
    standard_grading,
    weber_class,
    weber_filtered,
)
from wildstokes.flagged import Subspace, span, splitting_iso, stokes_group_membership
from wildstokes.irregular import ExponentialFactor, Fiber, IrregularClass, NotRepresentableError
from wildstokes.structures import (
    BoundaryPresentation,
    InvalidStructure,
    StokesFilteredLS,
    StokesGradedLS,
    StokesLocalSystem,
    associated_graded_ls,
    canonical_splitting,
    choose_basepoint,
    dual_and_tensor,
    graded_to_stokes_ls,
    grading_to_filtration,
    identity_section,
    intermediate_filtration,
    level_factorization,
    moderate_sections,
    one_level_splitting,
    section_to_graded,
    stokes_ls_to_graded,
    tame_graded_sections,
    validate,
    validate_stokes_ls,
)

seeds = st.integers(min_value=0, max_value=10**6)
LINES = [[1, 0], [0, 1], [1, 1], [1, 2]]


def lines_of(raw):
    return [mx.mat([v])[0] for v in raw]


# --------------------------------------------------------------------- Weber

def test_weber_basepoint_and_frame():
    b = BoundaryPresentation(weber_class())
    fr = b.frame()
    assert b.basepoint == F(1, 8)
    assert fr.stokes == [F(1, 4), F(3, 4), F(5, 4), F(7, 4)]
    assert fr.singular == [F(1, 2), F(1), F(3, 2), F(2)]
    assert len(fr.f_samples()) == 4 and len(fr.g_samples()) == 4


def test_weber_canonical_splitting_uses_adjacent_lines():
    lines = lines_of(LINES)
    s = weber_filtered(lines)
    assert validate(s).ok
    g = canonical_splitting(s)
    assert validate(g).ok
    spans = [span([v]) for v in lines]
    fr = s.boundary.frame()
    # grading component c meets filtration components c and c + 1
    for c, grading in enumerate(g.gradings):
        pieces = {grading[i] for i in grading.labels}
        assert pieces == {spans[c], spans[(c + 1) % 4]}
    # and the subdominant piece on each side is the subdominant line there
    for c, t in enumerate(fr.f_samples()):
        order = fr.fib.order_at(t)
        assert g.grading_at(t)[order[0]] == spans[c]


def test_weber_broken_sf2_has_certificate():
    raw = [[1, 0], [1, 0], [1, 1], [1, 2]]
    s = weber_filtered(lines_of(raw))
    rep = validate(s)
    assert not rep.ok
    bad = rep.failures()
    assert [c.direction for c in bad] == [F(1, 4)]
    assert bad[0].certificate is not None
    with pytest.raises(InvalidStructure):
        canonical_splitting(s)


def test_weber_stokes_local_system():
    s = canonical_splitting(weber_filtered(lines_of(LINES)))
    ls = graded_to_stokes_ls(s)
    assert len(ls.stokes) == 4
    assert validate_stokes_ls(ls).ok
    # h S4 S3 S2 S1 = 1 in genus zero
    word = mx.mul_many(ls.formal_monodromy, *reversed(ls.stokes))
    assert mx.is_identity(word)
    assert stokes_ls_to_graded(ls) == s


def test_weber_formal_monodromy_value():
    # frozen: derived from oracles.cross_ratio_mu, which gives mu = 1/2 for these lines
    s = weber_filtered(lines_of(LINES))
    ag = associated_graded_ls(s)
    assert sorted(str(x) for x in (ag.monodromy[0][0], ag.monodromy[1][1])) == ["1/2", "2"]
    assert ag.monodromy[0][1] == 0 and ag.monodromy[1][0] == 0


def test_one_level_splitting_matches_canonical():
    s = weber_filtered(lines_of(LINES))
    g = canonical_splitting(s)
    for t in (F(1, 8), F(5, 8), F(9, 8), F(13, 8)):
        assert one_level_splitting(s, t) == g.grading_at(t)
    with pytest.raises(ValueError):
        one_level_splitting(s, F(1, 2))


def test_intermediate_filtration_weber():
    s = weber_filtered(lines_of(LINES))
    inter = intermediate_filtration(s, F(1, 4))
    assert inter.relation == frozenset()
    with pytest.raises(ValueError):
        intermediate_filtration(s, F(1, 8))


# ---------------------------------------------------------------- tame case

def tame_graded(n=2):
    theta = IrregularClass.of((ExponentialFactor(), n))
    b = BoundaryPresentation(theta)
    fib = Fiber.of_class(theta)
    return StokesGradedLS(b, [standard_grading(fib)])


def test_tame_splitting_is_trivial():
    g = tame_graded(3)
    f = grading_to_filtration(g)
    assert validate(f).ok
    out = canonical_splitting(f)
    assert out == g
    assert out.gradings[0].pieces[out.gradings[0].labels[0]] == Subspace.full(3)


def test_tame_sections_are_fixed_vectors():
    a = mx.mat([[1, 0], [0, 2]])
    theta = IrregularClass.of((ExponentialFactor(), 2))
    b = BoundaryPresentation(theta, handles=[(a, mx.identity(2))])
    g = StokesGradedLS(b, [standard_grading(Fiber.of_class(theta))])
    assert moderate_sections(g) == span(mx.mat([[1, 0]]))
    assert moderate_sections(grading_to_filtration(g)) == span(mx.mat([[1, 0]]))


# ------------------------------------------------------------- validation

def test_wrong_number_of_pieces_is_structural():
    s = weber_filtered(lines_of(LINES))
    bad = StokesFilteredLS(s.boundary, s.filtrations[:3])
    rep = validate(bad)
    assert rep.structural and not rep.ok


def test_relation_failure_is_structural():
    g = random_graded(random.Random(3))
    b = g.boundary.with_(monodromy=mx.scale(g.boundary.monodromy, 2))
    rep = validate(StokesGradedLS(b, g.gradings))
    assert any("relation" in msg for msg in rep.structural)


def test_graded_rejects_extra_jumps():
    g = random_graded(random.Random(4))
    b = g.boundary.with_(extra_jumps=[g.boundary.basepoint + F(1, 1000)])
    assert not validate(StokesGradedLS(b, g.gradings)).ok


def test_perturbed_stokes_automorphism_fails():
    s = canonical_splitting(weber_filtered(lines_of(LINES)))
    ls = graded_to_stokes_ls(s)
    bad = list(ls.stokes)
    bad[0] = mx.mul(bad[0], mx.mat([[1, 0], [0, 2]]))
    rep = validate_stokes_ls(StokesLocalSystem(ls.boundary, ls.grading0, ls.formal_monodromy, bad))
    assert not rep.ok


# --------------------------------------------------------------- round trips

@given(seeds)
def test_round_trip_genus_one(seed):
    g = random_graded(random.Random(seed), rank_max=4)
    f = grading_to_filtration(g)
    assert validate(f).ok
    assert canonical_splitting(f) == g


@given(seeds)
def test_round_trip_genus_zero_weber(seed):
    g = random_graded(random.Random(seed), theta=weber_class(), genus=0)
    assert g.boundary.genus == 0 and mx.is_identity(g.boundary.monodromy)
    assert canonical_splitting(grading_to_filtration(g)) == g


@given(seeds)
def test_round_trip_genus_zero_trivial_stokes(seed):
    g = random_graded(random.Random(seed), genus=0, trivial_stokes=True, ram_max=1, rank_max=4)
    assert canonical_splitting(grading_to_filtration(g)) == g


@given(seeds)
def test_split_then_phi_is_stable(seed):
    g = random_graded(random.Random(seed), rank_max=4)
    f = grading_to_filtration(g)
    f2 = grading_to_filtration(canonical_splitting(f))
    assert f2 == f
    assert canonical_splitting(f2) == canonical_splitting(f)


@given(seeds)
def test_stokes_local_system_round_trip(seed):
    g = random_graded(random.Random(seed), rank_max=4)
    ls = graded_to_stokes_ls(g)
    assert validate_stokes_ls(ls).ok
    assert stokes_ls_to_graded(ls) == g
    for m in ls.stokes:
        assert mx.det(m) == 1


@given(seeds)
def test_formal_monodromy_two_ways(seed):
    # Gr(V, F) monodromy equals h conjugated by the splitting isomorphism at b
    g = random_graded(random.Random(seed), rank_max=4)
    f = grading_to_filtration(g)
    ls = graded_to_stokes_ls(g)
    ag = associated_graded_ls(f)
    phi, _ = splitting_iso(ls.grading0, f.filtrations[0])
    assert ag.monodromy == mx.mul_many(mx.inverse(phi), ls.formal_monodromy, phi)


@given(seeds)
def test_change_of_coordinates_commutes_with_splitting(seed):
    rnd = random.Random(seed)
    g = random_graded(rnd, rank_max=3)
    from wildstokes.fixtures import random_invertible
    p = random_invertible(rnd, g.n)
    f = grading_to_filtration(g)
    moved = StokesFilteredLS(f.boundary.transform(p), [x.image(p) for x in f.filtrations])
    assert canonical_splitting(moved) == g.transform(p)


@given(seeds)
def test_extra_jumps_do_not_change_the_splitting(seed):
    g = random_graded(random.Random(seed), rank_max=4)
    f = grading_to_filtration(g)
    fr = f.boundary.frame()
    pts = sorted(set(fr.stokes) | set(fr.singular) | {fr.beta + 2})
    extra = (pts[0] + pts[1]) / 2 if len(pts) > 1 else fr.beta + 1
    nb = f.boundary.with_(extra_jumps=[extra])
    f2 = StokesFilteredLS(nb, [f.filtration_at(t) for t in nb.frame().f_samples()])
    assert validate(f2).ok
    assert canonical_splitting(f2) == g


@given(seeds)
def test_json_round_trips(seed):
    g = random_graded(random.Random(seed), rank_max=3)
    f = grading_to_filtration(g)
    ls = graded_to_stokes_ls(g)
    for obj, cls in ((g, StokesGradedLS), (f, StokesFilteredLS)):
        text = json.dumps(obj.to_json())
        assert cls.from_json(json.loads(text)) == obj
    back = StokesLocalSystem.from_json(json.loads(json.dumps(ls.to_json())))
    assert back.stokes == ls.stokes and back.formal_monodromy == ls.formal_monodromy


# ------------------------------------------------------------------ sections

@given(seeds)
def test_sections_agree_across_encodings(seed):
    g = random_graded(random.Random(seed), genus=0, trivial_stokes=True, ram_max=1, rank_max=4)
    f = grading_to_filtration(g)
    ls = graded_to_stokes_ls(g)
    a, b, c = moderate_sections(f), moderate_sections(g), moderate_sections(ls)
    assert a == b == c
    assert a.dim <= len(tame_graded_sections(f))


def test_section_forced_below_tame_circle_vanishes():
    # the only invariant vector lives on the <z^-1> piece
    q = ExponentialFactor.of((1, 1, 0))
    theta = IrregularClass.of((ExponentialFactor(), 1), (q, 1))
    fib = Fiber.of_class(theta)
    std = standard_grading(fib)
    tame = [i for i in fib.labels if fib.factors[i].is_tame()][0]
    a = mx.identity(2)
    for i in fib.labels:
        if i == tame:
            r = next(iter(std.block_slices()[i]))
            a[r][r] = G(2)
    b = BoundaryPresentation(theta, handles=[(a, mx.identity(2))])
    g = StokesGradedLS(b, [std] * len(b.frame().g_samples()))
    assert validate(g).ok
    f = grading_to_filtration(g)
    assert moderate_sections(f).dim == 0
    assert moderate_sections(g).dim == 0


def test_section_to_graded_is_injective_on_tame_fixtures():
    theta = IrregularClass.of((ExponentialFactor(), 2), (ExponentialFactor.of((1, 1, 0)), 1))
    g = random_graded(random.Random(11), theta=theta, genus=0, trivial_stokes=True)
    f = grading_to_filtration(g)
    sec = moderate_sections(f)
    assert sec.dim == 2
    images = [section_to_graded(f, v) for v in sec.basis]
    assert mx.rank(images) == 2


# ------------------------------------------------------------- dual, tensor

@given(seeds)
def test_dual_commutes_with_phi(seed):
    g = random_graded(random.Random(seed), rank_max=3)
    d = dual_and_tensor("dual", g)
    assert validate(d).ok
    assert grading_to_filtration(d) == dual_and_tensor("dual", grading_to_filtration(g))


@given(seeds)
def test_identity_is_a_moderate_section_of_end(seed):
    g = random_graded(random.Random(seed), rank_max=3)
    try:
        h = dual_and_tensor("hom", g, g)
    except NotRepresentableError:
        return
    f = dual_and_tensor("hom", grading_to_filtration(g), grading_to_filtration(g))
    assert validate(h).ok and validate(f).ok
    assert grading_to_filtration(h) == f
    assert moderate_sections(f).contains(identity_section(g.n))


def test_unknown_tensor_operation():
    g = random_graded(random.Random(1), rank_max=2)
    with pytest.raises(ValueError):
        dual_and_tensor("wedge", g)


# ---------------------------------------------------- level decomposition

@given(seeds)
def test_level_factorization(seed):
    rnd = random.Random(seed)
    theta = random_class(rnd, min_levels=2, levels_max=2, rank_max=5)
    fib = Fiber.of_class(theta)
    fr = BoundaryPresentation(theta).frame()
    d = rnd.choice(fr.singular)
    order = fr.arrows(d)
    std = standard_grading(fib)
    u = random_stokes_element(rnd, fib, order)
    k = fib.levels()[0]
    a, b = level_factorization(u, std, fib, k)
    assert mx.mul(a, b) == u
    assert stokes_group_membership(a, std, order) and stokes_group_membership(b, std, order)
    # a is the level <= k part, b has no such part
    assert mx.is_identity(level_factorization(b, std, fib, k)[0])
    assert mx.is_identity(level_factorization(a, std, fib, k)[1])


def test_basepoint_avoids_jumps():
    for seed in range(20):
        theta = random_class(random.Random(seed))
        fib = Fiber.of_class(theta)
        beta = choose_basepoint(fib)
        assert beta not in fib.stokes_directions() and beta not in fib.singular_directions()
