"""Towers, double and triple spaces, face tables, reductions."""

import pytest

from qhcalc import a_spaces as asp
from qhcalc import corner_spaces as cs
from qhcalc.a_spaces import (CoordChangeSpec, FormalASeries, Tower,
                             a_function_member, check_coord_change,
                             double_face_names, double_projections,
                             double_space, exponent_vector,
                             normal_bundle_rank, reduce, triple_space,
                             verify_facemaps)

T = Tower(2, (1, 1, 1), 1, (1, 1))


def test_tower_validation():
    with pytest.raises(ValueError):
        Tower(2, (1, 1), 1, (1, 1))
    with pytest.raises(ValueError):
        Tower(1, (1, 0), 1, (1,))
    with pytest.raises(ValueError):
        Tower(1, (1, 1), -1, (1,))
    assert T.dim == 4
    rt = Tower.from_json(T.to_json())
    assert rt == T


def test_exponent_vectors_all_levels():
    cases = {0: ((0, 1, 1), (1, 0, 1)),
             1: ((0, 1, 1, 1), (1, 0, 1, 1)),
             2: ((0, 1, 1, 1, 1), (1, 0, 1, 1, 1))}
    for k, (el, er) in cases.items():
        t = reduce(T, k)
        pl, pr = double_projections(t)
        faces = double_face_names(k)
        assert exponent_vector(pl, faces) == el
        assert exponent_vector(pr, faces) == er
        assert cs.is_b_fibration(pl) and cs.is_b_fibration(pr)
        # exactly one zero, at rf resp. lf
        assert exponent_vector(pl, faces).count(0) == 1
        assert exponent_vector(pr, faces).count(0) == 1


def test_double_space_face_counts_and_diagonal():
    for k, t in ((0, reduce(T, 0)), (1, reduce(T, 1)), (2, T)):
        d = double_space(t)
        assert len(d.space.faces) == k + 3
        assert d.space.psub_meets("diag") == frozenset({d.faces[-1]})


def test_double_space_general_orders():
    t = Tower(2, (1, 2, 3), 2, (1, 2))
    d = double_space(t)
    # interior orders at the front faces follow the cumulative pattern
    sp = d.space
    pair = frozenset({1, 2})
    assert sp.val("ff_z", ("d", -1, pair)) == 1 + 2 + 3
    assert sp.val("ff_z", ("d", 0, pair)) == 2 + 3
    assert sp.val("ff_z", ("d", 1, pair)) == 3
    assert sp.val("ff_zy", ("d", 0, pair)) == 2


def test_triple_space_shape():
    trip = triple_space(T)
    assert len(trip.space.faces) == 24
    assert all(cs.is_b_fibration(p) for p in trip.projections)
    for p in trip.projections:
        # face partition: every bhs in exactly one class, rows have <= 1 one
        seen = []
        for g in p.domain_faces:
            img = p.face_map(g)
            assert len(img) <= 1
            seen.append(g)
        assert sorted(seen) == sorted(trip.space.face_names)


def test_triple_space_requires_depth_2():
    with pytest.raises(ValueError):
        triple_space(reduce(T, 1), "z")


def test_facemap_tables_match_reference():
    rep = verify_facemaps(T)
    assert rep["tables"] == 9
    assert rep["mismatches"] == []


def test_facemap_tables_independent_of_orders():
    rep = verify_facemaps(Tower(2, (1, 3, 2), 0, (2, 1)))
    assert rep["mismatches"] == []


def test_commuted_construction_isomorphic():
    bij = asp.triple_constructions_isomorphic(T)
    assert bij is not None
    assert all(k == v for k, v in bij.items())


def test_projection_tables_partition():
    for i in (1, 2, 3):
        tbl = asp.reference_table("z", i)
        all_faces = [g for fs in tbl.values() for g in fs]
        assert len(all_faces) == 24 and len(set(all_faces)) == 24


def test_reduce():
    assert reduce(T, 2) == T
    r1 = reduce(T, 1)
    assert (r1.k, r1.orders, r1.b, r1.f) == (1, (1, 1), 1, (2,))
    r0 = reduce(T, 0)
    assert (r0.k, r0.orders, r0.b, r0.f) == (0, (1,), 3, ())
    # functorial
    assert reduce(reduce(T, 2), 1) == reduce(T, 1)
    assert reduce(reduce(T, 1), 0) == reduce(T, 0)


def test_normal_bundle_rank():
    assert normal_bundle_rank(T, 2) == 3
    assert normal_bundle_rank(T, 0) == 1
    t0 = Tower(2, (1, 1, 1), 0, (0, 0))
    assert normal_bundle_rank(t0, 2) == 1


def test_check_coord_change():
    t0 = Tower(0, (2,), 1, ())
    # x' = c x + O(x^2): no cross terms, remainder power 2
    assert check_coord_change(t0, CoordChangeSpec(((-1, (), 2),)))
    assert not check_coord_change(t0, CoordChangeSpec(((-1, (), 1),)))

    t1 = Tower(1, (1, 1), 1, (1,))
    # x' in x C_phi + x^2 C^infty
    spec = CoordChangeSpec(((-1, ((0, 1),), 2),))
    assert check_coord_change(t1, spec)

    # depth 2: level-0 target depending on level 1 at power 0 is rejected
    spec_bad = CoordChangeSpec(((0, ((1, 0),), 2),))
    assert not check_coord_change(T, spec_bad)
    spec_ok = CoordChangeSpec(((0, ((1, 1),), 2),))
    assert check_coord_change(T, spec_ok)


def test_a_function_member():
    assert a_function_member(T, FormalASeries(((1, 0),)))
    assert not a_function_member(T, FormalASeries(((0, 2),)))
    assert a_function_member(T, FormalASeries(()))
    assert a_function_member(T, FormalASeries(((0, -1),)))
    assert a_function_member(T, FormalASeries(((3, 2),)))
    t = Tower(2, (1, 2, 3), 1, (1, 1))
    assert not a_function_member(t, FormalASeries(((5, 2),)))
    assert a_function_member(t, FormalASeries(((6, 2),)))


def test_projection_equals_blowdown_composition():
    # the stored projection agrees with explicitly composing the three
    # blowdown maps with the factor projection
    t = T
    seq = asp._double_seq(t)
    space, maps = cs.replay(seq)
    total = maps[-1]
    for beta in reversed(maps[:-1]):
        total = cs.compose(total, beta)
    factor = asp.single_factor_space(t)
    base_proj = cs.bmap_from_entries(
        seq.base, factor, [("lf", "bf", 1)])
    full = cs.compose(total, base_proj)
    d = asp.double_space(t)
    for g in space.face_names:
        assert full.exponent(g, "bf") == d.proj_l.exponent(g, "bf")


def test_deep_axis_centers_pairwise_disjoint_at_blowup_time():
    # the three deepest side centers are pairwise disjoint once the
    # earlier stages are blown up, certified by the engine
    seq = asp.symmetric_triple_seq(T)
    idx = seq.index_of("E_{1,z}")
    space, _ = cs.replay(seq, idx)
    centers = [seq.entries[seq.index_of(f"E_{{{i},z}}")].locus()
               for i in (1, 2, 3)]
    for i in range(3):
        for j in range(i + 1, 3):
            assert space.disjoint(centers[i], centers[j])


def test_projection2_table_is_transposed_projection1():
    trip = triple_space(T)
    t1 = asp.face_table(trip.projections[0])
    t2 = asp.face_table(trip.projections[1])
    swapped = asp.relabel_table(t1, 2)
    swapped["interior"] = tuple(sorted(
        asp._relabel_name(g, asp._SIGMA[2]) for g in t1["interior"]))
    assert {k: tuple(v) for k, v in t2.items()} == \
        {k: tuple(v) for k, v in swapped.items()}


def test_double_space_depth_three():
    t = Tower(3, (1, 1, 2, 1), 1, (1, 1, 1))
    d = double_space(t)
    assert len(d.space.faces) == 6
    pl, pr = d.proj_l, d.proj_r
    assert exponent_vector(pl, d.faces) == (0, 1, 1, 1, 1, 1)
    assert exponent_vector(pr, d.faces) == (1, 0, 1, 1, 1, 1)
    assert d.space.psub_meets("diag") == frozenset({d.faces[-1]})
    pair = frozenset({1, 2})
    assert d.space.val(d.faces[-1], ("d", -1, pair)) == 1 + 1 + 2 + 1


def test_degenerate_dimensions_full_pipeline():
    # all fibre and base dimensions zero: constructions and tables hold
    t0 = Tower(2, (1, 1, 1), 0, (0, 0))
    rep = verify_facemaps(t0)
    assert rep["tables"] == 9 and rep["mismatches"] == []
    d = double_space(t0)
    assert d.space.psub_meets("diag") == frozenset({"ff_z"})
