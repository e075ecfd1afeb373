"""Combinatorial model of corner spaces under quasihomogeneous blowup.

A space is described by its boundary hypersurfaces, their incidence, and
for each face the exact vanishing orders of a fixed family of reference
functions: the boundary coordinate of each product factor and the
pairwise difference of each coordinate level between factors.  Centers
of blowup are loci of the form (set of faces) intersected with the
strict transform of a partial product diagonal.  This is exactly the
family of centers arising in fibred double and triple space
constructions; anything outside it is rejected.

The engine never works with charts.  Every produced quantity (exponent
matrices, face images, density weights) is a function of the tracked
combinatorial data.  The update rules are each justified by the weighted
projective coordinates of a single blowup step:

* the valuation of a reference function on a new front face is the sum
  of its valuations over the faces containing the center, plus the
  blowup order if the residual of the function still cuts the center;
* a residual still cuts exactly when the center merges the pair of
  factors strictly deeper than the containing faces already did;
* incidence updates are star subdivision for corner centers, while
  diagonal centers keep all old strata and add front-face strata over
  every reachable corner, reachability being an exact rational
  feasibility problem on vanishing rates;
* two loci are certified disjoint when their face sets cannot meet, or
  when some blown-up center provably contains their intersection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

INF = float("inf")


class EngineUnsupported(Exception):
    """Configuration outside the supported family of centers."""


class BlowupError(ValueError):
    """Invalid blowup request (unknown center, order deficit, bad locus)."""


class RewriteError(ValueError):
    """Requested commutation is not certified at this position."""


def _symkey(s):
    if s[0] == "x":
        return (0, s[1], ())
    return (1, s[1], tuple(sorted(s[2])))


# ---------------------------------------------------------------------------
# merge specifications: one partition of the factor set per coordinate level

def _join_partition(blocks_a, blocks_b):
    groups = [set(b) for b in blocks_a] + [set(b) for b in blocks_b]
    merged = []
    for g in groups:
        hit = [m for m in merged if m & g]
        for m in hit:
            merged.remove(m)
            g |= m
        merged.append(g)
    return frozenset(frozenset(g) for g in merged if len(g) >= 2)


@dataclass(frozen=True)
class Merge:
    """Per-level partitions of the factor set (blocks of size >= 2 only).

    Level -1 is the boundary scale, levels 0..k the fibre levels.  A
    block at level l means the factors agree through that level.
    """

    blocks: tuple  # tuple of (level, frozenset-of-frozensets), sorted

    @staticmethod
    def trivial() -> "Merge":
        return Merge(())

    @staticmethod
    def diag(factors, top_level: int) -> "Merge":
        fs = frozenset(factors)
        if len(fs) < 2:
            return Merge.trivial()
        return Merge(tuple((l, frozenset({fs}))
                           for l in range(-1, top_level + 1)))

    @staticmethod
    def from_pairs(level_pairs) -> "Merge":
        """Build from an iterable of (level, pair)."""
        by_level = {}
        for l, p in level_pairs:
            by_level.setdefault(l, []).append(frozenset(p))
        out = []
        for l in sorted(by_level):
            b = _join_partition(by_level[l], [])
            if b:
                out.append((l, b))
        return Merge(tuple(out))

    def at(self, level: int) -> frozenset:
        for l, b in self.blocks:
            if l == level:
                return b
        return frozenset()

    @property
    def trivial_p(self) -> bool:
        return not self.blocks

    def levels(self):
        return sorted(l for l, _ in self.blocks)

    def join(self, other: "Merge") -> "Merge":
        levels = set(self.levels()) | set(other.levels())
        out = []
        for l in sorted(levels):
            b = _join_partition(self.at(l), other.at(l))
            if b:
                out.append((l, b))
        return Merge(tuple(out))

    def leq(self, other: "Merge") -> bool:
        """True if every merge of self is implied by other."""
        for l, blks in self.blocks:
            ob = other.at(l)
            for b in blks:
                if not any(b <= o for o in ob):
                    return False
        return True

    def eq(self, other: "Merge") -> bool:
        return self.leq(other) and other.leq(self)

    def maxlevel(self, pair) -> int:
        """Deepest level merging the pair (-2 if never)."""
        p = frozenset(pair)
        out = -2
        for l, blks in self.blocks:
            if any(p <= b for b in blks):
                out = max(out, l)
        return out

    def pairs_at_level(self, level: int):
        for b in self.at(level):
            yield from (frozenset(p)
                        for p in itertools.combinations(sorted(b), 2))

    def all_pairs(self):
        seen = set()
        for l, blks in self.blocks:
            for b in blks:
                for p in itertools.combinations(sorted(b), 2):
                    seen.add(frozenset(p))
        return seen

    def reduce_by(self, absorbed: "Merge") -> "Merge":
        """Drop the merges already realized at least as deep in `absorbed`.

        Kept pairs are re-joined level by level, so partially absorbed
        blocks survive as their quotient structure.
        """
        kept = []
        for l, blks in self.blocks:
            for b in blks:
                for p in itertools.combinations(sorted(b), 2):
                    pr = frozenset(p)
                    if absorbed.maxlevel(pr) < self.maxlevel(pr):
                        kept.append((l, pr))
        return Merge.from_pairs(kept)

    def canonical_key(self):
        return tuple((l, tuple(sorted(tuple(sorted(b)) for b in blks)))
                     for l, blks in self.blocks)


def merge_join_all(merges) -> Merge:
    out = Merge.trivial()
    for m in merges:
        out = out.join(m)
    return out


# ---------------------------------------------------------------------------
# loci and registered submanifolds

@dataclass(frozen=True)
class Locus:
    """Intersection of the listed faces with a diagonal strict transform.

    `pure` marks loci whose merge data is literally the strict transform
    of a product diagonal; preimage loci produced by blowup commutation
    carry residual families instead and are marked impure.
    """

    faces: frozenset
    merge: Merge = Merge.trivial()
    pure: bool = True

    @property
    def is_corner(self) -> bool:
        return self.merge.trivial_p


def corner(*faces) -> Locus:
    return Locus(frozenset(faces))


def diag_locus(factors, top_level, *faces) -> Locus:
    return Locus(frozenset(faces), Merge.diag(factors, top_level))


@dataclass(frozen=True)
class PSub:
    """Registered submanifold: vanishing data plus definedness order."""

    locus: Locus
    order: float = INF

    @property
    def vanishing_bhs(self):
        return self.locus.faces

    @property
    def vanishing_interior(self):
        return self.locus.merge


# ---------------------------------------------------------------------------
# exact feasibility of vanishing-rate systems (tiny Fourier-Motzkin)

def _fm_feasible(rows, n):
    """Feasibility of {t in Q^n : row . (t, 1) >= 0 for all rows}."""
    rows = [tuple(Fraction(c) for c in r) for r in rows]
    for var in range(n):
        pos, neg, rest = [], [], []
        for r in rows:
            c = r[var]
            if c > 0:
                pos.append(r)
            elif c < 0:
                neg.append(r)
            else:
                rest.append(r)
        new = rest
        for rp in pos:
            for rn in neg:
                new.append(tuple(rp[i] * (-rn[var]) + rn[i] * rp[var]
                                 for i in range(len(rp))))
        rows = new
    return all(r[-1] >= 0 for r in rows)


# ---------------------------------------------------------------------------
# faces, steps, spaces

@dataclass(frozen=True)
class Face:
    name: str
    step: int                      # -1 for base faces
    order: int                     # creation blowup order, 0 for base
    v: tuple                       # sorted ((symbol, order), ...)
    merged: Merge
    center: Optional[Locus] = None

    def val(self, symbol) -> int:
        for s, o in self.v:
            if s == symbol:
                return o
        return 0

    @property
    def is_front(self) -> bool:
        return self.step >= 0


@dataclass(frozen=True)
class Step:
    label: str
    center: Locus
    order: int
    rank: int                      # interior rank of the residual cut


@dataclass(frozen=True)
class Space:
    """Immutable corner space; blowups return new values."""

    name: str
    n_factors: int
    dims: tuple                    # ((level, dim), ...), level -1 first
    faces: tuple
    strata: frozenset              # maximal jointly-meeting face-name sets
    diag_meets: tuple              # (((factors, level), face-set), ...)
    registry: tuple                # ((name, PSub), ...)
    history: tuple = ()

    # -- basic queries --------------------------------------------------

    def face(self, name: str) -> Face:
        for f in self.faces:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def face_names(self):
        return tuple(f.name for f in self.faces)

    def val(self, face_name: str, symbol) -> int:
        return self.face(face_name).val(symbol)

    def dim_of_level(self, level: int) -> int:
        for l, d in self.dims:
            if l == level:
                return d
        raise KeyError(level)

    @property
    def levels(self):
        return tuple(l for l, _ in self.dims)

    def meets(self, face_names) -> bool:
        s = frozenset(face_names)
        return any(s <= m for m in self.strata)

    def diag_meet_set(self, factors, level) -> frozenset:
        key = (frozenset(factors), level)
        for k, v in self.diag_meets:
            if k == key:
                return v
        raise KeyError(key)

    def registered(self, name: str) -> PSub:
        for n, p in self.registry:
            if n == name:
                return p
        raise KeyError(name)

    def neighborhood(self, face_names) -> list:
        s = frozenset(face_names)
        out = []
        for f in self.face_names:
            if f not in s and any((s | {f}) <= m for m in self.strata):
                out.append(f)
        return out

    # -- rate feasibility ------------------------------------------------

    def rates_feasible(self, required, optional, merge: Merge) -> bool:
        """Can the required faces vanish jointly at positive rates while
        merged boundary coordinates keep equal rates?  Infeasibility
        proves the region empty; feasibility proves nothing."""
        supp = list(dict.fromkeys(list(required) + list(optional)))
        idx = {f: i for i, f in enumerate(supp)}
        n = len(supp)
        req = set(required)
        rows = []
        for f in supp:
            row = [Fraction(0)] * (n + 1)
            row[idx[f]] = Fraction(1)
            row[-1] = Fraction(-1) if f in req else Fraction(0)
            rows.append(tuple(row))
        for block in merge.at(-1):
            bl = sorted(block)
            i0 = bl[0]
            for i in bl[1:]:
                row = [Fraction(0)] * (n + 1)
                for f in supp:
                    row[idx[f]] = Fraction(self.val(f, ("x", i))
                                           - self.val(f, ("x", i0)))
                rows.append(tuple(row))
                rows.append(tuple(-c for c in row))
        return _fm_feasible(rows, n)

    # -- derived locus predicates -----------------------------------------

    def canon_merge(self, locus: Locus) -> Merge:
        """Locus merge completed by the merged data of its faces.

        Points of the locus inherit every infinitesimal agreement
        carried by a face they lie on.
        """
        return locus.merge.join(
            merge_join_all(self.face(f).merged for f in locus.faces))

    def face_closure(self, locus: Locus) -> frozenset:
        """Faces provably containing the locus.

        Growth rules: a merged boundary coordinate lagging behind its
        partner along a listed face must pick up its unique available
        compensating face; and the front face of any past step whose
        center is implied by the locus contains the lift.
        """
        cl = set(locus.faces)
        cm = self.canon_merge(locus)
        changed = True
        while changed:
            changed = False
            for pair in cm.pairs_at_level(-1):
                i, j = sorted(pair)
                for h in list(cl):
                    di = self.val(h, ("x", i)) - self.val(h, ("x", j))
                    if di == 0:
                        continue
                    lo, hi = (i, j) if di < 0 else (j, i)
                    cands = [f for f in self.neighborhood(cl)
                             if self.val(f, ("x", lo)) > self.val(f, ("x", hi))]
                    if len(cands) == 1 and cands[0] not in cl:
                        cl.add(cands[0])
                        changed = True
            for st in self.history:
                if st.label in cl:
                    continue
                if st.center.faces <= cl and st.center.merge.leq(cm):
                    cl.add(st.label)
                    changed = True
        return frozenset(cl)

    def locus_contained_in(self, inner: Locus, outer: Locus) -> bool:
        """True if every constraint of outer provably holds on inner."""
        return (outer.faces <= self.face_closure(inner)
                and outer.merge.leq(self.canon_merge(inner)))

    def locus_nonempty_certificate(self, locus: Locus) -> bool:
        """Necessary conditions for nonemptiness; False proves empty."""
        if locus.faces and not self.meets(locus.faces):
            return False
        if locus.pure:
            # a pure locus lies inside the tracked strict transform of
            # each of its diagonal blocks; residual (impure) loci do not
            for l, blks in locus.merge.blocks:
                for b in blks:
                    try:
                        ms = self.diag_meet_set(b, l)
                    except KeyError:
                        continue
                    if not locus.faces <= ms:
                        return False
        else:
            # a residual locus still lies inside the strict transform of
            # any pair diagonal whose depth exceeds everything the faces
            # carry for that pair
            fm = merge_join_all(self.face(f).merged for f in locus.faces)
            for pair in {p for p in locus.merge.all_pairs()}:
                l = locus.merge.maxlevel(pair)
                if fm.maxlevel(pair) >= l:
                    continue
                try:
                    ms = self.diag_meet_set(pair, l)
                except KeyError:
                    continue
                if not locus.faces <= ms:
                    return False
        if not locus.faces:
            return True
        # rate balance only for the locus's own diagonal constraints:
        # face-inherited merges do not force equal leading orders at the
        # face's deeper strata
        req = sorted(locus.faces)
        return self.rates_feasible(req, self.neighborhood(req), locus.merge)

    def _fibre_witness(self, C: Locus, forced, hstar, joint: Locus) -> bool:
        """Search for a front-face fibre point of both cones.

        Rate variables s_H (one per center face) describe the position
        inside the weighted octant over a generic point of the joint
        locus; faces provably containing either locus must degenerate
        (s >= 1), the face hstar stays at unit scale (s = 0), and merged
        boundary coordinates must balance.  Coordinates carried by faces
        of the joint closure outside the center balance freely.
        """
        sc = sorted(C.faces)
        carriers = self.face_closure(joint) - C.faces
        carried = set()
        free = []
        for i in range(1, self.n_factors + 1):
            if any(self.val(h, ("x", i)) > 0 for h in carriers):
                carried.add(i)
                free.append(i)
        idx = {h: k for k, h in enumerate(sc)}
        fidx = {i: len(sc) + k for k, i in enumerate(free)}
        n = len(sc) + len(free)
        rows = []
        for h in sc:
            row = [Fraction(0)] * (n + 1)
            row[idx[h]] = Fraction(1)
            if h in forced:
                row[-1] = Fraction(-1)
            rows.append(tuple(row))
            if h == hstar:
                rows.append(tuple(-c for c in row))  # s_hstar <= 0
        for i in free:
            row = [Fraction(0)] * (n + 1)
            row[fidx[i]] = Fraction(1)
            rows.append(tuple(row))
        for pair in joint.merge.pairs_at_level(-1):
            i, j = sorted(pair)

            def rate_row(m):
                row = [Fraction(0)] * (n + 1)
                for h in sc:
                    row[idx[h]] = Fraction(self.val(h, ("x", m)))
                if m in carried:
                    row[fidx[m]] = Fraction(1)
                return row

            ri, rj = rate_row(i), rate_row(j)
            diff = tuple(a - b for a, b in zip(ri, rj))
            rows.append(diff)
            rows.append(tuple(-c for c in diff))
        return _fm_feasible(rows, n)

    def separated_by(self, t1: Locus, t2: Locus, step: Step) -> bool:
        """Did blowing up `step` provably separate the strict transforms?

        Requires the joint locus to be contained in the center (with
        neither locus swallowed whole), every interior direction of the
        center to be pinned by the joint merge data, and no fibre point
        of both cones to survive over the front face.
        """
        C = step.center
        joint = Locus(t1.faces | t2.faces, t1.merge.join(t2.merge),
                      t1.pure and t2.pure)
        if step.label in joint.faces:
            return False
        if self.locus_contained_in(t1, C) or self.locus_contained_in(t2, C):
            return False
        jcm = self.canon_merge(joint)
        cl = self.face_closure(joint)
        if not (C.faces <= cl and C.merge.leq(jcm)):
            return False
        if not C.merge.leq(self.canon_merge(t1).join(self.canon_merge(t2))):
            return False
        forced = C.faces & (self.face_closure(t1) | self.face_closure(t2))
        pool = C.faces - forced
        for hstar in sorted(pool):
            if self._fibre_witness(C, forced, hstar, joint):
                return False
        return True

    def disjoint(self, t1: Locus, t2: Locus) -> bool:
        """Sound disjointness certificate (False proves nothing)."""
        joint = Locus(t1.faces | t2.faces, t1.merge.join(t2.merge),
                      t1.pure and t2.pure)
        if not self.locus_nonempty_certificate(joint):
            return True
        return any(self.separated_by(t1, t2, st) for st in self.history)

    def psub_meets(self, name: str) -> frozenset:
        """Faces a registered submanifold still meets."""
        ps = self.registered(name)
        t = ps.locus
        out = set(t.faces)
        for f in self.face_names:
            if f in out:
                continue
            if not self.disjoint(t, Locus(frozenset({f}))):
                out.add(f)
        return frozenset(out)


# ---------------------------------------------------------------------------
# b-maps

@dataclass(frozen=True)
class BMap:
    """Boundary-respecting map: integer exponent matrix plus face images."""

    domain: Space
    codomain: Space
    exponents: tuple               # ((dom_face, cod_face, e), ...) nonzeros
    step: Optional[Step] = None

    @property
    def domain_faces(self):
        return self.domain.face_names

    @property
    def codomain_faces(self):
        return self.codomain.face_names

    def exponent(self, g: str, h: str) -> int:
        for a, b, e in self.exponents:
            if a == g and b == h:
                return e
        return 0

    def face_map(self, g: str):
        """Image faces (empty frozenset: maps onto the interior)."""
        return frozenset(h for a, h, e in self.exponents if a == g and e > 0)

    def matrix(self):
        return [[self.exponent(g, h) for h in self.codomain_faces]
                for g in self.domain_faces]

    def exponent_vector(self, h: str):
        return tuple(self.exponent(g, h) for g in self.domain_faces)

    def interior_orders(self, g: str) -> dict:
        """Vanishing orders of the reference differences at a domain face."""
        face = self.domain.face(g)
        return {s: o for s, o in face.v if s[0] == "d"}


def bmap_from_entries(dom: Space, cod: Space, entries, step=None) -> BMap:
    nz = []
    for g, h, e in entries:
        e = int(e)
        if e < 0:
            raise ValueError("exponent matrix entries must be >= 0")
        if e:
            nz.append((g, h, e))
    return BMap(dom, cod, tuple(nz), step)


def compose(f: BMap, g: BMap) -> BMap:
    """Composite map: apply f first, then g."""
    if f.codomain.face_names != g.domain.face_names:
        raise ValueError("b-map composition: face lists do not match")
    entries = []
    for a in f.domain_faces:
        row = {}
        for b, c, e in f.exponents:
            if b != a:
                continue
            for c2, d, e2 in g.exponents:
                if c2 == c:
                    row[d] = row.get(d, 0) + e * e2
        entries.extend((a, d, e) for d, e in sorted(row.items()))
    return bmap_from_entries(f.domain, g.codomain, entries)


def identity_bmap(space: Space) -> BMap:
    return bmap_from_entries(space, space,
                             [(f, f, 1) for f in space.face_names])


def is_b_fibration(f: BMap) -> bool:
    """Row criterion: every face maps onto a face of codimension <= 1."""
    return all(len(f.face_map(g)) <= 1 for g in f.domain_faces)


# ---------------------------------------------------------------------------
# construction: products and blowups

def product_space(n_factors: int, dims, name: str = "",
                  face_names: Optional[Sequence[str]] = None) -> Space:
    """Product of one-boundary-face factors with shared level structure.

    `dims` maps fibre level (0..k) to dimension; the boundary scale
    level -1 has dimension 1 per factor.  All pairwise and higher
    diagonals initially meet every face.
    """
    if n_factors < 1:
        raise ValueError("need at least one factor")
    dim_items = tuple(sorted(dims.items()))
    if any(l < 0 for l, _ in dim_items):
        raise ValueError("fibre levels are 0..k")
    all_dims = ((-1, 1),) + dim_items
    if face_names is None:
        face_names = tuple(f"H_{i}" for i in range(1, n_factors + 1))
    if len(face_names) != n_factors:
        raise ValueError("need one face name per factor")
    faces = tuple(
        Face(fn, -1, 0, ((("x", i), 1),), Merge.trivial())
        for i, fn in enumerate(face_names, start=1))
    strata = frozenset({frozenset(face_names)})
    levels = [l for l, _ in all_dims]
    dmeets = []
    for r in range(2, n_factors + 1):
        for s in itertools.combinations(range(1, n_factors + 1), r):
            for l in levels:
                dmeets.append(((frozenset(s), l), frozenset(face_names)))
    return Space(name or f"product^{n_factors}", n_factors, all_dims,
                 faces, strata, tuple(dmeets), ())


def _face_merged_join(space: Space, faces) -> Merge:
    return merge_join_all(space.face(f).merged for f in faces)


def _corner_implied_pairs(space: Space, center: Locus):
    pairs = []
    for i, j in itertools.combinations(range(1, space.n_factors + 1), 2):
        mi = sum(space.val(f, ("x", i)) for f in center.faces)
        mj = sum(space.val(f, ("x", j)) for f in center.faces)
        if mi >= 1 and mj >= 1:
            pairs.append((-1, frozenset({i, j})))
    return pairs


def merged_of_new_face(space: Space, center: Locus) -> Merge:
    """Merge data the front face of this center will carry."""
    m = _face_merged_join(space, center.faces)
    if center.is_corner:
        return m.join(Merge.from_pairs(_corner_implied_pairs(space, center)))
    return m.join(center.merge)


def _center_rank(space: Space, center: Locus, dims=None) -> int:
    """Interior rank of the residual cut of the center.

    Pairs merged at least as deep by the containing faces are already
    part of the face structure and do not count; the remaining quotient
    classes of each block contribute dimension-many constraints each.
    An explicit level-dimension mapping overrides the space's own.
    """
    if center.is_corner:
        return 0
    face_merged = _face_merged_join(space, center.faces)
    total = 0
    for l, blks in center.merge.blocks:
        d = dims[l] if dims is not None else space.dim_of_level(l)
        if d == 0:
            continue
        for b in blks:
            elems = sorted(b)
            parent = {i: i for i in elems}

            def find(i):
                while parent[i] != i:
                    parent[i] = parent[parent[i]]
                    i = parent[i]
                return i

            for i, j in itertools.combinations(elems, 2):
                if face_merged.maxlevel({i, j}) >= center.merge.maxlevel({i, j}):
                    parent[find(i)] = find(j)
            total += d * (len({find(i) for i in elems}) - 1)
    return total


def _residual_cut(space: Space, center: Locus, level: int, pair) -> bool:
    """Does the center's residual constrain this difference function?"""
    face_merged = _face_merged_join(space, center.faces)
    if center.is_corner:
        if level != -1:
            return False
        i, j = sorted(pair)
        mi = sum(space.val(f, ("x", i)) for f in center.faces)
        mj = sum(space.val(f, ("x", j)) for f in center.faces)
        return mi >= 1 and mj >= 1 and face_merged.maxlevel(pair) < -1
    cm = center.merge.maxlevel(pair)
    if cm < level:
        return False
    return cm > face_merged.maxlevel(pair)


def _all_symbols(space: Space):
    syms = [("x", i) for i in range(1, space.n_factors + 1)]
    for i, j in itertools.combinations(range(1, space.n_factors + 1), 2):
        for l in space.levels:
            syms.append(("d", l, frozenset({i, j})))
    return syms


def _downward_family(strata):
    fam = {frozenset()}
    for m in strata:
        for r in range(1, len(m) + 1):
            fam.update(frozenset(c) for c in itertools.combinations(sorted(m), r))
    return fam


def _maximalize(sets):
    return frozenset(s for s in sets if not any(s < t for t in sets))


def _new_strata(space: Space, center: Locus, ff_name: str) -> frozenset:
    all_old = _downward_family(space.strata)
    new_sets = set()
    if center.is_corner:
        for m in space.strata:
            if not center.faces <= m:
                new_sets.add(m)
        for b in all_old:
            if (b | center.faces) in all_old and not center.faces <= b:
                new_sets.add(b | {ff_name})
    else:
        new_sets |= space.strata
        for b in all_old:
            tot = b | center.faces
            if tot not in all_old:
                continue
            if not space.disjoint(center, Locus(frozenset(tot))):
                new_sets.add(tot | {ff_name})
    return _maximalize(new_sets)


center_rank = _center_rank


def blowup(space: Space, center, a: int, label: str = ""):
    """Blow up a center to order a; returns (new space, blowdown map).

    The center may be a Locus, a PSub, or a registered-submanifold name.
    Registered submanifolds are lifted; diagonal tracking and incidence
    are updated by the documented rules.
    """
    if isinstance(center, str):
        ps = space.registered(center)
        c, defined = ps.locus, ps.order
    elif isinstance(center, PSub):
        c, defined = center.locus, center.order
    else:
        c, defined = center, INF
    if not label:
        label = f"ff{len(space.history)}"
    if a < 1:
        raise BlowupError("blowup order must be a positive integer")
    if defined != INF and defined < a:
        raise BlowupError(
            f"center defined only to order {defined}; cannot blow up to {a}")
    unknown = [f for f in c.faces if f not in space.face_names]
    if unknown:
        raise BlowupError(f"center references unknown faces {unknown}")
    if not c.faces:
        raise BlowupError("center must vanish on at least one face")
    if len(c.faces) == 1 and c.is_corner:
        # blowing up a whole boundary hypersurface changes nothing
        return space, identity_bmap(space)
    if not space.meets(c.faces):
        raise BlowupError(f"center faces {sorted(c.faces)} do not meet")
    if not space.locus_nonempty_certificate(c):
        raise BlowupError(f"center at {sorted(c.faces)} is provably empty")
    if not c.is_corner:
        heavy = [f for f in c.faces
                 if any(s[0] == "d" and o > 0 for s, o in space.face(f).v)]
        if len(heavy) > 1:
            raise EngineUnsupported(
                "diagonal center spanning several diagonal-bearing faces")
    if label in space.face_names:
        raise BlowupError(f"face name {label} already in use")

    rank = _center_rank(space, c)
    step = Step(label, c, a, rank)

    vals = []
    for s in _all_symbols(space):
        o = sum(space.val(f, s) for f in c.faces)
        if s[0] == "d" and _residual_cut(space, c, s[1], s[2]):
            o += a
        if o:
            vals.append((s, o))
    vals.sort(key=lambda so: _symkey(so[0]))
    ff = Face(label, len(space.history), a, tuple(vals),
              merged_of_new_face(space, c), c)

    strata = _new_strata(space, c, label)

    new_dmeets = []
    for key, ms in space.diag_meets:
        factors, level = key
        dloc = Locus(frozenset(), Merge.diag(factors, level))
        out = set()
        for h in ms:
            if not space.separated_by(dloc, Locus(frozenset({h})), step):
                out.add(h)
        if c.faces <= ms and not space.disjoint(dloc, c):
            out.add(label)
        new_dmeets.append((key, frozenset(out)))

    new_reg = []
    for name, ps in space.registry:
        t = ps.locus
        if space.locus_contained_in(t, c):
            if ps.order != INF and ps.order <= a:
                continue  # fully resolved by this blowup
            lifted = Locus((t.faces - c.faces) | {label}, t.merge)
            new_reg.append((name, PSub(lifted, ps.order if ps.order == INF
                                       else ps.order - a)))
        else:
            new_reg.append((name, ps))

    new = Space(space.name, space.n_factors, space.dims,
                space.faces + (ff,), strata, tuple(new_dmeets),
                tuple(new_reg), space.history + (step,))

    entries = [(f.name, f.name, 1) for f in space.faces]
    entries += [(label, h, 1) for h in sorted(c.faces)]
    beta = bmap_from_entries(new, space, entries, step)
    return new, beta


def register(space: Space, name: str, psub: PSub) -> Space:
    if any(n == name for n, _ in space.registry):
        raise ValueError(f"submanifold {name} already registered")
    for f in psub.locus.faces:
        space.face(f)
    return replace(space, registry=space.registry + ((name, psub),))


def lift(beta: BMap, S: PSub) -> PSub:
    """Lift a submanifold under a single blowdown map.

    Either S is contained in the blown-up center (lift lives in the
    front face, definedness order drops by the blowup order) or S closes
    up off the center (strict transform, order unchanged).
    """
    if beta.step is None:
        raise ValueError("lift needs a single blowdown map")
    c, a = beta.step.center, beta.step.order
    old = beta.codomain
    label = beta.step.label
    if old.locus_contained_in(S.locus, c):
        if S.order != INF and S.order <= a:
            raise BlowupError(
                "submanifold order deficit: fully resolved, lift undefined")
        lifted = Locus((S.locus.faces - c.faces) | {label}, S.locus.merge)
        return PSub(lifted, S.order if S.order == INF else S.order - a)
    # otherwise the part away from the center is dense: strict transform
    return PSub(S.locus, S.order)


# ---------------------------------------------------------------------------
# blowup sequences and the commutation rewrite rules

@dataclass(frozen=True)
class CenterExpr:
    """Replayable center description: faces by name, diagonal by merge."""

    label: str
    faces: tuple
    merge: Merge = Merge.trivial()
    order: int = 1
    pure: bool = True

    def locus(self) -> Locus:
        return Locus(frozenset(self.faces), self.merge, self.pure)


@dataclass(frozen=True)
class BlowupSeq:
    base: Space
    entries: tuple

    def labels(self):
        return tuple(e.label for e in self.entries)

    def index_of(self, label: str) -> int:
        return self.labels().index(label)


_REPLAY_CACHE: dict = {}


def clear_replay_cache():
    _REPLAY_CACHE.clear()


def replay(seq: BlowupSeq, upto: Optional[int] = None):
    """Execute the sequence; returns (space, list of blowdown maps)."""
    n = len(seq.entries) if upto is None else upto
    key = (seq.base, seq.entries[:n])
    if key in _REPLAY_CACHE:
        return _REPLAY_CACHE[key]
    if n == 0:
        out = (seq.base, [])
    else:
        prev, maps = replay(seq, n - 1)
        e = seq.entries[n - 1]
        space, beta = blowup(prev, e.locus(), e.order, e.label)
        out = (space, maps + [beta])
    _REPLAY_CACHE[key] = out
    return out


def total_blowdown(seq: BlowupSeq) -> BMap:
    space, maps = replay(seq)
    if not maps:
        return identity_bmap(space)
    out = maps[-1]
    for beta in reversed(maps[:-1]):
        out = compose(out, beta)
    return out


def _expr_references(e: CenterExpr, label: str) -> bool:
    return label in e.faces


def rewrite_step(seq: BlowupSeq, rule: int, position: int) -> BlowupSeq:
    """Apply one blowup-commutation rule at the given position.

    Rule 1 swaps adjacent blowups of certified-disjoint centers.  Rule 2
    swaps a nested adjacent pair of equal orders (first center contained
    in the second), replacing the inner center by its preimage in the
    new front face.  Rule 3 exchanges a cleanly intersecting triple
    (y, lift of y-cap-w, lift of w) into (w, lift of y-cap-w, lift of
    y); the middle blowup order switches from w's to y's.

    Front-face labels follow the loci they resolve, so replaying the
    rewritten sequence reproduces the same named faces.
    """
    es = seq.entries
    p = position
    if rule == 1:
        y, w = es[p], es[p + 1]
        if _expr_references(w, y.label):
            raise RewriteError(
                f"{w.label} references the front face of {y.label}")
        space, _ = replay(seq, p)
        if not space.disjoint(y.locus(), w.locus()):
            raise RewriteError(
                f"no disjointness certificate for {y.label} / {w.label}")
        return BlowupSeq(seq.base, es[:p] + (w, y) + es[p + 2:])

    if rule == 2:
        a_e, b_e = es[p], es[p + 1]
        if _expr_references(b_e, a_e.label):
            raise RewriteError(
                f"{b_e.label} references the front face of {a_e.label}")
        if a_e.order != b_e.order:
            raise RewriteError("nested swap needs equal blowup orders")
        space, _ = replay(seq, p)
        A, B = a_e.locus(), b_e.locus()
        if not space.locus_contained_in(A, B):
            raise RewriteError(f"{a_e.label} not contained in {b_e.label}")
        pm = merged_of_new_face(space, B)
        a_new = CenterExpr(a_e.label,
                           tuple(sorted((A.faces - B.faces) | {b_e.label})),
                           A.merge.reduce_by(pm), a_e.order, pure=False)
        return BlowupSeq(seq.base, es[:p] + (b_e, a_new) + es[p + 2:])

    if rule == 3:
        y_e, a_e, w_e = es[p], es[p + 1], es[p + 2]
        if a_e.order != w_e.order:
            raise RewriteError("triple exchange needs matching outer orders")
        if _expr_references(w_e, y_e.label) or _expr_references(w_e, a_e.label):
            raise RewriteError(
                f"{w_e.label} must be expressible before {y_e.label}")
        space, _ = replay(seq, p)
        Y, W = y_e.locus(), w_e.locus()
        A = Locus(Y.faces | W.faces, Y.merge.join(W.merge))
        pm_y = merged_of_new_face(space, Y)
        want_faces = frozenset((A.faces - Y.faces) | {y_e.label})
        if frozenset(a_e.faces) != want_faces:
            raise RewriteError(
                f"middle entry {a_e.label} is not the lift of the intersection")
        face_m = _face_merged_join(space, A.faces)
        got = a_e.merge.join(pm_y).join(face_m)
        want = A.merge.join(pm_y).join(face_m)
        if not got.eq(want):
            raise RewriteError("middle entry merge data does not match")
        pm_w = merged_of_new_face(space, W)
        a_new = CenterExpr(a_e.label,
                           tuple(sorted((A.faces - W.faces) | {w_e.label})),
                           A.merge.reduce_by(pm_w.join(
                               _face_merged_join(space, A.faces - W.faces))),
                           y_e.order, pure=False)
        y_new = CenterExpr(y_e.label, y_e.faces, y_e.merge, y_e.order,
                           pure=y_e.pure)
        return BlowupSeq(seq.base, es[:p] + (w_e, a_new, y_new) + es[p + 3:])

    raise ValueError("rule must be 1, 2 or 3")


def seq_to_json(seq: BlowupSeq) -> list:
    """Blowup script serialization: one entry per step."""
    out = []
    for e in seq.entries:
        interior = [{"factors": sorted(b), "level": l}
                    for l, blks in e.merge.blocks for b in sorted(blks, key=sorted)]
        out.append({"label": e.label,
                    "center": {"faces": list(e.faces), "interior": interior},
                    "order": e.order})
    return out


def seq_from_json(base: Space, data) -> BlowupSeq:
    entries = []
    for item in data:
        c = item["center"]
        by_level = {}
        for blk in c.get("interior", []):
            by_level.setdefault(int(blk["level"]), []).append(
                frozenset(int(i) for i in blk["factors"]))
        merge = Merge(tuple(
            (l, _join_partition(by_level[l], [])) for l in sorted(by_level)))
        entries.append(CenterExpr(item["label"], tuple(c["faces"]), merge,
                                  int(item.get("order", 1))))
    return BlowupSeq(base, tuple(entries))


def bubble_to(seq: BlowupSeq, label: str, target: int, rule: int = 1) -> BlowupSeq:
    """Move the labeled entry to the target index by adjacent swaps."""
    i = seq.index_of(label)
    while i > target:
        seq = rewrite_step(seq, rule, i - 1)
        i -= 1
    while i < target:
        seq = rewrite_step(seq, rule, i)
        i += 1
    return seq


# ---------------------------------------------------------------------------
# isomorphism of spaces

def _face_signature(f: Face):
    return (f.step >= 0, f.order, f.v, f.merged.canonical_key())


def isomorphic(X: Space, Y: Space, incidence: str = "exact"):
    """Face bijection preserving creation orders, valuations (hence total
    blowdown exponent data), merge structure, incidence, and registered
    submanifolds.  Returns the bijection or None.

    With incidence="exact" the pairwise meeting relations must agree.
    With incidence="within", X's meetings must map into Y's: this is the
    right comparison when Y was produced by replaying a commuted blowup
    sequence, whose incidence relation is a certified over-approximation
    (separation facts carried by the rewrite history are not always
    visible in the final sequence).
    """
    if len(X.faces) != len(Y.faces) or X.dims != Y.dims:
        return None
    sigX, sigY = {}, {}
    for f in X.faces:
        sigX.setdefault(_face_signature(f), []).append(f.name)
    for f in Y.faces:
        sigY.setdefault(_face_signature(f), []).append(f.name)
    if set(sigX) != set(sigY):
        return None
    if any(len(sigX[s]) != len(sigY[s]) for s in sigX):
        return None

    groups = sorted(sigX, key=lambda s: (len(sigX[s]), repr(s)))
    assign: dict = {}

    def check_final():
        names = X.face_names
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                mx = X.meets({a, b})
                my = Y.meets({assign[a], assign[b]})
                if incidence == "exact" and mx != my:
                    return None
                if incidence == "within" and mx and not my:
                    return None
        regX, regY = dict(X.registry), dict(Y.registry)
        if set(regX) != set(regY):
            return None
        for name, ps in regX.items():
            q = regY[name]
            if frozenset(assign[f] for f in ps.locus.faces) != q.locus.faces:
                return None
            if not ps.locus.merge.eq(q.locus.merge) or ps.order != q.order:
                return None
        return dict(assign)

    def backtrack(gi):
        if gi == len(groups):
            return check_final()
        s = groups[gi]
        xs, ys = sigX[s], sigY[s]
        for perm in itertools.permutations(ys):
            for a, b in zip(xs, perm):
                assign[a] = b
            out = backtrack(gi + 1)
            if out is not None:
                return out
            for a in xs:
                del assign[a]
        return None

    return backtrack(0)


# ---------------------------------------------------------------------------
# DOT export

def export_dot(space: Space, title: str = "") -> str:
    """Face lattice as a graph: incidence edges plus blowup ancestry."""
    lines = [f'graph "{title or space.name}" {{']
    for f in space.faces:
        if f.is_front:
            desc = "+".join(sorted(f.center.faces))
            if not f.center.is_corner:
                desc += "&diag"
            lines.append(f'  "{f.name}" [shape=box, label="{f.name}\\n'
                         f'center {desc}, order {f.order}"];')
        else:
            lines.append(f'  "{f.name}" [shape=ellipse];')
    names = space.face_names
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if space.meets({a, b}):
                lines.append(f'  "{a}" -- "{b}";')
    for f in space.faces:
        if f.is_front:
            for h in sorted(f.center.faces):
                lines.append(f'  "{f.name}" -- "{h}" [style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"
