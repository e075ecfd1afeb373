"""Index set arithmetic, narrated.

An index set prescribes which powers x^z (log x)^p may appear in an
expansion at a boundary face.  We store the finite antichain of maximal
generators; the closure rules (drop a log power, raise the exponent by
one) are implicit.  Everything below is exact rational arithmetic.
"""

from fractions import Fraction

from qhcalc import index_algebra as ia
from qhcalc.index_algebra import add, ext_union, inf_re, make, shift

smooth = make((0, 0))
half = make((Fraction(1, 2), 0))
logged = make((1, 2))

print("smooth functions:      ", smooth)
print("sqrt-leading set:      ", half)
print("log^2 at order one:    ", logged)

print("\nsums shift leading exponents and add log powers:")
print("  half + logged =", add(half, logged))
print("  inf Re:", inf_re(add(half, logged)))

print("\nthe extended union adds one log power where two sets overlap:")
print("  smooth u- smooth =", ext_union(smooth, smooth))
print("  smooth u- (3,0)  =", ext_union(smooth, make((3, 0))))
print("  different cosets never interact:")
print("  half   u- smooth =", ext_union(half, smooth))

print("\nshifting by a weight moves the whole set:")
print("  shift(smooth, 5/2) =", shift(smooth, Fraction(5, 2)))

print("\nwindowed closures are the test-time equality:")
G = make((0, 1))
H = ia.normalize([ia.term(0, 0, 1), ia.term(2, 0, 1), ia.term(1, 0, 0)])
print("  generators:", G, "vs", H)
print("  equal on the window Re <= 10, p <= 6:",
      ia.windowed_eq(G, H, 10, 6))
