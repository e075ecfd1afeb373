"""Build the resolved double space of a depth-2 tower, step by step.

The two-factor product is blown up along the corner, then along the
boundary of each partial diagonal in increasing depth.  The engine
tracks exact vanishing orders of coordinate differences, so the
exponent vectors of the two projections come out of the construction
rather than being postulated.
"""

from qhcalc import a_spaces as asp
from qhcalc import corner_spaces as cs
from qhcalc.a_spaces import Tower

t = Tower(2, (1, 1, 1), 1, (1, 1))
d = asp.double_space(t)

print("faces:", ", ".join(d.faces))
print("lifted diagonal meets:", ", ".join(sorted(d.space.psub_meets("diag"))))

pair = frozenset({1, 2})
print("\nvanishing orders of the coordinate differences per face:")
for name in d.faces:
    f = d.space.face(name)
    orders = [d.space.val(name, ("d", l, pair)) for l in (-1, 0, 1, 2)]
    print(f"  {name:6s} x-diff {orders[0]}, y-diff {orders[1]}, "
          f"z-diff {orders[2]}, w-diff {orders[3]}")

print("\nprojection exponent vectors over", d.faces, ":")
print("  left: ", asp.exponent_vector(d.proj_l, d.faces))
print("  right:", asp.exponent_vector(d.proj_r, d.faces))
print("  b-fibrations:", cs.is_b_fibration(d.proj_l),
      cs.is_b_fibration(d.proj_r))

print("\nface lattice (DOT):")
print(cs.export_dot(d.space, "double space"))
