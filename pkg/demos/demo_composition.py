"""Operator classes and the composition pipeline.

A class is a conormal order plus one index set per double-space face.
Composition pulls the two families back to the triple space, adds the
composition weight vector, pushes forward through the middle
projection, and shifts back.  The deepest-face answer must agree with
the four-term closed form; this single identity exercises the face
tables and every weight in the calculus.
"""

from fractions import Fraction

from qhcalc import densities as dn
from qhcalc import op_calculus as oc
from qhcalc.a_spaces import Tower
from qhcalc.index_algebra import make

t = Tower(2, (1, 1, 1), 1, (1, 1))
print("gamma weights:", dn.gamma(t))

P = oc.op_class(t, 0, lf=make((1, 0)), ff_z=make((0, 0)))
Q = oc.op_class(t, 0, rf=make((2, 0)), ff_z=make((0, 0)))
R = oc.compose(P, Q)
print("\nP:", P)
print("Q:", Q)
print("P o Q:", R)
print("closed form at the deepest face:", oc.ffz_closed_form(P, Q))

print("\nmapping a polyhomogeneous input:")
print("  act(P, smooth) =", oc.act(P, make((0, 0))))

print("\nadjoints swap the side faces:")
print("  adjoint(P):", oc.adjoint(P))

print("\nand the composition weight vector that makes it all work:")
print(dn.weight_discrepancy_report(t))

print("\nintegrability is strict: composing across a zero-margin pair")
try:
    oc.compose(oc.op_class(t, 0, rf=make((0, 0)), ff_z=make((0, 0))),
               oc.op_class(t, 0, lf=make((0, 0)), ff_z=make((0, 0))))
except oc.NonIntegrable as e:
    print("  rejected:", e)
