"""The parametrix remainder ledger.

For a fully elliptic class of a given order, the construction improves
remainders in four moves: symbol inversion, an asymptotic Neumann sum,
a boundary-model correction, and a second asymptotic sum.  Every
inclusion the ledger claims is re-verified by composing classes.
"""

from qhcalc import op_calculus as oc
from qhcalc.a_spaces import Tower

t = Tower(2, (1, 1, 1), 1, (1, 1))
led = oc.parametrix_ledger(t, 2)
print(f"ledger for order {led.order}; verified: {led.verify()}\n")
for i, st in enumerate(led.steps, 1):
    print(f"step {i}: {st.description}")
    print(f"  rule: {st.rule}")
    print(f"  output class: {st.output}")
    for ok, what in st.checks:
        print(f"  check [{'ok' if ok else 'FAIL'}] {what}")
    print()

print("compactness thresholds for the standard tower:")
print("  compact(1, -1):", oc.compact(1, -1))
print("  compact(0, -1):", oc.compact(0, -1), " (boundary case excluded)")
print("  hilbert_schmidt(3, -3):", oc.hilbert_schmidt(3, -3, t))
