"""Weight vectors: closed forms against cumulative blowup counts."""

import itertools

from fractions import Fraction

from qhcalc import a_spaces as asp
from qhcalc import densities as dn
from qhcalc.a_spaces import Tower

T = Tower(2, (1, 1, 1), 1, (1, 1))


def test_gamma_examples():
    assert dn.gamma(T) == (2, 5)
    assert dn.gamma(Tower(2, (1, 2, 3), 0, (2, 1))) == (2, 11)
    assert dn.gamma(Tower(2, (1, 1, 1), 0, (0, 0))) == (1, 2)


def test_gamma_strictly_increasing():
    for a1, a2, b, f1 in itertools.product((1, 3), (2, 5), (0, 2), (0, 4)):
        g = dn.gamma(Tower(2, (1, a1, a2), b, (f1, 1)))
        assert g[0] < g[1]


def test_gamma_closed_form_equals_cumulative_sweep():
    # exhaustive small sweep: closed form vs blowup-count computation
    for a1, a2 in itertools.product(range(1, 6), range(1, 6)):
        for b, f1 in itertools.product(range(0, 5), range(0, 5)):
            t = Tower(2, (1, a1, a2), b, (f1, 1))
            w = dn.blowup_weight_vector(asp.double_space(t).space)
            gy, gz = dn.gamma(t)
            assert w["ff_zy"] == gy and w["ff_z"] == gz and w["ff_zx"] == 0


def test_double_weights_tables():
    dw = dn.double_weights(T)
    assert dw.w_a0["ff_zy"] == 2 and dw.w_a0["ff_z"] == 5
    assert dw.w_a["ff_zy"] == -2 and dw.w_a["ff_z"] == -5
    assert dw.w_tilde["ff_zy"] == -8      # -2 gamma_z + gamma_y
    assert dw.w_tilde["rf"] == dw.w_tilde["lf"] == -5
    assert dw.w_tilde["ff_zx"] == -10
    # integrality
    for w in (dw.w_a0, dw.w_a, dw.w_tilde):
        assert all(v.denominator == 1 for v in w.assignment.values())


def test_triple_weights_and_discrepancy():
    tw = dn.triple_weights(T)
    assert tw.W_a0["V_z"] == 10 and tw.W_a0["V_y"] == 4
    assert tw.W_a0["F_{1,z}"] == 7
    assert tw.w0["ff_zy"] == -2 and tw.w0["ff_z"] == -5
    assert tw.W_a["F_{2,z}"] == -2 and tw.W_a["V_z"] == -5
    assert tw.W_a["G_{1,z}"] == 0 and tw.W_a["E_{2,y}"] == 0
    disp = dn.displayed_w_a(T)
    assert disp["V_z"] == 5 and tw.W_a["V_z"] == -5
    report = dn.weight_discrepancy_report(T)
    assert "adopted" in report and "displayed" in report


def test_triple_weights_match_full_construction():
    # the canonical-table route agrees with a from-scratch construction
    for t in (T, Tower(2, (1, 2, 1), 0, (1, 2))):
        trip = asp.triple_space(t)
        full = dn.blowup_weight_vector(trip.space)
        assert full == dn.triple_w_a0(t)
