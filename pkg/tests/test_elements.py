import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from resetlab.crone import CroneConfig, crone_place
from resetlab.elements import (CgLpController, ResetSystem, base_linear, make_fore,
                               make_fosre, make_fosre_lead, make_lowpass, make_pi,
                               make_sore, make_sosre, make_sosre_lead,
                               make_tamed_derivative)
from resetlab.hosidf import psi
from resetlab.lti import StateSpaceSystem, freq_response, is_hurwitz

TP = 2 * math.pi


def fr(sys, w):
    return freq_response(sys, w)[0, 0]


def fosre_oracle(w, w_ra, beta, F):
    """Transfer function ``w_ra^2 F / (s + 2 beta w_ra + w_ra^2 F)``."""
    s = 1j * w
    return w_ra**2 * F / (s + 2 * beta * w_ra + w_ra**2 * F)


def test_fore_gamma_one_is_linear_lag():
    lag, lead = make_fore(10.0, 12.0, 1e4, 1.0)
    assert lag.reset_state_indices == []
    for w in (0.1, 10.0, 1e3):
        assert fr(lag.base, w) == pytest.approx(1 / (1j * w / 10 + 1), rel=1e-12)
        assert fr(lead, w) == pytest.approx((1j * w / 12 + 1) / (1j * w / 1e4 + 1), rel=1e-9)


def test_sore_peak_at_corner():
    lag, _ = make_sore(5.0, 0.3, 5.0, 1e4, 0.0)
    assert abs(fr(lag.base, 5.0)) == pytest.approx(1 / (2 * 0.3), rel=1e-12)
    assert np.array_equal(lag.reset_diag, [0.0, 0.0])


def test_sosre_matrices():
    w, b = 2 * TP, 1.0
    rs = make_sosre(w, b, 0.2)
    assert np.allclose(rs.base.A, [[0, 1], [-w**2, -2 * b * w]])
    assert np.allclose(rs.base.B, [[0], [1]])
    assert np.allclose(rs.base.C, [[w, 0]])
    assert np.allclose(rs.A_rho, np.diag([1.0, 0.2]))
    assert rs.reset_state_indices == [1]
    assert fr(rs.base, 1e-9) == pytest.approx(1 / w, rel=1e-9)
    # x2 is in phase with e at w_ra
    assert psi(rs, w) == pytest.approx(0.0, abs=1e-12)


def test_sosre_lead_cancels_dc():
    w = 2 * TP
    rs = make_sosre(w, 1.0, 1.0)
    lead = make_sosre_lead(w, 1.0, 1500 * TP, w)
    for f in (1e-6, 0.5, 2.0, 10.0, 100.0):
        assert abs(fr(rs.base, f * TP) * fr(lead, f * TP)) == pytest.approx(
            1.0 / abs((1j * f * TP / (1500 * TP))**2 + 2j * f / 1500 + 1), rel=1e-9)


def cfg_fosre():
    return CroneConfig(-0.4, 2.5 * TP, 5e5 * TP)


def test_fosre_dimensions_and_reset_matrix():
    cfg = cfg_fosre()
    rs = make_fosre(2 * TP, 1.0, 2.5 * TP, -0.4, 0.2, crone=cfg)
    assert rs.n_states == cfg.n_sections + 1
    assert rs.reset_diag[0] == 0.2
    assert np.all(rs.reset_diag[1:] == 1.0)
    assert rs.reset_state_indices == [0]
    assert rs.aux_state == 0
    assert is_hurwitz(rs.base.A)


@pytest.mark.parametrize("lam,w_ra_hz,w_l_hz", [(-0.4, 2.0, 2.5), (-0.1, 3.18, 0.8),
                                                 (-1.0, 1.0, 0.5), (0.0, 2.0, 1.0)])
def test_fosre_base_matches_transfer_function(lam, w_ra_hz, w_l_hz):
    cfg = CroneConfig(lam, w_l_hz * TP, 5e5 * TP)
    F = crone_place(cfg)
    w_ra = w_ra_hz * TP
    rs = make_fosre(w_ra, 1.0, w_l_hz * TP, lam, 0.2, crone=cfg)
    for w in np.logspace(-1, 4, 21) * TP:
        assert fr(rs.base, w) == pytest.approx(fosre_oracle(w, w_ra, 1.0, F.response(w)),
                                               rel=1e-8)
    assert fr(rs.base, 1e-9) == pytest.approx(1 / (1 + 2 / w_ra), rel=1e-6)


def test_fosre_aux_phase_closed_form():
    cfg = cfg_fosre()
    F = crone_place(cfg)
    w_ra = 2 * TP
    rs = make_fosre(w_ra, 1.0, 2.5 * TP, -0.4, 0.2, crone=cfg)
    for w in np.logspace(-1, 2, 13) * TP:
        ref = -np.angle(1j * w + 2 * w_ra + w_ra**2 * F.response(w))
        assert psi(rs, w) == pytest.approx(ref, abs=1e-9)


def test_fosre_requires_band():
    with pytest.raises(ValueError, match="CroneConfig or w_h"):
        make_fosre(1.0, 1.0, 1.0, -0.4, 0.2)
    with pytest.raises(ValueError):
        make_fosre(1.0, 1.0, 2.0, -0.4, 0.2, crone=CroneConfig(-0.4, 1.0, 1e4))


def test_fosre_lead_oracle():
    cfg = cfg_fosre()
    F = crone_place(cfg)
    w_r, w_f, beta = 2.2 * TP, 1500 * TP, 1.0
    lead = make_fosre_lead(w_r, 2.5 * TP, -0.4, w_f, cfg, beta)
    for w in np.logspace(-2, 5, 15) * TP:
        s = 1j * w
        ref = (1 / F.response(w) * (s / w_r**2 + 2 * beta / w_r) + 1) / ((s / w_f)**2 + 2 * s / w_f + 1)
        assert fr(lead, w) == pytest.approx(ref, rel=1e-8)
    assert lead.dc_gain()[0, 0] == pytest.approx(1 + 2 * beta / w_r, rel=1e-9)
    assert is_hurwitz(lead.A)


def test_fosre_lag_lead_flat_at_alpha_one():
    cfg = cfg_fosre()
    w_ra = 2 * TP
    rs = make_fosre(w_ra, 1.0, 2.5 * TP, -0.4, 1.0, crone=cfg)
    lead = make_fosre_lead(w_ra, 2.5 * TP, -0.4, 1e9 * TP, cfg)
    for w in np.logspace(-2, 3, 11) * TP:
        assert fr(rs.base, w) * fr(lead, w) == pytest.approx(1.0, abs=1e-5)


@given(st.floats(-1.0, 1.0))
def test_with_gamma(g):
    rs = make_sosre(3.0, 0.7, 0.5).with_gamma(g)
    assert rs.reset_diag[1] == g and rs.reset_diag[0] == 1.0
    assert rs.resettable == (1,)


@pytest.mark.parametrize("g", [1.5, -1.01])
def test_gamma_out_of_range(g):
    with pytest.raises(ValueError):
        make_sosre(3.0, 0.7, g)
    with pytest.raises(ValueError):
        ResetSystem(StateSpaceSystem([[-1.0]], [[1.0]], [[1.0]], [[0.0]]), [g])


def test_linear_blocks():
    pi = make_pi(2.0, 3.0)
    assert fr(pi, 3.0) == pytest.approx(2.0 * (1 - 1j), rel=1e-12)
    td = make_tamed_derivative(10.0, 100.0)
    assert fr(td, 0.0) == pytest.approx(1.0)
    assert abs(fr(td, 1e7)) == pytest.approx(10.0, rel=1e-4)
    lp = make_lowpass(50.0)
    assert fr(lp, 50.0) == pytest.approx(1 / 2j, rel=1e-12)


def test_controller_chain():
    lag = make_sosre(2 * TP, 1.0, 0.2)
    lead = make_sosre_lead(2 * TP, 1.0, 1500 * TP, 2 * TP)
    ctrl = CgLpController(lag, lead, make_pi(1.0, 15 * TP), make_tamed_derivative(100 * TP, 225 * TP))
    assert ctrl.is_reset and ctrl.kp == 1.0
    w = 150 * TP
    ref = fr(lag.base, w) * fr(lead, w) * fr(ctrl.pi, w) * fr(ctrl.tamed_derivative, w)
    assert fr(ctrl.base_linear(), w) == pytest.approx(ref, rel=1e-9)
    c3 = ctrl.with_kp(3.0)
    assert c3.kp == 3.0
    assert fr(c3.base_linear(), w) == pytest.approx(3 * ref, rel=1e-9)
    assert base_linear(lag) is lag.base
    assert not ctrl.__class__(lag.with_gamma(1.0), lead, ctrl.pi, ctrl.tamed_derivative).is_reset
