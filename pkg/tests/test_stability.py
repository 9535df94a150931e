import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from resetlab.config import TABLE1, plant
from resetlab.elements import CgLpController, ResetSystem, make_fore, make_pi, make_sosre
from resetlab.lti import StateSpaceSystem, is_hurwitz
from resetlab.repro import resolve_controller
from resetlab.stability import (AlgebraicLoopError, ClosedLoopResetSystem, HbetaCertificate,
                                build_closed_loop, hbeta_spr_margin, lemma1_check,
                                lemma1_gamma_boundary, search_hbeta, verify_hbeta)

TP = 2 * math.pi
G = plant()


def toy(A, gamma=0.0):
    """Two-state loop: one 'plant' state measured by C_p = [1], one reset state."""
    A = np.asarray(A, dtype=float)
    z = np.zeros((1, 2))
    return ClosedLoopResetSystem(A, np.zeros((2, 1)), z, 0.0, z, 0.0, z, 0.0,
                                 np.array([1.0, gamma]), np.array([[1.0]]), 1, 0, 1)


def grid_oracle(A):
    """Feasibility of P = [[p, b], [b, 1]] with P > 0, A'P + PA < 0 over a
    grid of b in [-10, 10] and p."""
    for b in np.linspace(-10, 10, 201):
        for p in np.logspace(-3, 4, 300):
            P = np.array([[p, b], [b, 1.0]])
            if np.linalg.eigvalsh(P).min() > 0 and np.linalg.eigvalsh(A.T @ P + P @ A).max() < 0:
                return True
    return False


@pytest.mark.parametrize("name,n_r", [("SOSRE-1", 1), ("FOSRE-1", 1), ("PID", 0)])
def test_closed_loop_dimensions(name, n_r):
    _, ctrl = resolve_controller(TABLE1[name])
    cl = build_closed_loop(G, ctrl)
    assert cl.n_r == n_r
    assert cl.n_p == 2
    assert cl.n_states == cl.n_p + cl.n_nr + cl.n_r == 2 + ctrl.base_linear().n_states
    assert is_hurwitz(cl.A_cl)
    if n_r:
        assert cl.reset_diag[-1] == pytest.approx(0.2)
        assert cl.state_labels[-1] == "reset"
        assert np.all(cl.reset_diag[:-1] == 1.0)


def test_algebraic_loop():
    direct = StateSpaceSystem([[-1.0]], [[1.0]], [[1.0]], [[2.0]])
    ctrl = CgLpController(None, direct, make_pi(1.0, 1.0), direct)
    with pytest.raises(AlgebraicLoopError):
        build_closed_loop(direct, ctrl)


def test_lemma1_scalar_examples():
    r = lemma1_check(make_fore(TP * 2, 1.0, 10.0, 0.2)[0])
    assert r.holds and r.margin == pytest.approx(0.8, abs=1e-12) and r.worst_delta == 0.0
    for g in (1.0, -1.0):
        r = lemma1_check(make_fore(TP * 2, 1.0, 10.0, g)[0])
        assert r.holds and r.marginal
    assert not lemma1_check(([[-3.0]], [[1.2]])).holds


def test_lemma1_identity_reset_marginal():
    r = lemma1_check(make_sosre(5.0, 0.5, 1.0))
    assert r.holds and r.marginal and r.margin > 0


@pytest.mark.parametrize("name", ["SOSRE-1", "SOSRE-2", "FOSRE-1", "FOSRE-2"])
def test_lemma1_table_lags(name):
    _, ctrl = resolve_controller(TABLE1[name])
    r = lemma1_check(ctrl.lag)
    assert r.holds and r.margin > 0


def test_lemma1_margin_decreases_with_gamma():
    margins = [lemma1_check(([[-3.0]], [[g]])).margin for g in (0.0, 0.3, 0.6, 0.9, 0.99)]
    assert all(b < a for a, b in zip(margins, margins[1:]))


def test_lemma1_boundary_scalar_fore():
    b = lemma1_gamma_boundary(lambda g: ([[-TP * 2]], [[g]]), 0.0, 2.0)
    assert abs(b - 1.0) <= 1e-6


@settings(max_examples=15)
@given(st.floats(0.2, 5.0), st.floats(-3.0, 3.0), st.floats(-1.0, 1.0))
def test_lemma1_similarity_invariant(scale, shear, g):
    rs = make_sosre(4.0, 0.6, g)
    # block-diagonal transform preserving the reset partition: states are
    # [non-reset, reset], so a diagonal scaling keeps A_rho
    T = np.diag([scale, 1.0 + abs(shear)])
    A2 = np.linalg.solve(T, rs.base.A @ T)
    a = lemma1_check(rs, grid_points=200)
    b = lemma1_check((A2, rs.A_rho), grid_points=200)
    assert a.holds == b.holds
    assert a.margin == pytest.approx(b.margin, abs=1e-9)


def test_verify_rejects_asymmetric():
    cl = toy([[-1.0, 0.0], [0.0, -2.0]])
    P = np.array([[5.0, 0.3], [0.0, 1.0]])
    rep = verify_hbeta(cl, HbetaCertificate(np.array([0.0]), P, np.array([[1.0]])))
    assert not rep.ok
    assert any(v.startswith("(i)") for v in rep.violations)


def test_verify_condition_iii_and_iv():
    cl = toy([[-1.0, 0.0], [0.0, -2.0]])
    good = HbetaCertificate(np.array([0.5]), np.array([[3.0, 0.5], [0.5, 1.0]]), np.array([[1.0]]))
    assert verify_hbeta(cl, good).ok
    bad = HbetaCertificate(np.array([0.4]), good.P, good.P_rho)
    assert "(iii) B0' P != C0" in verify_hbeta(cl, bad).violations
    cl_bad = toy([[-1.0, 0.0], [0.0, -2.0]], gamma=1.0)
    object.__setattr__(cl_bad, "reset_diag", np.array([1.0, 1.5]))
    assert any(v.startswith("(iv)") for v in verify_hbeta(cl_bad, good).violations)
    with pytest.raises(ValueError):
        verify_hbeta(cl, HbetaCertificate(np.array([0.5]), np.eye(3), np.array([[1.0]])))


def test_pid_reduces_to_lyapunov():
    _, ctrl = resolve_controller(TABLE1["PID"])
    cl = build_closed_loop(G, ctrl)
    cert = search_hbeta(cl)
    assert cert is not None and verify_hbeta(cl, cert).ok
    # any Lyapunov solution of a stable loop passes (i) and (ii)
    A = np.array([[-1.0, 3.0], [0.0, -2.0]])
    z = np.zeros((1, 2))
    cl2 = ClosedLoopResetSystem(A, np.zeros((2, 1)), z, 0.0, z, 0.0, z, 0.0,
                                np.ones(2), np.array([[1.0, 0.0]]), 2, 0, 0)
    P = scipy.linalg.solve_continuous_lyapunov(A.T, -np.eye(2))
    assert verify_hbeta(cl2, HbetaCertificate(np.zeros(0), P, np.zeros((0, 0)))).ok


@pytest.mark.parametrize("A", [[[-1.0, 0.0], [0.0, -2.0]], [[-1.0, 0.5], [-3.0, -2.0]]])
def test_toy_search_agrees_with_grid_oracle(A):
    A = np.array(A)
    assert grid_oracle(A)
    cl = toy(A)
    cert = search_hbeta(cl, seed=3)
    assert cert is not None
    assert verify_hbeta(cl, cert).ok
    assert cert.P_rho[0, 0] > 0


def test_unstable_loop_not_found():
    assert search_hbeta(toy([[1.0, 0.0], [0.0, -2.0]])) is None


def test_gamma_one_keeps_reset_partition_and_toy_certificate():
    _, ctrl = resolve_controller(TABLE1["SOSRE-1"])
    lin = CgLpController(ctrl.lag.with_gamma(1.0), ctrl.lead, ctrl.pi, ctrl.tamed_derivative)
    cl = build_closed_loop(G, lin)
    assert cl.n_r == 1 and cl.reset_diag[-1] == 1.0
    cl1 = toy([[-1.0, 0.5], [-3.0, -2.0]], gamma=1.0)
    cert = search_hbeta(cl1)
    assert cert is not None and verify_hbeta(cl1, cert).ok


def test_certificate_does_not_depend_on_gamma():
    # for |gamma| <= 1 gamma only enters condition (iv), which then holds
    cl = toy([[-1.0, 0.5], [-3.0, -2.0]])
    cert = search_hbeta(cl)
    for g in (-1.0, 0.0, 0.2, 1.0):
        clg = toy([[-1.0, 0.5], [-3.0, -2.0]], gamma=g)
        assert verify_hbeta(clg, cert).ok
    _, ctrl = resolve_controller(TABLE1["SOSRE-1"])
    found = []
    for g in (0.2, 1.0):
        c = CgLpController(ctrl.lag.with_gamma(g), ctrl.lead, ctrl.pi, ctrl.tamed_derivative)
        found.append(search_hbeta(build_closed_loop(G, c)) is not None)
    assert found[0] == found[1]


@pytest.mark.parametrize("name", ["SOSRE-1", "FOSRE-1"])
def test_round_trip_and_spr_consistency(name):
    _, ctrl = resolve_controller(TABLE1[name])
    cl = build_closed_loop(G, ctrl)
    cert = search_hbeta(cl)
    if cert is not None:
        assert verify_hbeta(cl, cert).ok
    # a certificate needs H_beta strictly positive real for its beta
    best = max(hbeta_spr_margin(cl, b) for b in
               np.concatenate([-np.logspace(-8, 2, 21), [0.0], np.logspace(-8, 2, 21)]))
    if best < 0:
        assert cert is None


def test_spr_margin_toy():
    cl = toy([[-1.0, 0.0], [0.0, -2.0]])
    # H(s) = 1/(s + 2) for beta = 0: positive real
    assert hbeta_spr_margin(cl, 0.0) > 0
