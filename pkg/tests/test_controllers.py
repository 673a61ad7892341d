import math

import numpy as np
import pytest

from lvadbench.controllers import (MfacConfig, MfacController, MfacState,
                                   PidConfig, PidController, PidState,
                                   mfac_control, mfac_estimate_ppd, mfac_init,
                                   pid_control)


def oracle_estimate(phi, du, dy, eta, mu, phi1, eps):
    """Scalar transcription of the projection update and reset rule,
    kept deliberately independent of the implementation."""
    phi_new = phi + eta * du * (dy - phi * du) / (mu + du * du)
    if abs(phi_new) <= eps or abs(du) <= eps or (phi_new > 0) != (phi1 > 0):
        phi_new = phi1
    return phi_new


def oracle_control(u_prev, phi, y, y_star, rho, lam, lo, hi):
    u = u_prev + rho * phi * (y_star - y) / (lam + phi * phi)
    return lo if u < lo else hi if u > hi else u


def test_estimate_examples():
    cfg = MfacConfig()
    state = mfac_init(cfg, 2400.0, 8.0)
    # no excitation: reset back to the initial estimate
    state.phi_hat = 0.5
    assert mfac_estimate_ppd(state, 0.0, 1.0, cfg) == cfg.phi1
    # hand evaluation of the projection step
    state.phi_hat = 0.001
    got = mfac_estimate_ppd(state, 10.0, 0.05, cfg)
    assert got == pytest.approx(0.001 + 10.0 * (0.05 - 0.01) / 100.1, rel=1e-12)
    assert got == pytest.approx(0.004996, abs=1e-6)
    # an update that flips the sign snaps back to phi1
    state.phi_hat = 0.001
    assert mfac_estimate_ppd(state, 1.0, -5.0, cfg) == cfg.phi1


def test_control_examples():
    cfg = MfacConfig()
    state = mfac_init(cfg, 2400.0, 8.0)
    state.phi_hat = 0.5
    assert mfac_control(state, 8.0, 8.0, cfg) == 2400.0
    state = mfac_init(cfg, 2400.0, 8.0)
    state.phi_hat = 0.5
    got = mfac_control(state, 8.0, 8.2, cfg)
    assert got == pytest.approx(2400.0 + 0.1 / 0.35, rel=1e-12)
    assert got == pytest.approx(2400.286, abs=1e-3)
    state = mfac_init(cfg, 2990.0, 8.0)
    state.phi_hat = 0.5
    assert mfac_control(state, 0.0, 100.0, cfg) == 3000.0


def test_control_commits_saturated_command():
    cfg = MfacConfig()
    state = mfac_init(cfg, 2990.0, 8.0)
    state.phi_hat = 0.5
    mfac_control(state, 0.0, 100.0, cfg)
    assert state.u_prev == 3000.0
    assert state.u_prev2 == 2990.0


def test_equations_match_oracle_fuzz(rng):
    cfg = MfacConfig()
    state = mfac_init(cfg, 2400.0, 0.0)
    phi_ref = cfg.phi1
    u_ref = 2400.0
    for _ in range(10_000):
        du = rng.uniform(-20.0, 20.0)
        dy = rng.uniform(-2.0, 2.0)
        y = rng.uniform(-20.0, 20.0)
        y_star = rng.uniform(-20.0, 20.0)
        phi_ref = oracle_estimate(phi_ref, du, dy, cfg.eta, cfg.mu,
                                  cfg.phi1, cfg.epsilon)
        got_phi = mfac_estimate_ppd(state, du, dy, cfg)
        assert abs(got_phi - phi_ref) <= 1e-12
        state.u_prev = u_ref  # drive both along the same trajectory
        u_ref = oracle_control(u_ref, phi_ref, y, y_star, cfg.rho, cfg.lam,
                               cfg.u_min, cfg.u_max)
        got_u = mfac_control(state, y, y_star, cfg)
        assert abs(got_u - u_ref) <= 1e-12


def test_regulation_on_surrogate_plant():
    # first-order surrogate: the output moves by b per unit command change
    for b in (0.001, 0.01, 0.1):
        cfg = MfacConfig(lam=1e-4)
        ctrl = MfacController(cfg)
        ctrl.reset(u0=2400.0, y0=0.0)
        y, y_star = 0.0, 0.1
        u_prev = 2400.0
        errors = [abs(y_star - y)]
        for _ in range(10_000):
            u = ctrl.step(y, y_star)
            y = y + b * (u - u_prev)
            u_prev = u
            errors.append(abs(y_star - y))
            if errors[-1] < 1e-6:
                break
        assert errors[-1] < 1e-6, f"b={b} stalled at {errors[-1]}"
        assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errors[1:], errors[2:]))


def test_boundedness_under_fuzzed_setpoints(rng):
    ctrl = MfacController(MfacConfig())
    ctrl.reset(u0=2400.0, y0=5.0)
    for _ in range(5000):
        u = ctrl.step(rng.uniform(-50, 50), rng.uniform(-50, 50))
        assert 1800.0 <= u <= 3000.0
        assert math.isfinite(ctrl.state.phi_hat)


def test_mfac_config_validation():
    with pytest.raises(ValueError):
        MfacConfig(mu=0.0).validate()
    with pytest.raises(ValueError):
        MfacConfig(eta=1.5).validate()
    with pytest.raises(ValueError):
        MfacConfig(lam=0.0).validate()
    with pytest.raises(ValueError):
        MfacConfig(phi1=0.0).validate()


def test_pid_zero_error_holds_bias():
    ctrl = PidController(PidConfig())
    for _ in range(100):
        assert ctrl.step(0.0, 0.005) == 2400.0
    assert ctrl.state.integral == 0.0


def test_pid_proportional_contribution():
    cfg = PidConfig(ki=0.0, kd=0.0)
    state = PidState()
    u = pid_control(state, 1.0, 0.005, cfg)
    assert u == pytest.approx(2400.0 + 133.09)


def test_pid_first_tick_suppresses_derivative_kick():
    cfg = PidConfig(ki=0.0)
    state = PidState()
    u = pid_control(state, 1.0, 0.005, cfg)
    assert u == pytest.approx(2400.0 + 133.09)  # no kd term on tick one


def test_pid_antiwindup_freezes_integrator():
    cfg = PidConfig()
    state = PidState()
    pid_control(state, 10.0, 0.005, cfg)  # output saturates high
    frozen = state.integral
    for _ in range(50):
        u = pid_control(state, 10.0, 0.005, cfg)
        assert u == cfg.u_max
    assert state.integral == frozen


def test_pid_integrator_resumes_inside_band():
    cfg = PidConfig()
    state = PidState()
    pid_control(state, 0.5, 0.005, cfg)
    first = state.integral
    pid_control(state, 0.5, 0.005, cfg)
    assert state.integral == pytest.approx(first + 0.5 * 0.005)


def test_pid_linearity_of_p_and_d_terms():
    cfg = PidConfig(ki=0.0)
    dt = 0.005

    def response(scale):
        state = PidState()
        pid_control(state, 0.0, dt, cfg)          # initialize at zero error
        return pid_control(state, scale, dt, cfg) - cfg.bias

    small = response(0.1)    # kp*e + kd*e/dt, well inside the clamp band
    double = response(0.2)
    assert double == pytest.approx(2.0 * small, rel=1e-12)


def test_pid_rejects_bad_dt():
    with pytest.raises(ValueError):
        pid_control(PidState(), 1.0, 0.0, PidConfig())
