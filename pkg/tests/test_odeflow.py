import numpy as np
import pytest

from dcw.model import (
    LienardState,
    ModelParams,
    OrderState,
    PlanarState,
    planar_to_lienard,
)
from dcw.odeflow import (
    Direction,
    FlowResult,
    IntegratorConfig,
    SectionStatus,
    SystemKind,
    integrate,
    lienard_zero_coupling_solution,
    lyapunov_U_monitor,
    period_estimate,
    poincare_crossings,
)

# Reference states computed with an independent high-precision integrator.
FULL3D_T1 = (-0.33931965471924195, 0.16733096571052079, -0.76323658784818537)
PLANAR_T1 = (-0.29302495387125488, -0.90631039324199438)
ZC_T07 = (0.39862479339640624, 0.10067361112156053)

# Detected cycle at beta=2, h=0 (regression values, period also crosschecked
# by the section-return tests below).
CYCLE_2_0_PERIOD = 4.535904554913288


def test_full3d_against_reference():
    res = integrate(SystemKind.Full3D, ModelParams(beta=1.0, h=0.3),
                    OrderState(1.0, 0.0, 0.0), 1.0, record_dt=0.5)
    assert np.allclose(res.states[-1], FULL3D_T1, atol=1e-9, rtol=0.0)


def test_planar_against_reference():
    res = integrate(SystemKind.Planar, ModelParams(beta=2.0, h=0.5),
                    PlanarState(0.5, 0.3), 1.0, record_dt=0.25)
    assert np.allclose(res.states[-1], PLANAR_T1, atol=1e-9, rtol=0.0)


def test_planar_matches_3d_projection():
    p = ModelParams(beta=1.3, h=0.6)
    r3 = integrate(SystemKind.Full3D, p, OrderState(0.4, 0.2, -0.1), 5.0,
                   record_dt=0.05)
    r2 = integrate(SystemKind.Planar, p, PlanarState(0.4, -0.1), 5.0,
                   record_dt=0.05)
    assert np.max(np.abs(r3.states[:, [0, 2]] - r2.states)) < 1e-8


def test_lienard_matches_planar():
    p = ModelParams(beta=2.0, h=0.5)
    s0 = PlanarState(0.5, 0.3)
    rp = integrate(SystemKind.Planar, p, s0, 20.0, record_dt=0.05)
    rl = integrate(SystemKind.Lienard, p, planar_to_lienard(s0, p), 20.0,
                   record_dt=0.05)
    mapped = np.column_stack([
        (rl.states[:, 1] - 0.5 * rl.states[:, 0]) / p.beta,
        rl.states[:, 1],
    ])
    assert np.max(np.abs(mapped - rp.states)) < 1e-8


def test_zero_coupling_closed_form():
    p = ModelParams(beta=0.0, h=0.9)
    init = LienardState(0.4, -0.2)
    res = integrate(SystemKind.Lienard, p, init, 10.0, record_dt=0.01)
    exact = lienard_zero_coupling_solution(init, res.times)
    assert np.max(np.abs(res.states - exact)) < 1e-8
    pt = lienard_zero_coupling_solution(init, np.array([0.7]))[0]
    assert np.allclose(pt, ZC_T07, atol=1e-12, rtol=0.0)


def test_backward_direction_inverts_flow():
    p = ModelParams(beta=2.0, h=0.3)
    fwd = integrate(SystemKind.Planar, p, PlanarState(0.2, 0.1), 3.0,
                    record_dt=0.5)
    back = integrate(SystemKind.Planar, p, fwd.states[-1], 3.0,
                     IntegratorConfig(direction=Direction.Backward),
                     record_dt=0.5)
    assert np.allclose(back.states[-1], (0.2, 0.1), atol=1e-7)


def test_integrate_validation():
    p = ModelParams(beta=1.0, h=0.0)
    with pytest.raises(ValueError):
        integrate(SystemKind.Planar, p, PlanarState(0.0, 0.1), -1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0.5)


def test_poincare_crossings_on_cycle():
    p = ModelParams(beta=2.0, h=0.0)
    events, status = poincare_crossings(p, LienardState(0.1, 0.0), 40)
    assert status is SectionStatus.OK
    assert len(events) == 40
    ys = [ev.state.y for ev in events]
    # iterates settle on the section fixed point of the stable cycle
    assert abs(ys[-1] - ys[-2]) < 1e-9
    for ev in events:
        assert abs(ev.state.lam) < 1e-10
        assert ev.state.y > 0
    assert period_estimate(events) == pytest.approx(CYCLE_2_0_PERIOD, abs=1e-8)


def test_poincare_converging_spiral():
    p = ModelParams(beta=1.0, h=0.0)
    events, status = poincare_crossings(p, LienardState(0.5, 0.0), 500,
                                        t_chunk=50.0, t_max=2000.0)
    assert status is SectionStatus.Converged
    ys = [ev.state.y for ev in events]
    assert ys[-1] < ys[0]


def test_poincare_rejects_origin():
    with pytest.raises(ValueError):
        poincare_crossings(ModelParams(beta=2.0, h=0.0),
                           LienardState(0.0, 0.0), 5)


def test_period_estimate_needs_enough_crossings():
    p = ModelParams(beta=2.0, h=0.0)
    events, _ = poincare_crossings(p, LienardState(0.1, 0.0), 5)
    with pytest.raises(ValueError):
        period_estimate(events)


def test_lyapunov_monitor_no_flags_on_funnel():
    p = ModelParams(beta=2.0, h=0.0)
    res = integrate(SystemKind.Lienard, p,
                    LienardState(0.0, 2.0 * p.beta / 3.0 + 1.0), 30.0,
                    record_dt=0.01)
    rows, flags = lyapunov_U_monitor(res, p)
    assert len(rows) == len(res.times)
    assert not np.any(flags)
    with pytest.raises(ValueError):
        lyapunov_U_monitor(
            integrate(SystemKind.Planar, p, PlanarState(0.1, 0.0), 1.0), p)


def test_flow_result_to_csv(tmp_path):
    p = ModelParams(beta=1.0, h=0.2)
    res = integrate(SystemKind.Lienard, p, LienardState(0.3, 0.1), 1.0,
                    record_dt=0.5)
    path = tmp_path / "flow.csv"
    res.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,y,lambda"
    assert len(lines) == 4
