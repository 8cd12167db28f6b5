import numpy as np
import pytest

from dcw.bifurcation import (
    BetaStarResult,
    ClassLabel,
    CycleStability,
    beta_star,
    beta_star_to_csv,
    classify,
    far_initial_state,
    find_stable_cycle,
    find_unstable_cycle,
    phase_rows_to_csv,
    stable_cycle_from,
)
from dcw.model import H_TRICRITICAL, LienardState, ModelParams, beta_c

# Regression values for the cycle at beta=2, h=0, produced at integration
# tolerances 1e-10/1e-12 and stable across platforms to well below 1e-8.
CYCLE_2_0_AMP = 1.220353724687453
CYCLE_2_0_PERIOD = 4.535904554913288
CYCLE_2_0_Y = 1.7684670506013507


def test_stable_cycle_beta2():
    info = find_stable_cycle(ModelParams(beta=2.0, h=0.0))
    assert info is not None
    assert info.stability is CycleStability.Stable
    assert info.amplitude == pytest.approx(CYCLE_2_0_AMP, abs=1e-8)
    assert info.period == pytest.approx(CYCLE_2_0_PERIOD, abs=1e-8)
    assert info.section_point == pytest.approx(CYCLE_2_0_Y, abs=1e-8)
    assert abs(info.return_derivative) < 1.0


def test_no_cycle_below_onset():
    assert find_stable_cycle(ModelParams(beta=1.0, h=0.0)) is None
    assert find_stable_cycle(ModelParams(beta=1.2, h=0.3)) is None


def test_stable_cycle_from_inside():
    # starting inside the cycle (origin unstable) reaches the same orbit
    info = stable_cycle_from(ModelParams(beta=2.0, h=0.0),
                             LienardState(0.05, 0.0))
    assert info is not None
    assert info.section_point == pytest.approx(CYCLE_2_0_Y, abs=1e-7)


def test_coexistence_pair():
    p = ModelParams(beta=3.3, h=1.0)
    stable = find_stable_cycle(p)
    unstable = find_unstable_cycle(p)
    assert stable is not None and unstable is not None
    assert stable.stability is CycleStability.Stable
    assert unstable.stability is CycleStability.Unstable
    assert 0.0 < unstable.amplitude < stable.amplitude
    assert 0.0 < unstable.section_point < stable.section_point
    assert abs(unstable.return_derivative) > 1.0
    # both orbits share the rotation time scale
    assert stable.period == pytest.approx(unstable.period, rel=0.05)


def test_unstable_search_rejects_unstable_origin():
    with pytest.raises(ValueError):
        find_unstable_cycle(ModelParams(beta=4.0, h=1.0))


def test_unstable_search_escapes_without_cycle():
    # linearly stable origin, no coexistence: reversed flow escapes
    assert find_unstable_cycle(ModelParams(beta=1.4, h=0.0)) is None


def test_far_initial_state_outside_cycle():
    p = ModelParams(beta=2.0, h=0.0)
    s = far_initial_state(p)
    assert s.lam == pytest.approx(2.0 * p.beta / 3.0 + 1.0)


def test_beta_star_result_properties():
    r = BetaStarResult(h=1.0, lo=3.1, hi=3.2, indeterminate=False)
    assert r.value == pytest.approx(3.15)
    assert r.width == pytest.approx(0.1)


def test_beta_star_validation():
    with pytest.raises(ValueError):
        beta_star(0.3)
    with pytest.raises(ValueError):
        beta_star(1.0, tol=1e-9)


def test_classify_labels():
    assert classify(ModelParams(beta=2.0, h=0.0)).label is ClassLabel.LC
    assert classify(ModelParams(beta=1.0, h=0.3)).label is ClassLabel.FP
    pc = classify(ModelParams(beta=3.3, h=1.0))
    assert pc.label is ClassLabel.CoexistFPLC
    assert len(pc.cycles) == 2
    near = classify(ModelParams(beta=beta_c(0.0), h=0.0))
    assert near.label is ClassLabel.Indeterminate


def test_no_phantom_cycle_below_critical():
    # just below beta_c the slow spiral into the origin must not be polished
    # into a zero-amplitude "cycle" (the origin satisfies any absolute
    # fixed-point residual)
    from dcw.odeflow import IntegratorConfig
    cfg = IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10)
    for beta, h in ((1.4606741573033708, 0.05), (1.6123595505617978, 0.3)):
        pc = classify(ModelParams(beta=beta, h=h), cfg, boundary_tol=1e-2)
        assert pc.label is ClassLabel.FP


def test_phase_rows_csv_round_trip(tmp_path):
    rows = [{"h": 0.0, "beta": 2.0, "class": "LC", "beta_c": 1.5,
             "beta_star": None, "amp_stable": 1.22, "amp_unstable": float("nan"),
             "period_stable": 4.54}]
    path = tmp_path / "phase.csv"
    phase_rows_to_csv(rows, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0].startswith("h,beta,class")
    assert lines[1].split(",")[2] == "LC"

    stars = [BetaStarResult(h=1.0, lo=3.10, hi=3.11, indeterminate=False)]
    spath = tmp_path / "stars.csv"
    beta_star_to_csv(stars, spath)
    slines = spath.read_text().strip().split("\n")
    assert slines[0] == "h,beta_star_lo,beta_star_hi"
    assert slines[1] == "1,3.1,3.11"
