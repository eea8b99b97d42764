import json
import math

import numpy as np
import pytest

from dgint import experiments as ex
from dgint.experiments import ConfigError, RunConfig


def test_preset_expansion():
    cfg = RunConfig(method="RK4Proj13")
    assert (cfg.method, cfg.tableau, cfg.invariants, cfg.subset) == ("scheme_a", "rk4_classical", (1, 3), (0, 2))
    cfg = RunConfig(method="rk2")
    assert (cfg.method, cfg.tableau) == ("rk", "rk2_midpoint_explicit")
    assert RunConfig(method="RK7Proj123").tableau == "rk7"


@pytest.mark.parametrize("kw", [
    dict(h=0.0), dict(h=-0.1), dict(steps=0), dict(method="nope"), dict(tableau="rk99"),
    dict(dgrad="exact"), dict(problem="lorenz"), dict(invariants=(5,)), dict(invariants=()),
    dict(method="RK3"), dict(e=1.2),
])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw)


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# demo\nproblem = kepler\ne = 0.5  # eccentricity\nmethod = scheme_b\ninvariants = 1, 2\nh = 0.05\nsteps = 7\ncheck = yes\n")
    cfg = ex.make_config(p)
    assert (cfg.e, cfg.method, cfg.invariants, cfg.h, cfg.steps, cfg.check) == (0.5, "scheme_b", (1, 2), 0.05, 7, True)
    cfg = ex.make_config(p, h=0.1, invariants="3", e=None)
    assert (cfg.h, cfg.invariants, cfg.e) == (0.1, (3,), 0.5)


def test_config_file_errors(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("colour = blue\n")
    with pytest.raises(ConfigError):
        ex.make_config(p)
    p.write_text("h 0.1\n")
    with pytest.raises(ConfigError):
        ex.make_config(p)
    p.write_text("steps = many\n")
    with pytest.raises(ConfigError):
        ex.make_config(p)


def test_label():
    assert RunConfig(method="RK4Proj13").label() == "scheme_a/rk4_classical/13/sci"
    assert RunConfig(method="rk", tableau="rk4").label() == "rk/rk4"


def test_csv_layout_and_record_count():
    traj = ex.run(RunConfig(method="RK4Proj13", h=0.2, steps=5))
    lines = traj.to_csv().splitlines()
    assert lines[0] == "step,t,y1,y2,y3,y4,dev_H1,dev_H3,solver_iters"
    assert len(lines) == 7
    assert np.all(np.diff(traj.t) > 0)
    row0 = lines[1].split(",")
    assert row0[:6] == ["0", "0.0", "0.4", "0.0", "0.0", "2.0"]
    assert float(lines[-1].split(",")[1]) == pytest.approx(1.0)


def test_csv_is_reproducible(tmp_path):
    cfg = RunConfig(method="scheme_b", tableau="midpoint", invariants=(1, 2), h=0.1, steps=10)
    a, b = ex.run(cfg).to_csv(), ex.run(cfg).to_csv()
    assert a == b


def test_write_creates_metadata(tmp_path):
    out = tmp_path / "t.csv"
    traj = ex.run(RunConfig(method="RK4Proj1", steps=3, out=str(out)))
    traj.write(out)
    meta = json.loads((tmp_path / "t.csv.meta.json").read_text())
    assert meta["complete"] is True and meta["records"] == 4
    assert meta["config"]["invariants"] == [1]


def test_rk4proj13_drift_500_steps():
    traj = ex.run(RunConfig(method="RK4Proj13", h=0.2, steps=500))
    assert traj.complete
    assert np.all(traj.max_deviation() <= 1e-10)


def test_plain_rk4_energy_drifts():
    traj = ex.run(RunConfig(method="RK4", invariants=(1,), h=0.2, steps=500))
    dev = np.abs(np.array(traj.deviations)[:, 0])
    assert dev.max() > 1e-4
    # energy decays orbit by orbit (period 2 pi ~ 31 steps) until the orbit
    # collapses after about a dozen revolutions
    per_orbit = [dev[: k + 1].max() for k in range(31, 373, 31)]
    assert np.all(np.diff(per_orbit) > 0)


@pytest.mark.parametrize("method", ["scheme_a", "scheme_b", "standard", "local"])
def test_harmonic_projected_10_steps(method):
    traj = ex.run(RunConfig(problem="harmonic", method=method, tableau="rk2", invariants=(1,), h=0.1, steps=10))
    assert traj.complete
    assert traj.max_deviation()[0] <= 1e-12


def test_solver_failure_yields_partial_trajectory():
    cfg = RunConfig(method="RK4Proj1", steps=5, tol_solver=1e-300)
    traj = ex.run(cfg)
    assert not traj.complete
    assert len(traj.t) < 6
    assert traj.error.startswith(f"step {len(traj.t)}:")
    assert traj.metadata()["complete"] is False


def test_collision_yields_partial_trajectory(monkeypatch):
    import dgint.problems as problems

    prob = problems.kepler_problem(0.6)
    calls = {"n": 0}

    def field(y):
        calls["n"] += 1
        if calls["n"] > 12:
            raise problems.SingularityError("collision")
        return prob.field(y)

    fake = problems.OdeProblem("kepler", 4, field, prob.invariants, prob.initial_state, prob.reference_solution, prob.params)
    monkeypatch.setattr(ex, "get_problem", lambda name, e: fake)
    traj = ex.run(RunConfig(method="rk", tableau="rk4", steps=10))
    assert not traj.complete
    assert len(traj.t) == 4  # three RK4 steps use 12 evaluations
    assert "collision" in traj.error


def test_fit_slope_basic_and_floor():
    hs = [0.1, 0.05, 0.025]
    slope, ok = ex.fit_slope(hs, [3 * h**3 for h in hs])
    assert ok and slope == pytest.approx(3.0)
    slope, ok = ex.fit_slope(hs, [1e-15, 1e-16, 0.0])
    assert not ok and math.isnan(slope)
    # points at the floor are ignored, not fitted
    slope, ok = ex.fit_slope([0.1, 0.05, 0.025], [1e-4, 1.25e-5, 1e-13])
    assert ok and slope == pytest.approx(3.0)


def test_order_study_table():
    st = ex.order_study(RunConfig(method="RK4Proj123"), (0.1, 0.05, 0.025))
    text = st.to_csv().splitlines()
    assert text[0] == "h,error"
    assert len(text) == 5 and text[-1].startswith("slope=")
    assert abs(st.slope - 4) <= 0.3
    unfitted = ex.OrderStudy([0.1, 0.05, 0.025], [0.0, 0.0, 0.0], math.nan, False, 1.0)
    assert unfitted.to_csv().splitlines()[-1] == "slope=nan"


def test_order_study_validation():
    with pytest.raises(ConfigError):
        ex.order_study(RunConfig(method="RK4Proj1"), (0.1, 0.05))
    with pytest.raises(ConfigError):
        ex.global_error(RunConfig(method="RK4Proj1"), 0.3)


def test_order_study_parallel_matches_serial():
    cfg = RunConfig(method="RK2Proj12")
    hs = (0.1, 0.05, 0.025)
    a = ex.order_study(cfg, hs)
    b = ex.order_study(cfg, hs, jobs=2)
    assert a.error == b.error


def test_compare_report_e06():
    common = dict(tableau="midpoint", invariants=(1, 2), h=0.1, steps=200)
    rep = ex.compare_standard(RunConfig(method="scheme_a", **common), RunConfig(method="standard", **common))
    assert [r["slot"] for r in rep["rows"]] == ["discrete", "standard"]
    for r in rep["rows"]:
        assert r["complete"] and r["solver_iters"] > 0
        assert max(r["max_dev"].values()) <= 1e-10
        assert r["final_error"] > 0
    assert rep["flags"] == []
    csv = ex.comparison_csv(rep).splitlines()
    assert csv[0].startswith("slot,method,tableau,h,steps,complete,final_error,max_dev_H1,max_dev_H2")
    assert len(csv) == 3


def test_compare_flags_identical_variants():
    cfg = RunConfig(method="scheme_a", tableau="midpoint", invariants=(1, 2), h=0.1, steps=5)
    rep = ex.compare_standard(cfg, cfg)
    assert any("both slots" in f for f in rep["flags"])
    a, b = rep["rows"]
    assert a["final_error"] == b["final_error"]


def test_compare_requires_same_problem():
    with pytest.raises(ConfigError):
        ex.compare_standard(RunConfig(invariants=(1,)), RunConfig(invariants=(1, 2)))


def test_compare_high_eccentricity_completes():
    common = dict(tableau="midpoint", invariants=(1, 2), h=0.05, steps=2000, e=0.7)
    rep = ex.compare_standard(RunConfig(method="scheme_a", **common), RunConfig(method="standard", **common))
    assert all(r["complete"] for r in rep["rows"])
