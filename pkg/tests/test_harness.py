import json
import math

import numpy as np
import pytest

from nsmc.analysis import ExtentDensity, unit_sphere_area, unit_sphere_volume
from nsmc.errors import ConfigError
from nsmc.geometry import Cube, Sphere
from nsmc.config import parse_body, parse_integrand
from nsmc.harness import (ExperimentSpec, SweepRecord, csv_text, emit_csv, format_number,
                          integral_oracle, prepare_body, run, run_integral, run_volume,
                          sidecar_path, stopping_rule, theory_table, volume_oracle)


def _record(n, samples, tol=0.1):
    return SweepRecord(dimension=n, tolerance=tol, samples=samples, trials=1, seed=0,
                       workers=1, body="sphere:1")


# -- spec ------------------------------------------------------------------------

def test_spec_defaults_and_validation():
    assert ExperimentSpec(density="uniform:0,1").trials == 100
    assert ExperimentSpec(body="cube:1").trials == 10
    assert ExperimentSpec(target="integral", density="uniform", integrand="gaussian").trials == 1000
    assert ExperimentSpec(body="cube:1", dimensions="10:30:10").dimensions == [10, 20, 30]
    for bad in ({}, {"body": "cube", "density": "uniform"}, {"body": "cube", "trials": 0},
                {"body": "cube", "tolerances": [0.1, -1]}, {"body": "cube", "stop": "never"},
                {"target": "integral", "body": "cube"}, {"body": "cube", "dimensions": "0"}):
        with pytest.raises(ConfigError):
            ExperimentSpec(**bad)


def test_spec_round_trip():
    spec = ExperimentSpec(body="ellipsoid:0.5..1.0", dimensions=[3, 4], seed=7, jitter_frac=0.1)
    assert ExperimentSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"body": "cube", "colour": "red"})


# -- oracles and stopping ----------------------------------------------------------

def test_volume_oracle_resolution():
    assert volume_oracle(Cube(4, 2.0)).value == pytest.approx(16.0)
    dens = parse_body("density:uniform:0,1", 3)
    assert volume_oracle(dens).value == pytest.approx(unit_sphere_volume(3) / 4)


def test_integral_oracle_resolution():
    _, fn = parse_integrand("gaussian", 4)
    dens = parse_body("density:uniform:0,1", 4)
    assert integral_oracle(dens, "gaussian", fn).log_value == fn(1.0).log_value
    # a constant integrand over a cube is c times its volume
    _, cfn = parse_integrand("constant:3", 2)
    assert integral_oracle(Cube(2, 2.0), "constant:3", cfn).value == pytest.approx(12.0)
    # a centred sphere of radius r: s_n times the partial integral
    ball = integral_oracle(Sphere(2, 1.0), "gaussian", fn)
    assert ball.value == pytest.approx(unit_sphere_area(2) * -math.expm1(-0.5), rel=1e-12)
    assert integral_oracle(Cube(4, 1.0), "gaussian", fn) is None


def test_missing_or_zero_oracle_is_a_config_error():
    spec = ExperimentSpec(target="integral", body="cube:1", integrand="gaussian")
    with pytest.raises(ConfigError):
        stopping_rule(spec, 0.1, None)
    zero = ExperimentSpec(target="integral", density="uniform:0,1", integrand="polynomial",
                          dimensions=[2], trials=1)
    with pytest.raises(ConfigError):
        run_integral(zero)
    with pytest.raises(ConfigError):
        run_integral(ExperimentSpec(target="integral", body="cube:1", integrand="gaussian",
                                    dimensions=[3], trials=1))
    with pytest.raises(ConfigError):
        run_volume(ExperimentSpec(body="star", dimensions=[3], trials=1))


def test_fixed_stop_needs_no_oracle():
    spec = ExperimentSpec(target="integral", body="cube:1", integrand="gaussian",
                          dimensions=[3], trials=2, stop="fixed", samples=500)
    records = run_integral(spec)
    assert records[0].samples == 500 and math.isnan(records[0].mean_relative_error)


# -- jitter and recentring ------------------------------------------------------------

def test_jitter_stays_in_ball_and_is_deterministic():
    spec = ExperimentSpec(body="cube:1", dimensions=[6], jitter_frac=0.0625, seed=3)
    base = parse_body("cube:1", 6)
    refs = [prepare_body(spec, base, 6, t).reference for t in range(20)]
    assert all(np.linalg.norm(r) <= 0.5 * 0.0625 for r in refs)
    assert len({r.tobytes() for r in refs}) == 20
    again = prepare_body(spec, base, 6, 4).reference
    assert np.array_equal(again, refs[4])


def test_recentre_after_jitter_moves_towards_centre():
    spec = ExperimentSpec(body="cube:1", dimensions=[8], jitter_frac=0.5, recentre=4, seed=1)
    base = parse_body("cube:1", 8)
    jittered = ExperimentSpec(body="cube:1", dimensions=[8], jitter_frac=0.5, seed=1)
    before = [np.linalg.norm(prepare_body(jittered, base, 8, t).reference) for t in range(10)]
    after = [np.linalg.norm(prepare_body(spec, base, 8, t).reference) for t in range(10)]
    assert np.median(after) < 0.5 * np.median(before)


# -- sweeps --------------------------------------------------------------------

def test_sphere_sweep_needs_one_sample():
    records = run_volume(ExperimentSpec(body="sphere:0.7", dimensions=[1, 5, 50, 300],
                                        tolerances=[0.1, 0.01], trials=3, consecutive=20))
    assert [r.samples for r in records] == [1.0] * 8
    assert all(r.mean_relative_error < 1e-9 for r in records)


def test_cube_with_jitter_terminates():
    spec = ExperimentSpec(body="cube:1", dimensions=[20], tolerances=[0.1], trials=10,
                          jitter_frac=0.0625, consecutive=1000, samples=2_000_000)
    (rec,) = run_volume(spec)
    assert rec.budget_exceeded == 0 and math.isfinite(rec.samples) and rec.samples >= 1
    assert rec.mean_relative_error <= 0.1


def test_gaussian_integral_sweep():
    spec = ExperimentSpec(target="integral", density="uniform:0,1", integrand="gaussian",
                          dimensions=[10], tolerances=[0.1], trials=5)
    (rec,) = run_integral(spec)
    assert rec.budget_exceeded == 0 and rec.mean_relative_error <= 0.1


def test_polynomial_integral_sweep():
    spec = ExperimentSpec(target="integral", density="uniform:0,1", integrand="polynomial",
                          dimensions=[30], tolerances=[0.2], trials=5)
    (rec,) = run_integral(spec)
    assert rec.budget_exceeded == 0 and rec.mean_relative_error <= 0.2


def test_xcoord_integral_sweep():
    spec = ExperimentSpec(target="integral", density="uniform:0,1", integrand="xcoord",
                          dimensions=[2], tolerances=[0.05], trials=5)
    (rec,) = run_integral(spec)
    assert rec.budget_exceeded == 0 and rec.mean_relative_error <= 0.05


def test_budget_exceeded_is_counted():
    spec = ExperimentSpec(density="uniform:0,1", dimensions=[40], tolerances=[0.001],
                          trials=2, consecutive=1000, samples=3000)
    (rec,) = run_volume(spec)
    assert rec.budget_exceeded == 2 and rec.trial_samples == (3000, 3000)


def test_sweep_is_deterministic_and_worker_dependent():
    kw = dict(density="beta:2,2", dimensions=[5, 10], tolerances=[0.1], trials=4,
              consecutive=200, seed=11)
    a, _ = run(ExperimentSpec(**kw, workers=2))
    b, _ = run(ExperimentSpec(**kw, workers=2))
    assert a == b
    c, _ = run(ExperimentSpec(**kw, workers=1))
    assert [r.trial_samples for r in c] != [r.trial_samples for r in a]


# -- output --------------------------------------------------------------------

def test_format_number():
    assert format_number(512.0) == "512"
    assert format_number(476.19047619047615) == "476.1904762"
    assert format_number(1.5) == "1.5"


def test_emit_csv_single_record(tmp_path):
    path = emit_csv([_record(10, 512.0)], tmp_path / "out.csv", {"seed": 0})
    assert path.read_bytes() == b"10 512\n"
    meta = json.loads(sidecar_path(path).read_text())
    assert meta["seed"] == 0 and meta["records"][0]["dimension"] == 10


def test_emit_csv_sorts():
    text = csv_text([_record(30, 3.0), _record(10, 1.0), _record(20, 2.0)])
    assert text == "10 1\n20 2\n30 3\n"


def test_emit_csv_rejects_empty_and_unwritable(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "x.csv")
    with pytest.raises(OSError):
        emit_csv([_record(1, 1.0)], tmp_path / "missing" / "x.csv")


def test_rerun_is_byte_identical(tmp_path):
    spec = dict(density="uniform:0,1", dimensions=[5, 15], trials=5, consecutive=100, seed=4)
    paths = []
    for name in ("a.csv", "b.csv"):
        records, _ = run(ExperimentSpec(**spec))
        paths.append(emit_csv(records, tmp_path / name))
    assert paths[0].read_bytes() == paths[1].read_bytes()


# -- theory --------------------------------------------------------------------

def test_theory_table_uniform():
    (row,) = theory_table("uniform:0,1", [10], 0.1)
    assert row["predicted"] == pytest.approx(100 / 21 / 0.01)
    assert row["bound"] == pytest.approx(1000) and row["bound_valid"]
    rows = theory_table(ExtentDensity.uniform(0, 1), "10:100:10", 0.1)
    assert all(r["predicted"] <= r["bound"] for r in rows)


def test_theory_table_without_bound():
    (row,) = theory_table("beta:2,2", [5], 0.2)
    assert row["bound"] is None and row["predicted"] > 0
