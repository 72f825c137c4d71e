import hashlib
import json
import math

import numpy as np
import pytest
import yaml

from rampmerge.cli import (
    ConfigError,
    EXIT_COLLISION,
    EXIT_CONFIG,
    EXIT_OK,
    RunManifest,
    config_digest,
    convert_quantity,
    dump_config,
    export_trajectories,
    load_config,
    load_trajectories,
    main,
    report_metrics,
    resolved_parameters,
)
from rampmerge.simulation import (
    CollisionError,
    GroupMetrics,
    RunMetrics,
    TrajectoryLog,
    compute_metrics,
    run_scenario,
    scenario_1,
    scenario_2,
)

CONFIG_DIR = __file__.rsplit("/", 2)[0] + "/configs"


def write_config(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


MINIMAL = """
demand:
  - {duration: 60 s, mainline: 900 veh/h, ramp: 300 veh/h, suggested: 300 veh/h}
"""


class TestUnits:
    def test_si_passthrough(self):
        assert convert_quantity(32.99, "speed") == 32.99
        assert convert_quantity(4, "plain") == 4.0

    def test_bare_number_string(self):
        assert convert_quantity("2.5", "accel") == 2.5

    def test_mph(self):
        assert abs(convert_quantity("73.8 mph", "speed") - 32.991552) < 1e-9

    def test_feet_per_second_squared(self):
        assert abs(convert_quantity("8.2 ft/s2", "accel") - 2.49936) < 1e-9

    def test_unicode_minus(self):
        assert abs(convert_quantity("−9.8 ft/s2", "accel") + 2.98704) < 1e-9

    def test_flow_rates(self):
        assert abs(convert_quantity("1600 veh/h", "rate") - 1600 / 3600) < 1e-12
        assert abs(convert_quantity("1600 pcu/hr/ln", "rate") - 1600 / 3600) < 1e-12

    def test_time_units(self):
        assert convert_quantity("2 min", "time") == 120.0

    def test_unknown_unit_lists_known(self):
        with pytest.raises(ValueError, match="unknown speed unit"):
            convert_quantity("30 furlongs", "speed")

    def test_dimensionless_rejects_suffix(self):
        with pytest.raises(ValueError, match="dimensionless"):
            convert_quantity("4 m", "plain")

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            convert_quantity("fast", "speed")
        with pytest.raises(ValueError):
            convert_quantity(True, "speed")
        with pytest.raises(ValueError):
            convert_quantity([30], "speed")


class TestLoadConfig:
    def test_shipped_configs_match_builders(self):
        for path, builder in (
            (CONFIG_DIR + "/scenario1.yaml", scenario_1),
            (CONFIG_DIR + "/scenario2.yaml", scenario_2),
        ):
            assert resolved_parameters(load_config(path)) == resolved_parameters(builder())

    def test_minimal_config_uses_defaults(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        assert cfg.limits.v_max == 34.65
        assert cfg.mainline_idm.a == 1.4
        assert cfg.ramp_idm.b == 2.8
        assert cfg.scoring.control_weight == 100.0
        assert cfg.name == "cfg"

    def test_mode_and_seed_overrides(self, tmp_path):
        path = write_config(tmp_path, "mode: none\nseed: 5\n" + MINIMAL)
        cfg = load_config(path)
        assert cfg.mode.value == "none" and cfg.seed == 5
        cfg = load_config(path, mode="metering", seed=11)
        assert cfg.mode.value == "metering" and cfg.seed == 11

    def test_unknown_field_is_named(self, tmp_path):
        path = write_config(tmp_path, "scoring: {contrl_weight: 3}\n" + MINIMAL)
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert any(p == "scoring.contrl_weight" for p, _ in err.value.issues)

    def test_positive_acc_min_is_named(self, tmp_path):
        path = write_config(tmp_path, "limits: {acc_min: 1.0}\n" + MINIMAL)
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert "acc_min" in str(err.value)

    def test_all_issues_collected(self, tmp_path):
        path = write_config(
            tmp_path,
            "mode: warp\nlimits: {v_max: fast}\nbogus: 1\n" + MINIMAL,
        )
        with pytest.raises(ConfigError) as err:
            load_config(path)
        paths = [p for p, _ in err.value.issues]
        assert "mode" in paths and "limits.v_max" in paths and "bogus" in paths

    def test_missing_demand_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="demand"):
            load_config(write_config(tmp_path, "seed: 1\n"))

    def test_missing_phase_field_rejected(self, tmp_path):
        text = "demand:\n  - {duration: 60 s, mainline: 900 veh/h}\n"
        with pytest.raises(ConfigError, match="missing fields"):
            load_config(write_config(tmp_path, text))

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config("/nonexistent/path.yaml")

    def test_round_trip_identity(self, tmp_path):
        cfg = load_config(CONFIG_DIR + "/scenario1.yaml")
        path = write_config(tmp_path, dump_config(cfg), "dumped.yaml")
        again = load_config(path)
        assert resolved_parameters(again) == resolved_parameters(cfg)


class TestDigest:
    def test_stable_under_key_reordering(self, tmp_path):
        a = write_config(
            tmp_path,
            "limits: {v_max: 33.0, acc_max: 2.0}\nseed: 1\n" + MINIMAL,
            "a.yaml",
        )
        b = write_config(
            tmp_path,
            MINIMAL + "\nseed: 1\nlimits: {acc_max: 2.0, v_max: 33.0}\n",
            "b.yaml",
        )
        assert config_digest(load_config(a)) == config_digest(load_config(b))

    def test_sensitive_to_parameters(self, tmp_path):
        base = load_config(write_config(tmp_path, MINIMAL, "base.yaml"))
        other = load_config(
            write_config(tmp_path, "limits: {v_max: 30}\n" + MINIMAL, "other.yaml"))
        assert config_digest(base) != config_digest(other)

    def test_mode_seed_name_not_in_digest(self, tmp_path):
        a = load_config(
            write_config(tmp_path, "mode: none\nseed: 9\nname: x\n" + MINIMAL, "a.yaml"))
        b = load_config(
            write_config(tmp_path, "mode: optimal\nseed: 2\nname: y\n" + MINIMAL, "b.yaml"))
        assert config_digest(a) == config_digest(b)


def tiny_log():
    log = TrajectoryLog()
    # two vehicles, three steps, deliberately appended with ids unsorted
    for k in range(3):
        t = k * 0.1
        log.append_step(
            t,
            ids=[7, 3],
            lanes=[0, 1],
            pos=np.array([100.0 + k, -50.0 + 2 * k]),
            speed=np.array([10.0, 20.0]),
            accel=np.array([0.0, 1.0]),
            status=[0, 2],
            fuel=np.array([0.5, 1.5]),
        )
    return log.arrays()


class TestTrajectoryFiles:
    def test_empty_log_header_only(self, tmp_path):
        path = export_trajectories(TrajectoryLog().arrays(), tmp_path / "empty.csv")
        assert path.read_text() == "t,id,lane,position,speed,accel,status,fuel_rate\n"

    def test_rows_sorted_by_time_then_id(self, tmp_path):
        path = export_trajectories(tiny_log(), tmp_path / "t.csv")
        lines = path.read_text().splitlines()
        assert len(lines) == 7
        keys = []
        for line in lines[1:]:
            parts = line.split(",")
            keys.append((float(parts[0]), int(parts[1])))
        assert keys == sorted(keys)
        assert keys[0] == (0.0, 3) and keys[1] == (0.0, 7)

    def test_six_decimal_formatting(self, tmp_path):
        path = export_trajectories(tiny_log(), tmp_path / "t.csv")
        first = path.read_text().splitlines()[1].split(",")
        assert first[0] == "0.000000" and first[3] == "-50.000000"

    def test_round_trip_preserves_metrics(self, tmp_path):
        cfg = load_config(CONFIG_DIR + "/smoke.yaml")
        result = run_scenario(cfg)
        path = export_trajectories(result.log, tmp_path / "run.csv")
        back = load_trajectories(path)
        a = compute_metrics(result.log, cfg.dt)
        b = compute_metrics(back, cfg.dt)
        for group in ("overall", "mainline", "ramp"):
            ga, gb = getattr(a, group), getattr(b, group)
            assert ga.n_vehicles == gb.n_vehicles
            for field_name in ("vmt_miles", "vht_hours", "q_mph", "fuel_ml",
                               "economy_mpg"):
                va, vb = getattr(ga, field_name), getattr(gb, field_name)
                assert abs(va - vb) <= 1e-9 * max(1.0, abs(va))

    def test_load_rejects_foreign_file(self, tmp_path):
        bad = tmp_path / "x.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(RuntimeError, match="bad header"):
            load_trajectories(bad)


def fake_metrics(q, mpg):
    group = GroupMetrics(
        n_vehicles=100, vmt_miles=500.0, vht_hours=500.0 / q,
        q_mph=q, fuel_ml=500.0 / mpg * 3785.411784, economy_mpg=mpg,
    )
    return RunMetrics(overall=group, mainline=group, ramp=group)


class TestReports:
    def test_paper_style_improvements(self, tmp_path):
        per_mode = {
            "optimal": fake_metrics(69.19, 40.0),
            "metering": fake_metrics(33.01, 35.0),
            "none": fake_metrics(29.14, 36.0),
        }
        report_metrics(per_mode, tmp_path / "r.json")
        data = json.loads((tmp_path / "r.json").read_text())
        imp = data["improvements"]
        assert round(imp["optimal_vs_metering"]["q_pct"], 1) == 109.6
        assert round(imp["optimal_vs_none"]["q_pct"], 1) == 137.4
        q2 = (70.45 / 29.14 - 1.0) * 100.0
        assert round(q2, 1) == 141.8

    def test_identical_metrics_zero_improvement(self, tmp_path):
        per_mode = {name: fake_metrics(40.0, 38.0)
                    for name in ("optimal", "metering", "none")}
        report_metrics(per_mode, tmp_path / "r.json")
        data = json.loads((tmp_path / "r.json").read_text())
        for pair in data["improvements"].values():
            assert abs(pair["q_pct"]) < 1e-12
            assert abs(pair["economy_pct"]) < 1e-12

    def test_text_table_written(self, tmp_path):
        text = report_metrics({"optimal": fake_metrics(50.0, 39.0)},
                              tmp_path / "r.json")
        assert (tmp_path / "r.txt").read_text() == text
        assert "Q (mph)" in text and "Q (km/h)" in text
        assert "economy (mpg)" in text
        assert "Mainline" in text and "Ramp" in text

    def test_needs_at_least_one_mode(self, tmp_path):
        with pytest.raises(ValueError):
            report_metrics({}, tmp_path / "r.json")


class TestManifest:
    def test_manifest_round_trip(self, tmp_path):
        manifest = RunManifest(
            config_digest="ab" * 32, config_path="x.yaml", mode="optimal",
            seed=4, started="2026-01-01T00:00:00+00:00",
            finished="2026-01-01T00:00:40+00:00", wall_seconds=40.0,
            outputs={"trajectories": "t.csv"}, metrics={"q_mph": 50.0},
        )
        path = manifest.write(tmp_path / "m.json")
        data = json.loads(path.read_text())
        assert data["seed"] == 4 and data["mode"] == "optimal"
        assert data["outputs"]["trajectories"] == "t.csv"


class TestCommands:
    def test_run_and_determinism(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            code = main(["run", "--config", CONFIG_DIR + "/smoke.yaml",
                         "--out", str(out)])
            assert code == EXIT_OK
        name = "run_optimal_seed3_trajectories.csv"
        digest_a = hashlib.sha256((out_a / name).read_bytes()).hexdigest()
        digest_b = hashlib.sha256((out_b / name).read_bytes()).hexdigest()
        assert digest_a == digest_b
        manifest = json.loads(
            (out_a / "run_optimal_seed3_manifest.json").read_text())
        assert manifest["mode"] == "optimal" and manifest["seed"] == 3
        assert manifest["metrics"]["q_mph"] > 0

    def test_run_rejects_bad_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("limits: {acc_min: 1.0}\n" + MINIMAL)
        code = main(["run", "--config", str(bad), "--out", str(tmp_path)])
        assert code == EXIT_CONFIG
        assert "acc_min" in capsys.readouterr().err

    def test_run_collision_exit_code(self, tmp_path, monkeypatch, capsys):
        import rampmerge.cli as cli_mod

        def boom(config):
            raise CollisionError(3.0, 1, 2, -0.5, log=TrajectoryLog().arrays())

        monkeypatch.setattr(cli_mod, "run_scenario", boom)
        code = main(["run", "--config", CONFIG_DIR + "/smoke.yaml",
                     "--out", str(tmp_path)])
        assert code == EXIT_COLLISION
        assert "collision" in capsys.readouterr().err
        partial = tmp_path / "run_optimal_seed3_trajectories_partial.csv"
        assert partial.exists()

    def test_env_var_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("RAMPMERGE_OUT", str(tmp_path / "env_out"))
        code = main(["validate", "--config", CONFIG_DIR + "/smoke.yaml"])
        assert code == EXIT_OK

    def test_validate_prints_resolved_set(self, capsys):
        code = main(["validate", "--config", CONFIG_DIR + "/smoke.yaml"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "limits.acc_max" in out and "2.49936" in out
        assert "mainline_idm.v0" in out and "32.991552" in out

    def test_compare_writes_report(self, tmp_path):
        code = main(["compare", "--config", CONFIG_DIR + "/smoke.yaml",
                     "--seed", "2", "--out", str(tmp_path)])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "compare_seed2_report.json").read_text())
        assert set(report["modes"]) == {"optimal", "metering", "none"}
        assert "optimal_vs_none" in report["improvements"]
        assert (tmp_path / "compare_seed2_report.txt").exists()
        for mode in ("optimal", "metering", "none"):
            assert (tmp_path / f"compare_{mode}_seed2_trajectories.csv").exists()

    def test_sweep_aggregates(self, tmp_path):
        code = main(["sweep", "--config", CONFIG_DIR + "/smoke.yaml",
                     "--seeds", "1", "2", "--modes", "none", "metering",
                     "--workers", "1", "--out", str(tmp_path)])
        assert code == EXIT_OK
        data = json.loads((tmp_path / "sweep.json").read_text())
        assert set(data) == {"none", "metering"}
        for entry in data.values():
            assert entry["seeds"] == [1, 2]
            assert entry["stats"]["q_mph"]["sd"] >= 0.0
            assert set(entry["runs"]) == {"1", "2"}
