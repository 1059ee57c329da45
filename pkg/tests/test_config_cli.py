import json
import math
import os

import numpy as np
import pytest

from raccess import threshold_policy
from raccess.cli import (
    EXIT_CONFIG,
    EXIT_DIVERGED,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_UNSTABLE,
    build_parser,
    load_policies,
    main,
)
from raccess.config import ConfigError, parse_config
from raccess.serialize import fmt

REFERENCE_CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs", "twoloop.json")


def base_config():
    return {
        "schema_version": 1,
        "systems": [
            {"a_closed": 0.5, "a_open": 1.1, "noise_cov": 1.0, "lyap_matrix": 1.0, "decay_rate": 0.8},
            {"a_closed": 0.4, "a_open": 1.0, "noise_cov": 1.0, "lyap_matrix": 1.0, "decay_rate": 0.8},
        ],
        "channels": [
            {
                "dist": {"family": "exponential", "mean": 1.0},
                "curve": {"family": "exp_saturating", "kappa": 1.5, "gain": 1.0},
            },
            {
                "dist": {"family": "exponential", "mean": 1.0},
                "curve": {"family": "exp_saturating", "kappa": 1.5, "gain": 1.0},
            },
        ],
        "collision": [[0.0, 0.5], [0.5, 0.0]],
        "tx_powers": [1.0, 1.0],
        "optimizer": {"max_periods": 5000, "seed": 0},
        "simulation": {"horizon": 20000, "seed": 7},
    }


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestParseConfig:
    def test_reference_file_parses(self):
        cfg = parse_config(REFERENCE_CONFIG)
        assert cfg.m == 2
        assert cfg.systems[0].a_open[0, 0] == 1.1
        assert cfg.optimizer.stop.max_periods == 5000
        assert cfg.optimizer.schedule.a == 30.0
        assert cfg.optimizer.schedule.b == 20.0
        assert cfg.simulation.horizon == 200_000
        assert cfg.simulation.seed == 7
        assert cfg.output_dir == "results"

    def test_explicit_step_constants_override_the_defaults(self, tmp_path):
        raw = base_config()
        raw["optimizer"]["step_a"] = 2.0
        raw["optimizer"]["step_b"] = 15.0
        cfg = parse_config(write_config(tmp_path, raw))
        assert cfg.optimizer.schedule.a == 2.0
        assert cfg.optimizer.schedule.b == 15.0

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="cannot read config"):
            parse_config("/nonexistent/path.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            parse_config(str(path))

    def test_unknown_top_level_key(self, tmp_path):
        raw = base_config()
        raw["simulaton"] = {}
        with pytest.raises(ConfigError, match="simulaton"):
            parse_config(write_config(tmp_path, raw))

    def test_unknown_optimizer_key(self, tmp_path):
        raw = base_config()
        raw["optimizer"]["stepsize"] = 0.1
        with pytest.raises(ConfigError, match="stepsize"):
            parse_config(write_config(tmp_path, raw))

    def test_wrong_schema_version(self, tmp_path):
        raw = base_config()
        raw["schema_version"] = 2
        with pytest.raises(ConfigError, match="schema_version"):
            parse_config(write_config(tmp_path, raw))

    def test_missing_required_field_names_its_path(self, tmp_path):
        raw = base_config()
        del raw["systems"][1]["a_open"]
        with pytest.raises(ConfigError, match=r"systems\[1\]"):
            parse_config(write_config(tmp_path, raw))

    def test_bad_decay_rate_names_its_path(self, tmp_path):
        raw = base_config()
        raw["systems"][0]["decay_rate"] = 1.2
        with pytest.raises(ConfigError, match=r"systems\[0\]"):
            parse_config(write_config(tmp_path, raw))

    def test_unknown_curve_family_names_the_channel(self, tmp_path):
        raw = base_config()
        raw["channels"][1]["curve"] = {"family": "step"}
        with pytest.raises(ConfigError, match=r"channels\[1\]"):
            parse_config(write_config(tmp_path, raw))

    def test_collision_required_for_multiple_loops(self, tmp_path):
        raw = base_config()
        del raw["collision"]
        with pytest.raises(ConfigError, match="collision"):
            parse_config(write_config(tmp_path, raw))

    def test_collision_optional_for_one_loop(self, tmp_path):
        raw = base_config()
        raw["systems"] = raw["systems"][:1]
        raw["channels"] = raw["channels"][:1]
        raw["tx_powers"] = [1.0]
        del raw["collision"]
        cfg = parse_config(write_config(tmp_path, raw))
        assert cfg.collision.m == 1
        assert np.all(cfg.collision.q == 0.0)

    def test_collision_size_must_match(self, tmp_path):
        raw = base_config()
        raw["collision"] = [[0.0]]
        with pytest.raises(ConfigError, match="collision"):
            parse_config(write_config(tmp_path, raw))

    def test_tx_powers_length_must_match(self, tmp_path):
        raw = base_config()
        raw["tx_powers"] = [1.0]
        with pytest.raises(ConfigError, match="tx_powers"):
            parse_config(write_config(tmp_path, raw))

    def test_plant_controller_form_assembles(self, tmp_path):
        raw = base_config()
        raw["systems"][0] = {
            "plant_a": [[1.05]],
            "plant_b": [[1.0]],
            "plant_c": [[1.0]],
            "ctrl_f": [[0.2]],
            "ctrl_fc": [[0.0]],
            "ctrl_g": [[0.1]],
            "ctrl_k": [[0.0]],
            "ctrl_kc": [[0.0]],
            "ctrl_l": [[-0.6]],
            "process_noise_cov": [[0.5]],
            "meas_noise_cov": [[0.2]],
            "lyap_matrix": [[1.0, 0.0], [0.0, 1.0]],
            "decay_rate": 0.9,
        }
        cfg = parse_config(write_config(tmp_path, raw))
        assert cfg.systems[0].dim == 2
        np.testing.assert_allclose(cfg.systems[0].a_closed, [[0.45, 0.0], [0.1, 0.2]])

    def test_mixing_raw_and_pair_keys_is_rejected(self, tmp_path):
        raw = base_config()
        raw["systems"][0]["plant_a"] = [[1.0]]
        with pytest.raises(ConfigError, match=r"systems\[0\]"):
            parse_config(write_config(tmp_path, raw))

    def test_bad_expectation_mode(self, tmp_path):
        raw = base_config()
        raw["optimizer"]["expectation_mode"] = "exact"
        with pytest.raises(ConfigError, match="expectation_mode"):
            parse_config(write_config(tmp_path, raw))

    def test_bad_beta_box(self, tmp_path):
        raw = base_config()
        raw["optimizer"]["beta_min"] = 0.9
        raw["optimizer"]["beta_max"] = 0.1
        with pytest.raises(ConfigError, match="beta"):
            parse_config(write_config(tmp_path, raw))


class TestCliRates:
    def test_writes_the_requirements(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["rates", REFERENCE_CONFIG, "--out", str(out)])
        assert code == EXIT_OK
        lines = (out / "rates.csv").read_text().splitlines()
        assert lines[0] == "system,requirement"
        assert len(lines) == 3
        c0 = float(lines[1].split(",")[1])
        c1 = float(lines[2].split(",")[1])
        assert c0 == pytest.approx(41.0 / 96.0, abs=1e-8)
        assert c1 == pytest.approx(5.0 / 21.0, abs=1e-8)
        assert "requirement" in capsys.readouterr().out

    def test_full_precision_round_trip(self, tmp_path):
        out = tmp_path / "out"
        main(["rates", REFERENCE_CONFIG, "--out", str(out)])
        text = (out / "rates.csv").read_text()
        for line in text.splitlines()[1:]:
            value = line.split(",")[1]
            assert value == fmt(float(value))

    def test_infeasible_system_exits_3(self, tmp_path, capsys):
        raw = base_config()
        raw["systems"][0]["a_closed"] = 1.0  # violates the closed-loop contract
        cfg = write_config(tmp_path, raw)
        code = main(["rates", cfg, "--out", str(tmp_path / "out")])
        assert code == EXIT_INFEASIBLE
        err = capsys.readouterr().err
        assert "error" in err and "loop 0" in err

    def test_missing_config_exits_2(self, capsys):
        code = main(["rates", "/nonexistent.json"])
        assert code == EXIT_CONFIG
        assert "error" in capsys.readouterr().err


class TestCliOptimize:
    def test_writes_trace_and_policies(self, tmp_path, capsys):
        raw = base_config()
        raw["systems"] = raw["systems"][:1]
        raw["channels"] = raw["channels"][:1]
        raw["tx_powers"] = [1.0]
        del raw["collision"]
        cfg = write_config(tmp_path, raw)
        out = tmp_path / "out"
        code = main(["optimize", cfg, "--out", str(out)])
        assert code == EXIT_OK
        assert "converged" in capsys.readouterr().out
        doc = json.loads((out / "policies.json").read_text())
        assert doc["converged"] is True
        assert doc["policies"][0]["kind"] == "threshold"
        assert len(doc["duals"]["lambda"]) == 1
        assert (out / "trace.csv").exists()
        assert (out / "rates.csv").exists()
        pols = load_policies(out / "policies.json")
        assert pols[0].threshold == doc["policies"][0]["threshold"]

    def test_non_convergence_exits_4_but_still_writes(self, tmp_path, capsys):
        raw = base_config()
        raw["optimizer"]["max_periods"] = 5
        cfg = write_config(tmp_path, raw)
        out = tmp_path / "out"
        code = main(["optimize", cfg, "--out", str(out)])
        assert code == EXIT_DIVERGED
        assert "did not converge" in capsys.readouterr().err
        doc = json.loads((out / "policies.json").read_text())
        assert doc["converged"] is False
        assert (out / "trace.csv").exists()

    def test_seed_flag_changes_mc_runs_only(self, tmp_path):
        raw = base_config()
        raw["optimizer"]["max_periods"] = 5
        raw["optimizer"]["expectation_mode"] = "mc"
        raw["optimizer"]["mc_samples"] = 500
        cfg = write_config(tmp_path, raw)
        out1, out2, out3 = (tmp_path / d for d in ("o1", "o2", "o3"))
        main(["optimize", cfg, "--out", str(out1), "--seed", "1"])
        main(["optimize", cfg, "--out", str(out2), "--seed", "1"])
        main(["optimize", cfg, "--out", str(out3), "--seed", "2"])
        t1 = (out1 / "trace.csv").read_text()
        assert t1 == (out2 / "trace.csv").read_text()
        assert t1 != (out3 / "trace.csv").read_text()


class TestCliSimulate:
    def _policies_file(self, tmp_path, thresholds):
        doc = {
            "schema_version": 1,
            "policies": [
                {"kind": "threshold", "threshold": t} for t in thresholds
            ],
        }
        path = tmp_path / "policies.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def test_simulates_given_policies(self, tmp_path, capsys):
        raw = base_config()
        cfg = write_config(tmp_path, raw)
        pols = self._policies_file(
            tmp_path, [0.34934006025424225, 0.8881000386856908]
        )
        out = tmp_path / "out"
        code = main(["simulate", cfg, "--policies", pols, "--out", str(out)])
        assert code == EXIT_OK
        lines = (out / "metrics.csv").read_text().splitlines()
        assert lines[0] == "system,empirical_cost,empirical_tx_rate,empirical_success_rate,cost_bound"
        assert len(lines) == 3
        assert "backend" in capsys.readouterr().out

    def test_unstable_policy_exits_5(self, tmp_path, capsys):
        raw = base_config()
        raw["simulation"]["horizon"] = 2000
        cfg = write_config(tmp_path, raw)
        pols = self._policies_file(tmp_path, [math.inf, 0.9])
        code = main(["simulate", cfg, "--policies", pols, "--out", str(tmp_path / "out")])
        assert code == EXIT_UNSTABLE
        assert "does not stabilize" in capsys.readouterr().err

    def test_wrong_policy_count_exits_2(self, tmp_path, capsys):
        raw = base_config()
        cfg = write_config(tmp_path, raw)
        pols = self._policies_file(tmp_path, [0.5])
        code = main(["simulate", cfg, "--policies", pols, "--out", str(tmp_path / "out")])
        assert code == EXIT_CONFIG

    def test_rejects_wrong_policies_schema(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema_version": 99, "policies": []}))
        with pytest.raises(ConfigError, match="schema_version"):
            load_policies(str(path))

    def test_horizon_flag_overrides_the_config(self, tmp_path):
        raw = base_config()
        cfg = write_config(tmp_path, raw)
        pols = self._policies_file(
            tmp_path, [0.34934006025424225, 0.8881000386856908]
        )
        out = tmp_path / "out"
        code = main(
            ["simulate", cfg, "--policies", pols, "--out", str(out), "--horizon", "500"]
        )
        assert code == EXIT_OK


class TestCliParser:
    def test_subcommands_exist(self):
        parser = build_parser()
        for cmd in ("rates", "optimize", "simulate", "pipeline"):
            args = parser.parse_args(
                [cmd, "cfg.json"]
                + (["--policies", "p.json"] if cmd == "simulate" else [])
            )
            assert callable(args.func)

    def test_mode_flag_is_restricted(self):
        parser = build_parser()
        with pytest.raises(SystemExit):
            parser.parse_args(["optimize", "cfg.json", "--mode", "exact"])
