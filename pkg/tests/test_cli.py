import json
import math

import pytest

from temam import ConfigurationError
from temam.cli import config_hash, main, parse_config, run_experiment
from temam.experiments import DEFAULT_TOLERANCES, EXPERIMENTS

FAST_KERNEL_CHECK = {
    "experiment": "kernel-check",
    "resolution": 16,
    "n_samples": 4,
    "scaling_grid": {"n_dims": 2, "box_length": 80.0, "resolution": 256},
}


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config('{"experiment": "kernel-check"}')
        assert (cfg.n_dims, cfg.resolution, cfg.epsilon) == (3, 64, 1.0)
        assert cfg.tol == DEFAULT_TOLERANCES

    def test_unknown_experiment(self):
        with pytest.raises(ConfigurationError, match="unknown experiment"):
            parse_config('{"experiment": "warp"}')

    def test_inf_token(self):
        cfg = parse_config('{"experiment": "decay", "q_list": [1, 2, "inf"]}')
        assert cfg.q_list == [1.0, 2.0, math.inf]

    def test_json_error_has_position(self):
        with pytest.raises(ConfigurationError, match="line 2, column"):
            parse_config('{"experiment":\n "decay",}')

    @pytest.mark.parametrize(
        "payload, message",
        [
            ({"experiment": "decay", "colour": 1}, "unknown configuration keys"),
            ({"experiment": "decay", "epsilon": "big"}, "'epsilon'"),
            ({"experiment": "decay", "resolution": 7}, "'resolution'"),
            ({"experiment": "decay", "n_dims": 4}, "'n_dims'"),
            ({"experiment": "decay", "q_list": [0.5]}, "'q_list'"),
            ({"experiment": "decay", "fit_window": [3, 1]}, "'fit_window'"),
            ({"experiment": "decay", "tolerances": {"nope": 1}}, "unknown tolerance"),
            ({"experiment": "decay", "datum": {"kind": "vortex"}}, "datum.kind"),
            ({"experiment": "decay", "snapshot_times": [5.0]}, "snapshot_times"),
            ({"experiment": "decay", "drift_check": 1}, "'drift_check'"),
            ({"decay": 1}, "'experiment' is required"),
        ],
    )
    def test_field_errors(self, payload, message):
        with pytest.raises(ConfigurationError, match=message):
            parse_config(json.dumps(payload))

    def test_hash_ignores_key_order(self):
        a = parse_config('{"experiment": "decay", "epsilon": 0.5, "t_end": 2}')
        b = parse_config('{"t_end": 2, "epsilon": 0.5, "experiment": "decay"}')
        assert config_hash(a) == config_hash(b)


class TestMain:
    def test_list_experiments(self, capsys):
        assert main(["list-experiments"]) == 0
        names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
        assert names == list(EXPERIMENTS)

    def test_validate(self, tmp_path, capsys):
        assert main(["validate", str(write_config(tmp_path, {"experiment": "picard"}))]) == 0
        assert json.loads(capsys.readouterr().out)["picard_K"] == 5

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        assert main(["validate", str(write_config(tmp_path, {"experiment": "warp"}))]) == 2
        assert "unknown experiment" in json.loads(capsys.readouterr().err)["error"]

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.json")]) == 2

    def test_failed_check_exit_code(self, tmp_path, capsys):
        payload = dict(FAST_KERNEL_CHECK, tolerances={"ide_m": 0.0}, output_dir=str(tmp_path / "out"))
        # residuals of order 1e-16 are not exactly zero
        assert main(["run", str(write_config(tmp_path, payload))]) == 1
        failures = json.loads(capsys.readouterr().out)["failures"]
        assert {f["name"] for f in failures} <= {"solenoidal_diffusion", "divergence_diffusion"} and failures

    def test_output_dir_override(self, tmp_path):
        cfg_path = write_config(tmp_path, dict(FAST_KERNEL_CHECK, output_dir="ignored"))
        assert main(["run", str(cfg_path), "--output-dir", str(tmp_path / "elsewhere")]) == 0
        assert (tmp_path / "elsewhere" / "report.json").exists()


class TestRunExperiment:
    def test_kernel_check_artifacts(self, tmp_path):
        cfg = parse_config(json.dumps(dict(FAST_KERNEL_CHECK, output_dir=str(tmp_path))))
        status, payload = run_experiment(cfg)
        assert status == 0 and payload["passed"]
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config_hash"] == config_hash(cfg)
        assert manifest["files"] == ["report.json"]
        assert {"code_version", "wall_time_seconds", "timestamp"} <= set(manifest)

    def test_zero_datum_decay_passes_trivially(self, tmp_path):
        cfg = parse_config(json.dumps({
            "experiment": "decay",
            "n_dims": 2,
            "box_length": 20.0,
            "resolution": 16,
            "t_end": 1.0,
            "dt": 0.05,
            "datum": {"kind": "zero"},
            "output_dir": str(tmp_path),
        }))
        status, payload = run_experiment(cfg)
        assert status == 0
        fits = payload["report"]["fits"]
        assert all(f["skipped"] for f in fits.values())
        assert (tmp_path / "trajectory.csv").exists()

    def test_identical_configs_give_identical_outputs(self, tmp_path):
        base = {
            "experiment": "simulate",
            "n_dims": 2,
            "box_length": 20.0,
            "resolution": 32,
            "t_end": 0.5,
            "dt": 0.05,
            "datum": {"kind": "random", "amplitude": 1.0, "seed": 3},
            "write_snapshots": True,
            "snapshot_times": [0.25],
        }
        outputs = []
        for name in ("a", "b"):
            cfg = parse_config(json.dumps(dict(base, output_dir=str(tmp_path / name))))
            run_experiment(cfg)
            outputs.append(tmp_path / name)
        for rel in ("trajectory.csv", "snapshots/trajectory_t0.25.f64", "snapshots/trajectory_t0.25.f64.json"):
            assert (outputs[0] / rel).read_bytes() == (outputs[1] / rel).read_bytes()
        reports = [json.loads((o / "report.json").read_text()) for o in outputs]
        reports[1]["config"]["output_dir"] = reports[0]["config"]["output_dir"]
        assert reports[0] == reports[1]
