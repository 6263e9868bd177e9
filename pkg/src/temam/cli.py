"""Command line: ``temam run <config.json>``, ``temam validate <config.json>``, ``temam list-experiments``.

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

from ._validation import ConfigurationError, TemamError
from .experiments import DEFAULT_TOLERANCES, EXPERIMENTS, ExperimentConfig, run_named
from .io import json_safe, write_json

__all__ = ["parse_config", "run_experiment", "main", "config_hash"]

_INF_TOKENS = {"inf", "+inf", "infinity", "∞"}
_NUMBER_FIELDS = {"box_length", "epsilon", "dt", "cfl", "dt_max", "t_end", "spread"}
_INT_FIELDS = {"n_dims", "resolution", "record_every", "n_snapshots", "n_samples", "picard_K", "seed"}
_BOOL_FIELDS = {"dealias", "write_snapshots", "drift_check", "profile_check"}
_LIST_FIELDS = {
    "snapshot_times",
    "q_list",
    "fit_window",
    "kernel_times",
    "kernel_epsilons",
    "etas",
    "lambda_grid",
    "tau_grid",
    "t3_times",
    "picard_times",
    "t_list",
}


def _number(name, value, allow_inf=False):
    if isinstance(value, str) and allow_inf and value.strip().lower() in _INF_TOKENS:
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"field {name!r}: expected a number, got {value!r}")
    return float(value)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment description; unknown keys are rejected."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a JSON object")
    if "experiment" not in raw:
        raise ConfigurationError("field 'experiment' is required")
    if raw["experiment"] not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {raw['experiment']!r}; choose from {sorted(EXPERIMENTS)}")
    unknown = set(raw) - ExperimentConfig.keys()
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")

    kw = {}
    for key, value in raw.items():
        if key in _NUMBER_FIELDS:
            kw[key] = None if value is None and key in {"dt", "cfl", "dt_max", "spread"} else _number(key, value)
        elif key in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigurationError(f"field {key!r}: expected an integer, got {value!r}")
            kw[key] = value
        elif key in _BOOL_FIELDS:
            if not isinstance(value, bool):
                raise ConfigurationError(f"field {key!r}: expected true or false, got {value!r}")
            kw[key] = value
        elif key in _LIST_FIELDS:
            if value is None and key == "fit_window":
                kw[key] = None
                continue
            if not isinstance(value, list):
                raise ConfigurationError(f"field {key!r}: expected a list")
            kw[key] = [_number(key, v, allow_inf=(key == "q_list")) for v in value]
        elif key in {"datum", "tolerances", "scaling_grid"}:
            if not isinstance(value, dict):
                raise ConfigurationError(f"field {key!r}: expected an object")
            kw[key] = dict(value)
        else:
            kw[key] = value
    cfg = ExperimentConfig(**kw)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.n_dims not in (2, 3):
        raise ConfigurationError("field 'n_dims': must be 2 or 3")
    if cfg.resolution < 8 or cfg.resolution % 2:
        raise ConfigurationError("field 'resolution': must be an even integer >= 8")
    for name in ("box_length", "epsilon", "t_end"):
        if not getattr(cfg, name) > 0:
            raise ConfigurationError(f"field {name!r}: must be positive")
    for name in ("dt", "cfl", "dt_max", "spread"):
        v = getattr(cfg, name)
        if v is not None and not v > 0:
            raise ConfigurationError(f"field {name!r}: must be positive")
    for q in cfg.q_list:
        if not q >= 1:
            raise ConfigurationError(f"field 'q_list': {q} is not in [1, inf]")
    if cfg.fit_window is not None and (len(cfg.fit_window) != 2 or not 0 < cfg.fit_window[0] < cfg.fit_window[1]):
        raise ConfigurationError("field 'fit_window': expected [t_lo, t_hi] with 0 < t_lo < t_hi")
    if cfg.experiment == "kernel-check" and not (cfg.n_samples or cfg.kernel_times):
        raise ConfigurationError("kernel-check needs n_samples > 0 or a non-empty kernel_times")
    if cfg.n_samples < 0:
        raise ConfigurationError("field 'n_samples': must be non-negative")
    if not 1 <= cfg.picard_K <= 6:
        raise ConfigurationError("field 'picard_K': must lie in [1, 6]")
    bad = set(cfg.tolerances) - set(DEFAULT_TOLERANCES)
    if bad:
        raise ConfigurationError(f"unknown tolerance keys: {sorted(bad)}")
    for key, value in cfg.tolerances.items():
        _number(f"tolerances.{key}", value)
    if set(cfg.datum) - {"kind", "amplitude", "width", "seed"}:
        raise ConfigurationError(f"unknown datum keys: {sorted(set(cfg.datum) - {'kind', 'amplitude', 'width', 'seed'})}")
    if cfg.datum.get("kind", "dipole") not in ("dipole", "zero", "random", "example3d"):
        raise ConfigurationError(f"field 'datum.kind': unknown kind {cfg.datum['kind']!r}")
    if any(t < 0 or t > cfg.t_end for t in cfg.snapshot_times):
        raise ConfigurationError("field 'snapshot_times': times must lie in [0, t_end]")
    out = Path(cfg.output_dir)
    probe = out if out.exists() else next((p for p in out.parents if p.exists()), Path("."))
    if probe.exists() and not probe.is_dir():
        raise ConfigurationError(f"field 'output_dir': {probe} is not a directory")


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(json_safe(cfg.to_dict()), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _version() -> str:
    from . import __version__

    return __version__


def run_experiment(cfg: ExperimentConfig) -> tuple[int, dict]:
    """Run, write ``report.json``, artifacts and ``manifest.json`` into ``cfg.output_dir``."""
    start = time.perf_counter()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report, checks, artifacts = run_named(cfg)
    failures = [c.to_dict() for c in checks if not c.passed]
    payload = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "report": report,
        "checks": [c.to_dict() for c in checks],
        "failures": failures,
        "passed": not failures,
    }
    write_json(out / "report.json", payload)
    written = ["report.json"]
    for name, writer in sorted(artifacts.items()):
        writer(out / name)
        written.append(name)
    write_json(
        out / "manifest.json",
        {
            "experiment": cfg.experiment,
            "config_hash": config_hash(cfg),
            "code_version": _version(),
            "wall_time_seconds": time.perf_counter() - start,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "files": written,
        },
    )
    return (0 if not failures else 1), payload


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="temam", description="Artificial-compressibility decay experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--output-dir", default=None, help="override the config's output_dir")
    p_val = sub.add_parser("validate", help="check a JSON config without running it")
    p_val.add_argument("config", type=Path)
    sub.add_parser("list-experiments", help="list experiment names")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-experiments":
        for name, (_, description) in EXPERIMENTS.items():
            print(f"{name}\t{description}")
        return 0
    try:
        cfg = parse_config(args.config.read_text())
    except OSError as exc:
        print(json.dumps({"error": f"cannot read config: {exc}"}), file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    if args.command == "validate":
        print(json.dumps(json_safe(cfg.to_dict()), indent=2, sort_keys=True))
        return 0
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    try:
        status, payload = run_experiment(cfg)
    except TemamError as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 2 if isinstance(exc, ConfigurationError) else 1
    print(json.dumps(json_safe({"passed": payload["passed"], "failures": payload["failures"]}), indent=2))
    return status


if __name__ == "__main__":
    sys.exit(main())
