"""Command-line runner: ``nm-thermo run <model>`` and ``nm-thermo verify``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, checks, scenarios
from .errors import NMThermoError, ParameterError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# flag name -> (runner keyword, type, default) per model
COMMON = {
    "tmax": ("t_max", float, None),
    "step": ("step", float, 1e-3),
    "rho0": ("rho0", str, None),
}
MODEL_FLAGS = {
    "depolarize": {"tmax": ("t_max", float, 3.0)},
    "thermal-qubit": {
        "tmax": ("t_max", float, 10.0),
        "beta": ("beta", float, 1.0),
        "gamma": ("gamma", float, 1.0),
        "omega0": ("omega0", float, 1.0),
    },
    "spinbath": {
        "tmax": ("t_max", float, 10.0),
        "beta": ("beta", float, 1.0),
        "omega0": ("omega0", float, 1.0),
        "omega": ("omega", float, 1.0),
        "alpha": ("alpha", float, 0.1),
        "N": ("N", int, 20),
        "T": ("T", float, 1.0),
        "phase_form": ("phase_form", str, "arg"),
        "printed": ("printed", lambda v: str(v).lower() in ("1", "true", "yes"), False),
    },
}
FLOAT_FORMAT = "%.16e"


class UsageError(Exception):
    pass


def _model_spec(model):
    spec = dict(COMMON)
    spec.update(MODEL_FLAGS[model])
    return spec


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve_config(model, flags, file_values):
    """Defaults, then config file, then explicit flags."""
    spec = _model_spec(model)
    config = {"model": model}
    extras = {"observables", "output", "seed", "model"}
    for key in file_values:
        if key not in spec and key not in extras:
            raise UsageError(f"unknown config key {key!r} for model {model}")
    for name, (_, kind, default) in spec.items():
        raw = flags.get(name)
        if raw is None and name in file_values:
            raw = file_values[name]
        try:
            config[name] = default if raw is None else kind(raw)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {name}: {raw!r}") from exc
    config["seed"] = int(flags.get("seed") if flags.get("seed") is not None else file_values.get("seed", 0))
    labels = flags.get("observables") or file_values.get("observables")
    known = scenarios.OBSERVABLES[model]
    if labels:
        labels = [s.strip() for s in str(labels).split(",") if s.strip()]
        unknown = [s for s in labels if s not in known]
        if unknown:
            raise UsageError(f"unknown observables {unknown}; choose from {list(known)}")
    config["observables"] = list(labels or known)
    config["output"] = flags.get("output") or file_values.get("output") or f"{model}.csv"
    if not config["step"] > 0:
        raise UsageError("step must be positive")
    if not config["tmax"] > 0:
        raise UsageError("tmax must be positive")
    if config["rho0"] is not None and config["rho0"] not in scenarios.INITIAL_STATES:
        raise UsageError(f"rho0 must be one of {sorted(scenarios.INITIAL_STATES)}")
    return config


def _runner_kwargs(config):
    spec = _model_spec(config["model"])
    return {spec[k][0]: v for k, v in config.items() if k in spec and v is not None}


def write_csv(path, result, labels):
    names = ["t", *labels, "witness"]
    data = [result.columns["t"], *(result.columns[k] for k in labels)]
    table = np.column_stack(data + [result.witness.astype(float)]) + 0.0
    fmt = [FLOAT_FORMAT] * (len(names) - 1) + ["%d"]
    np.savetxt(path, table, delimiter=",", fmt=fmt, header=",".join(names), comments="")


def run(config):
    """Run one scenario; returns ``(exit_code, sidecar_dict)``."""
    result = scenarios.RUNNERS[config["model"]](**_runner_kwargs(config))
    out = Path(config["output"])
    write_csv(out, result, config["observables"])
    sidecar = {
        "config": config,
        "version": __version__,
        "columns": ["t", *config["observables"], "witness"],
        "checks": [c.as_dict() for c in result.checks],
        "pass": result.passed,
    }
    out.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, default=float) + "\n")
    return (EXIT_OK if result.passed else EXIT_FAIL), sidecar


def verify(level, seed=0):
    results = checks.run_suite(level, seed)
    report = {
        "level": level,
        "seed": seed,
        "version": __version__,
        "checks": [c.as_dict() for c in results],
        "pass": all(c.passed for c in results if c.gating),
    }
    return (EXIT_OK if report["pass"] else EXIT_FAIL), report


def build_parser():
    parser = argparse.ArgumentParser(prog="nm-thermo", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and write CSV + JSON sidecar")
    models = run_p.add_subparsers(dest="model", required=True)
    for model in MODEL_FLAGS:
        mp = models.add_parser(model)
        for name in _model_spec(model):
            option = "--" + name.replace("_", "-")
            if name == "printed":
                mp.add_argument(option, action="store_const", const="true", default=None)
            else:
                mp.add_argument(option, dest=name, default=None)
        mp.add_argument("--observables", default=None, help="comma-separated column labels")
        mp.add_argument("--output", "-o", default=None)
        mp.add_argument("--config", default=None, help="flat key=value file; flags take precedence")
        mp.add_argument("--seed", type=int, default=None)

    ver = sub.add_parser("verify", help="run the verification suite")
    ver.add_argument("--level", choices=("fast", "full"), default="fast")
    ver.add_argument("--output", "-o", default=None, help="JSON report path (stdout if omitted)")
    ver.add_argument("--seed", type=int, default=0)
    return parser


def _report_failures(items):
    for c in items:
        if c["gating"] and not c["pass"]:
            value = "non-finite" if c["value"] is None else f"{c['value']:.3e}"
            print(f"nm-thermo: check failed: {c['name']} = {value} (tol {c['tol']:.1e})", file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            code, report = verify(args.level, args.seed)
            text = json.dumps(report, indent=2) + "\n"
            if args.output:
                Path(args.output).write_text(text)
            else:
                sys.stdout.write(text)
            _report_failures(report["checks"])
            return code
        file_values = read_config(args.config) if args.config else {}
        config = resolve_config(args.model, vars(args), file_values)
        code, sidecar = run(config)
        _report_failures(sidecar["checks"])
        return code
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nm-thermo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"nm-thermo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NMThermoError as exc:
        print(f"nm-thermo: model failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
