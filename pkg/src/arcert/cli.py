"""Batch command-line front end.

Subcommands: ``certify`` (evaluate certificates for one configuration),
``montecarlo`` (run a coverage campaign), ``rate-sweep`` (decay-rate table
over a horizon grid) and ``simulate`` (dump one trajectory).  Configurations
are JSON documents; outputs are JSON for structured results and CSV for
tables.  All CSV output is byte-deterministic given the master seed; the only
nondeterministic content anywhere is the ``generated_at`` field inside JSON
metadata.

Exit codes: 0 on success (a bound empirically violated is a scientific result,
not a tool failure), 2 on configuration errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import (
    BoundInputs,
    covariance_certificate,
    deviation_radius,
    max_feasible_epsilon,
    rate_analysis,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    EventImplicationError,
    InfeasibleCertificateError,
    StabilityError,
)
from .montecarlo import CampaignConfig, resolve_direction, run_campaign
from .process import ArProcess, build_companion, simulate_stationary, simulation_spec_from_json
from .stationary import stationary_stats


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config file '{path}': {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file '{path}': invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file '{path}': top level must be a JSON object")
    return data


def _require(config: dict, field: str):
    if field not in config:
        raise ConfigError(f"field '{field}': missing from config")
    return config[field]


def _parse_process(config: dict) -> ArProcess:
    coeffs = _require(config, "coeffs")
    noise_variance = _require(config, "noise_variance")
    try:
        return ArProcess(coeffs=np.asarray(coeffs, dtype=float),
                         noise_variance=float(noise_variance))
    except StabilityError as exc:
        raise ConfigError(f"field 'coeffs': {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'coeffs'/'noise_variance': {exc}") from exc


def _int_field(config: dict, field: str) -> int:
    value = _require(config, field)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"field '{field}': must be an integer")
    return value


def _parse_horizon(config: dict, order: int) -> int:
    horizon = _int_field(config, "horizon")
    if horizon <= order:
        raise ConfigError(f"field 'horizon': must be an integer above the order {order}")
    return horizon


def resolve_epsilon(spec, ceiling: float, horizon: int) -> tuple[str, float | None]:
    """Resolve the epsilon policy to a value (None when infeasible).

    Policies: a plain number fixes epsilon; "ceiling-rule" uses
    ceiling - horizon^{-1/2}, the choice under which the failure bound decays
    like exp(-ceiling * sqrt(N)); {"fraction_of_ceiling": f} uses f * ceiling.
    """
    if isinstance(spec, bool):
        raise ConfigError("field 'epsilon': must be a number, 'ceiling-rule' or "
                          "{'fraction_of_ceiling': f}")
    if isinstance(spec, (int, float)):
        value = float(spec)
        if not np.isfinite(value) or value <= 0.0:
            raise ConfigError("field 'epsilon': fixed value must be a positive real")
        return "fixed", value
    if spec == "ceiling-rule":
        value = ceiling - horizon ** -0.5
        return "ceiling-rule", (value if value > 0.0 else None)
    if isinstance(spec, dict) and set(spec) == {"fraction_of_ceiling"}:
        fraction = float(spec["fraction_of_ceiling"])
        if not np.isfinite(fraction) or fraction <= 0.0:
            raise ConfigError("field 'epsilon': fraction_of_ceiling must be positive")
        return f"fraction_of_ceiling:{fraction}", fraction * ceiling
    raise ConfigError("field 'epsilon': must be a number, 'ceiling-rule' or "
                      "{'fraction_of_ceiling': f}")


def _parse_directions(config: dict, order: int) -> list[tuple[str, np.ndarray]]:
    raw = config.get("direction", "e1")
    specs = raw if isinstance(raw, list) and not _is_vector(raw) else [raw]
    out = []
    for idx, spec in enumerate(specs):
        label, w = resolve_direction(spec, order, fallback_label=f"w{idx + 1}")
        out.append((label, w))
    return out


def _is_vector(value: list) -> bool:
    return bool(value) and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                               for v in value)


def _out_dir(args, config: dict) -> Path:
    target = args.out or config.get("output_dir")
    if not target:
        raise ConfigError("field 'output_dir': missing (or pass --out)")
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _meta() -> dict:
    return {
        "package_version": __version__,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")
    print(f"wrote {path}")


def cmd_certify(args) -> int:
    config = _load_config(args.config)
    process = _parse_process(config)
    horizon = _parse_horizon(config, process.order)
    directions = _parse_directions(config, process.order)

    stats = stationary_stats(build_companion(process), process.noise_variance)
    ceiling = max_feasible_epsilon(process, stats)
    policy, epsilon = resolve_epsilon(_require(config, "epsilon"), ceiling, horizon)

    out = _out_dir(args, config)
    payload: dict = {
        "process": process.to_dict(),
        "horizon": horizon,
        "epsilon_policy": policy,
        "epsilon_ceiling": ceiling,
        "meta": _meta(),
    }
    lines = [
        f"process: coeffs={process.coeffs.tolist()} noise_variance={process.noise_variance}",
        f"horizon: {horizon}",
        f"epsilon ceiling: {ceiling!r}",
    ]

    if epsilon is None:
        payload.update({"epsilon": None, "feasible": False, "covariance": None,
                        "deviations": {}})
        lines.append(f"epsilon ({policy}): infeasible at this horizon")
        lines.append("certificate: infeasible")
    else:
        cert = covariance_certificate(
            BoundInputs(process=process, stats=stats, epsilon=epsilon, horizon=horizon)
        )
        payload.update({"epsilon": epsilon, "feasible": cert.feasible,
                        "covariance": cert.to_dict()})
        lines.append(f"epsilon ({policy}): {epsilon!r}")
        lines.append(f"feasible: {cert.feasible}")
        lines.append(f"delta: {cert.delta!r} (log: {cert.log_delta!r})")
        deviations = {}
        if cert.feasible:
            for label, w in directions:
                dev = deviation_radius(cert, w, process.noise_variance)
                deviations[label] = dev.to_dict()
                shown = "vacuous" if dev.vacuous else repr(dev.radius)
                lines.append(f"radius[{label}]: {shown} (failure <= {dev.total_failure!r})")
        else:
            lines.append("deviation radii: skipped (infeasible epsilon)")
        payload["deviations"] = deviations

    _write_json(out / "certificate.json", payload)
    _write_text(out / "summary.txt", "\n".join(lines) + "\n")
    return 0


def cmd_montecarlo(args) -> int:
    config = _load_config(args.config)
    process = _parse_process(config)
    horizon = _parse_horizon(config, process.order)
    directions = _parse_directions(config, process.order)
    trials = _int_field(config, "trials")
    if trials <= 0:
        raise ConfigError("field 'trials': must be a positive integer")
    seed = args.seed if args.seed is not None else _int_field(config, "seed")
    if seed < 0:
        raise ConfigError("field 'seed': must be a nonnegative integer")

    stats = stationary_stats(build_companion(process), process.noise_variance)
    ceiling = max_feasible_epsilon(process, stats)
    policy, epsilon = resolve_epsilon(_require(config, "epsilon"), ceiling, horizon)
    if epsilon is None:
        raise ConfigError(f"field 'epsilon': policy '{policy}' is infeasible at horizon {horizon}")

    campaign = CampaignConfig(
        process=process,
        horizon=horizon,
        epsilon=epsilon,
        trials=trials,
        master_seed=seed,
        directions=tuple(directions),
        threads=args.threads,
        allow_vacuous=bool(config.get("allow_vacuous", False)),
    )
    report = run_campaign(campaign)

    out = _out_dir(args, config)
    _write_json(out / "coverage.json",
                {"report": report.to_dict(), "epsilon_policy": policy, "meta": _meta()})
    _write_text(out / "coverage.csv", report.csv_text())
    for row in report.events:
        shown = "n/a" if row.frequency is None else repr(row.frequency)
        print(f"{row.event}: frequency={shown} bound={row.bound!r} verdict={row.verdict}")
    return 0


def cmd_rate_sweep(args) -> int:
    config = _load_config(args.config)
    process = _parse_process(config)
    grid = _require(config, "horizon_grid")
    if (not isinstance(grid, list) or not grid
            or not all(isinstance(h, int) for h in grid)):
        raise ConfigError("field 'horizon_grid': must be a non-empty list of integers")
    directions = _parse_directions(config, process.order)
    label, w = directions[0]

    stats = stationary_stats(build_companion(process), process.noise_variance)
    try:
        analysis = rate_analysis(process, stats, grid, w)
    except ValueError as exc:
        raise ConfigError(f"field 'horizon_grid': {exc}") from exc

    out = _out_dir(args, config)
    csv_lines = ["horizon,epsilon,delta,log_delta,radius,feasible"]
    for p in analysis.points:
        csv_lines.append(",".join([
            str(p.horizon),
            repr(p.epsilon),
            "" if p.delta is None else repr(p.delta),
            "" if p.log_delta is None else repr(p.log_delta),
            "" if p.radius is None else repr(p.radius),
            str(p.feasible).lower(),
        ]))
    _write_text(out / "rate_sweep.csv", "\n".join(csv_lines) + "\n")
    _write_json(out / "rate_analysis.json",
                {"direction": label, "analysis": analysis.to_dict(), "meta": _meta()})
    if analysis.slope is not None:
        print(f"fitted slope of log(2 delta) vs sqrt(N): {analysis.slope!r} "
              f"(epsilon ceiling {analysis.epsilon_ceiling!r})")
    return 0


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    try:
        spec = simulation_spec_from_json(config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    seed = args.seed if args.seed is not None else spec.seed
    traj = simulate_stationary(spec.process, spec.horizon, seed)
    out = _out_dir(args, config)
    path = out / "trajectory.csv"
    traj.to_csv(path)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arcert",
        description="Finite-sample certificates for least-squares AR(n) identification",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="path to the JSON configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides config)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for Monte Carlo campaigns")

    for name, func, blurb in (
        ("certify", cmd_certify, "evaluate certificates for one configuration"),
        ("montecarlo", cmd_montecarlo, "run a Monte Carlo coverage campaign"),
        ("rate-sweep", cmd_rate_sweep, "decay-rate table over a horizon grid"),
        ("simulate", cmd_simulate, "simulate and dump one trajectory"),
    ):
        p = sub.add_parser(name, help=blurb)
        add_common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StabilityError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, InfeasibleCertificateError, EventImplicationError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
