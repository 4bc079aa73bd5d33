"""Command-line entry point: SNR sweeps, ablations, and single-instance
detection.

Exit codes: 0 success, 1 validation error (message names the offending
field/path), 2 runtime failure. Messages go to stderr; data goes to files or
stdout only.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import baselines
from .channel import (
    build_real_system,
    format_complex,
    load_channel_csv,
    load_observation,
    sigma0_from_snr,
)
from .constellation import ModulationPlan, embed_complex, make_qam
from .errors import ConfigurationError, DetectorError
from .harness import load_config, run_ablation, run_sweep, write_csv
from .langevin import LangevinConfig, detect

_AXES = ("levels", "trajectories", "tau")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the root seed")
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap worker parallelism (default: available cores)",
    )
    common.add_argument("--output", default=None, help="output file path")

    parser = argparse.ArgumentParser(
        prog="mimodet",
        description="MIMO symbol-detection simulator with annealed-Langevin, "
        "ZF, MMSE, and exhaustive-ML detectors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", parents=[common], help="run an SNR sweep")
    p_sim.add_argument("--config", required=True, help="experiment config file (TOML)")

    p_abl = sub.add_parser(
        "ablate", parents=[common], help="sweep one Langevin hyperparameter axis"
    )
    p_abl.add_argument("--config", required=True, help="experiment config file (TOML)")
    p_abl.add_argument("--axis", required=True, choices=_AXES)
    p_abl.add_argument(
        "--values", required=True, help="comma-separated axis values, e.g. 5,10,20"
    )

    p_det = sub.add_parser(
        "detect", parents=[common], help="detect one observed vector"
    )
    p_det.add_argument("--channel", required=True, help="channel CSV (a+bi entries)")
    p_det.add_argument(
        "--observation", required=True, help="observation file (one a+bi per line)"
    )
    p_det.add_argument("--snr-db", required=True, type=float)
    p_det.add_argument(
        "--detector", required=True, choices=[k.value for k in baselines.DetectorKind]
    )
    p_det.add_argument(
        "--modulation",
        default="4",
        help="QAM order, or comma-separated per-user orders (default: 4)",
    )
    return parser


def _workers(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigurationError(f"threads: must be >= 1, got {args.threads}")
        return args.threads
    return os.cpu_count() or 1


def _load_config_with_overrides(args):
    if not os.path.exists(args.config):
        raise ConfigurationError(f"config: file not found: {args.config}")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
        cfg.validate()
    output = args.output or cfg.output_path
    if output is None:
        raise ConfigurationError("output: no --output given and config has no output_path")
    return cfg, output


def _cmd_simulate(args) -> int:
    cfg, output = _load_config_with_overrides(args)
    result = run_sweep(cfg, workers=_workers(args))
    write_csv(result, output)
    print(f"wrote {len(result.rows)} rows to {output}", file=sys.stderr)
    return 0


def _parse_axis_values(axis: str, text: str):
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if axis == "tau":
            values.append(float(token))
        else:
            try:
                values.append(int(token))
            except ValueError:
                raise ConfigurationError(
                    f"values: axis {axis!r} needs integers, got {token!r}"
                ) from None
    if not values:
        raise ConfigurationError("values: no axis values given")
    return values


def _cmd_ablate(args) -> int:
    cfg, output = _load_config_with_overrides(args)
    values = _parse_axis_values(args.axis, args.values)
    result = run_ablation(cfg, args.axis, values, workers=_workers(args))
    write_csv(result, output)
    print(f"wrote {len(result.rows)} rows to {output}", file=sys.stderr)
    return 0


def _parse_modulation(text: str, n_users: int) -> ModulationPlan:
    try:
        orders = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigurationError(f"modulation: cannot parse {text!r}") from None
    if len(orders) == 1:
        return ModulationPlan.uniform(make_qam(orders[0]), n_users)
    if len(orders) != n_users:
        raise ConfigurationError(
            f"modulation: per-user list has length {len(orders)}, channel has {n_users} users"
        )
    return ModulationPlan(tuple(make_qam(o) for o in orders))


def _cmd_detect(args) -> int:
    for path in (args.channel, args.observation):
        if not os.path.exists(path):
            raise ConfigurationError(f"input: file not found: {path}")
    hc = load_channel_csv(args.channel)
    y_complex = load_observation(args.observation)
    n_rx, n_users = hc.shape
    if y_complex.shape != (n_rx,):
        raise ConfigurationError(
            f"observation: has {y_complex.size} entries, channel has {n_rx} receive antennas"
        )
    plan = _parse_modulation(args.modulation, n_users)
    sigma0 = sigma0_from_snr(10.0 ** (args.snr_db / 10.0), n_rx, n_users)
    y = embed_complex(y_complex)
    system = build_real_system(hc, y, sigma0)
    name = args.detector
    if name == "zf":
        estimate = baselines.zf_detect(system.y, system.H, plan, svd=(system.U, system.s, system.V))
    elif name == "mmse":
        estimate = baselines.mmse_detect(system.y, system.H, sigma0, plan)
    elif name == "ml":
        estimate = baselines.ml_exhaustive(system.y, system.H, plan)
    else:
        seed = args.seed if args.seed is not None else 0
        estimate = detect(y, hc, sigma0, LangevinConfig(), plan, seed).symbols

    lines = "\n".join(format_complex(z) for z in estimate.per_user) + "\n"
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that is a validation failure here.
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "ablate":
            return _cmd_ablate(args)
        return _cmd_detect(args)
    except (ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DetectorError, OSError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
