"""Command-line entry point: parameter sweeps and the oracle self-check."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys

import numpy as np

from .beamforming import Scheme, closed_form_n1_k1, closed_form_n1_k_many
from .harness import ExperimentConfig, emit_csv, run_experiment, write_rows
from .solver import build_p2_program, solve_p2

SWEEP_COMMANDS = {
    "sweep-power": "power",
    "sweep-ues": "ues",
    "sweep-rounds": "rounds",
    "sweep-altitude": "altitude",
}
SWEEP_HELP = {
    "power": "mean rate per scheme over the BS transmit power (dBm)",
    "ues": "mean rate per scheme over the number of terrestrial UEs K",
    "rounds": "distributed-scheme rate over the number of exchange rounds L",
    "altitude": "mean rate per scheme over the UAV altitude (m)",
}


def _schemes(text: str):
    try:
        return tuple(Scheme(s.strip()) for s in text.split(",") if s.strip())
    except ValueError as exc:
        choices = ", ".join(s.value for s in Scheme)
        raise argparse.ArgumentTypeError(f"{exc}; choose from {choices}") from None


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--realizations", type=int)
    common.add_argument("--schemes", type=_schemes, help="comma-separated scheme tags")
    common.add_argument("--parallel", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cbitc", description="CB-ITC UAV downlink simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, sweep in SWEEP_COMMANDS.items():
        sub.add_parser(name, parents=[common], help=SWEEP_HELP[sweep])
    sub.add_parser("oracle-check", parents=[common],
                   help="compare closed forms and the conic solver against brute force")
    return parser


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.realizations is not None:
        changes["realizations"] = args.realizations
    if args.schemes:
        changes["schemes"] = args.schemes
    return config.replace(**changes) if changes else config


def oracle_checks(seed: int, instances: int) -> list[tuple[str, float, float]]:
    """Independent-route checks as ``(name, worst relative error, tolerance)``.

    * single-server closed form against a grid search over the ITC amplitude
    * conic solver on one serving BS against the closed forms (K = 1..8)
    """
    rng = np.random.default_rng(seed)
    worst_grid = 0.0
    for _ in range(instances):
        fa, fo = rng.uniform(0.1, 3.0, 2)
        P = 10 ** rng.uniform(-1, 2)
        noise = 10 ** rng.uniform(-1, 1)
        eta = closed_form_n1_k1(fa, fo, P, noise).eta
        vj = np.linspace(0.0, math.sqrt(P), 10_000)
        vu = np.sqrt(np.maximum(P - vj ** 2, 0.0))
        grid = np.max((fa * vu) ** 2 / (noise + (math.sqrt(P) * fo - fa * vj) ** 2))
        worst_grid = max(worst_grid, abs(grid - eta) / eta)

    worst_socp = 0.0
    for k in range(1, 9):
        for _ in range(max(1, instances // 20)):
            fa = rng.uniform(0.1, 3.0)
            fo = rng.uniform(0.1, 3.0, k)
            P = 10 ** rng.uniform(-1, 2)
            noise = 10 ** rng.uniform(-1, 1)
            eta = closed_form_n1_k_many(fa, fo, P, noise).eta
            sol = solve_p2(build_p2_program([fa], fo, P, noise))
            worst_socp = max(worst_socp, abs(sol.objective_value ** 2 - eta) / eta)
    return [("closed_form_vs_grid", worst_grid, 1e-4), ("socp_vs_closed_form", worst_socp, 1e-5)]


def _write_rows(path, header, rows):
    fh = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if path:
            fh.close()


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"cbitc: error: {exc}", file=sys.stderr)
        return 2


def _run(args) -> int:
    config = _load_config(args)

    if args.command == "oracle-check":
        results = oracle_checks(config.seed, instances=min(config.realizations, 500))
        ok = all(err <= tol for _, err, tol in results)
        _write_rows(args.out, ["check", "max_rel_error", "tolerance", "passed"],
                    [[name, f"{err:.6g}", f"{tol:.6g}", str(err <= tol).lower()]
                     for name, err, tol in results])
        return 0 if ok else 1

    rows = run_experiment(config, SWEEP_COMMANDS[args.command], parallel=args.parallel)
    if args.out:
        emit_csv(rows, args.out)
    else:
        write_rows(rows, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
