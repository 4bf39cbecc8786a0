"""
CLI Module

Command-line front end. Every subcommand runs one experiment through the
Experiments controller and writes, under --out:

- <command>.csv: the result table
- <command>.manifest.json: the RunManifest (parameters, seed, version, outputs)
- <command>.svg: a line plot, only with --svg

Exit codes: 0 on success, 1 when the experiment failed or an acceptance gate
did not pass (a JSON failure report goes to stderr and <command>.failure.json),
2 on invalid configuration.
"""

import argparse
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from pydantic import BaseModel, Field  # noqa: E402

from inelastic_kfp import __version__  # noqa: E402
from inelastic_kfp.experiments_controller import Experiments  # noqa: E402
from inelastic_kfp.utils.config import load_scan_config, load_solver_config, parse_scan_config  # noqa: E402
from inelastic_kfp.utils.helpers import ConfigurationError  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


class RunManifest(BaseModel):
    """Provenance of one command run; identical manifests up to started_at give identical CSV files."""

    command: str
    parameters: dict
    parameters_hash: str
    seed: int
    code_version: str = __version__
    started_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    outputs: list[str] = Field(default_factory=list)


def _hash_parameters(parameters: dict) -> str:
    data = json.dumps(parameters, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(data).hexdigest()


# ---------------------
# Plots
# ---------------------

PLOTS = {
    "exponents": ("r", ["alpha", "beta"]),
    "profile": ("zeta", ["lambda"]),
    "flux": ("r", ["mean_flux", "expected"]),
    "cstar": ("r", ["c_star_closed", "c_star_quadrature"]),
    "mc": ("r", ["collapse_fraction"]),
    "toy": ("x", ["U_h", "U_ref"]),
    "solve": ("t", ["total_mass", "m", "outflow"]),
}


def _write_svg(command: str, result: pd.DataFrame, path: Path) -> bool:
    x_col, y_cols = PLOTS.get(command, (None, []))
    field = command == "profile" and "g" in result.columns
    if x_col not in result.columns and not field:
        logger.warning("no plot for %s with columns %s", command, list(result.columns))
        return False
    fig, ax = plt.subplots(figsize=(6, 4))
    if field:
        filled = ax.tricontourf(result["x"], result["v"], result["g"], levels=20)
        fig.colorbar(filled, ax=ax, label="g")
        ax.set_xlabel("x")
        ax.set_ylabel("v")
    else:
        for col in y_cols:
            if col in result.columns:
                ax.plot(result[x_col], result[col], label=col)
        ax.set_xlabel(x_col)
        ax.legend()
    ax.set_title(command)
    fig.tight_layout()
    # no timestamp in the file
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return True


# ---------------------
# Commands
# ---------------------

def _cmd_exponents(experiments: Experiments, args) -> pd.DataFrame:
    return experiments.collect_exponents(args.r)


def _cmd_profile(experiments: Experiments, args) -> pd.DataFrame:
    return experiments.collect_profile(
        gamma=args.gamma, r=args.r, zeta_range=(args.min, args.max), samples=args.samples, field=args.field
    )


def _cmd_flux(experiments: Experiments, args) -> pd.DataFrame:
    return experiments.collect_flux(args.r)


def _cmd_cstar(experiments: Experiments, args) -> pd.DataFrame:
    return experiments.collect_cstar(args.r)


def _cmd_mc(experiments: Experiments, args) -> pd.DataFrame:
    if args.config:
        scan = load_scan_config(args.config)
    else:
        overrides = {"paths": args.paths}
        if args.r_grid:
            overrides["r_grid"] = args.r_grid
        scan = parse_scan_config(overrides)
    return experiments.collect_mc(scan)


def _cmd_toy(experiments: Experiments, args) -> pd.DataFrame:
    return experiments.collect_toy(mode=args.mode, h=args.h, t=args.t, x0=args.x0, mu=args.mu, lam=args.lam)


def _cmd_solve(experiments: Experiments, args) -> pd.DataFrame:
    return experiments.collect_solve(load_solver_config(args.config))


def _cmd_verify(experiments: Experiments, args) -> pd.DataFrame:
    return experiments.verify(checks=args.check or None, include_slow=args.slow)


COMMANDS = {
    "exponents": _cmd_exponents,
    "profile": _cmd_profile,
    "flux": _cmd_flux,
    "cstar": _cmd_cstar,
    "mc": _cmd_mc,
    "toy": _cmd_toy,
    "solve": _cmd_solve,
    "verify-all": _cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with the global flags and one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="inelastic-kfp",
        description="Experiments for the kinetic Fokker-Planck equation with an inelastic wall",
    )
    parser.add_argument("--seed", type=int, default=0, help="Root seed (default 0)")
    parser.add_argument("--out", type=Path, default=Path("results"), help="Output directory")
    parser.add_argument("--svg", action="store_true", help="Also write an SVG line plot")
    parser.add_argument("--json", action="store_true", help="Print the summary as JSON")
    parser.add_argument("--workers", type=int, default=1, help="Threads for Monte Carlo blocks")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v INFO, -vv DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", help="alpha, beta, K_alpha, kappa and C_* per r")
    p.add_argument("--r", type=float, nargs="+", default=[0.05, 0.1, 0.5, 1.0])

    p = sub.add_parser("profile", help="sample Lambda_gamma or G_gamma")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--gamma", type=float, default=None)
    group.add_argument("--r", type=float, default=None, help="use gamma = alpha(r)")
    p.add_argument("--min", type=float, default=-10.0)
    p.add_argument("--max", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--field", action="store_true", help="sample G_gamma(x, v) instead")

    p = sub.add_parser("flux", help="boundary fluxes of the steady profiles")
    p.add_argument("--r", type=float, nargs="+", default=[0.05, 0.1, 0.5])

    p = sub.add_parser("cstar", help="C_* closed form against quadrature")
    p.add_argument("--r", type=float, nargs="+", default=[0.1])

    p = sub.add_parser("mc", help="collapse threshold scan")
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--r-grid", type=float, nargs="+", default=None)
    p.add_argument("--config", type=Path, default=None, help="JSON scan configuration")

    p = sub.add_parser("toy", help="lattice walk against the heat equation")
    p.add_argument("--mode", choices=["trapping", "nontrapping", "partial"], default="trapping")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0)

    p = sub.add_parser("solve", help="kinetic solver run with corner diagnostics")
    p.add_argument("config", type=Path, help="JSON solver configuration")

    p = sub.add_parser("verify-all", help="run the acceptance checks")
    p.add_argument("--slow", action="store_true", help="include the long checks")
    p.add_argument("--check", nargs="+", default=None, help="run only these checks")
    return parser


def _parameters(args) -> dict:
    skip = {"seed", "out", "svg", "json", "verbose", "workers", "command"}
    return {key: (str(value) if isinstance(value, Path) else value) for key, value in vars(args).items() if key not in skip}


def _summary(command: str, result: pd.DataFrame) -> dict:
    summary = {key: value for key, value in result.attrs.items() if key != "error"}
    summary["rows"] = len(result)
    if command == "verify-all" and not result.empty:
        summary["passed"] = bool(result["passed"].all())
        summary["failed_gates"] = result.loc[~result["passed"], ["check", "metric"]].to_dict("records")
    return summary


def _fail(command: str, out: Path, report: dict, code: int) -> int:
    payload = json.dumps({"command": command, **report}, indent=2, default=str)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{command}.failure.json").write_text(payload)
    print(payload, file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    """
    Entry point of ``inelastic-kfp``.

    Args:
        argv (list[str], optional): Arguments (sys.argv[1:] by default).

    Returns:
        int: The exit code.
    """
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")

    command = args.command
    experiments = Experiments(seed=args.seed, workers=args.workers)
    try:
        result = COMMANDS[command](experiments, args)
    except ConfigurationError as e:
        logger.error("invalid configuration for %s: %s", command, e)
        return _fail(command, args.out, {"error": "configuration", "message": str(e), "fields": e.fields}, EXIT_CONFIG)

    if "error" in result.attrs:
        return _fail(command, args.out, {"error": "experiment", "message": result.attrs["error"]}, EXIT_FAILED)

    args.out.mkdir(parents=True, exist_ok=True)
    outputs = []
    csv_path = args.out / f"{command}.csv"
    result.to_csv(csv_path, index=False)
    outputs.append(csv_path.name)
    if args.svg:
        svg_path = args.out / f"{command}.svg"
        if _write_svg(command, result, svg_path):
            outputs.append(svg_path.name)

    parameters = _parameters(args)
    manifest = RunManifest(
        command=command,
        parameters=parameters,
        parameters_hash=_hash_parameters({**parameters, "seed": args.seed}),
        seed=args.seed,
        outputs=outputs,
    )
    manifest_path = args.out / f"{command}.manifest.json"
    manifest.outputs.append(manifest_path.name)
    manifest_path.write_text(manifest.model_dump_json(indent=2))

    summary = _summary(command, result)
    if args.json:
        print(json.dumps(summary, indent=2, default=float))
    else:
        print(result.to_string(index=False))

    if command == "verify-all" and not summary.get("passed", False):
        return _fail(command, args.out, {"error": "acceptance", "failed_gates": summary.get("failed_gates", [])}, EXIT_FAILED)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
