"""Command-line client for the lab service.

Every subcommand builds a request model, dispatches it either in-process
(default) or to a running service (``--server URL``), and writes CSV/JSON
reports plus optional plots from the response.  Exit codes: 0 success,
1 configuration/validation error, 2 numerical-failure flags (failed checks
or unreliable estimates).

The environment variable ``GRAZING_LAB_SEED`` overrides every configured
seed.  CSV files start with two comment lines (`# timestamp:` and
`# config:`); byte-identical runs differ only in the timestamp line.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from datetime import datetime, timezone

from . import service
from .config import ConfigError, ExperimentConfig, load_config, parse_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class RemoteClient:
    """Thin HTTP client mirroring the in-process handlers."""

    def __init__(self, base_url: str, transport=None, timeout: float = 3600.0):
        import httpx

        self._client = httpx.Client(base_url=base_url, timeout=timeout,
                                    transport=transport)

    def post(self, path: str, request_model):
        resp = self._client.post(path, json=request_model.model_dump())
        if resp.status_code != 200:
            raise ConfigError(f"server rejected {path}: {resp.status_code} "
                              f"{resp.text}")
        return resp.json()


def _dispatch(args, path: str, handler, request_model):
    if getattr(args, "server", None):
        client = RemoteClient(args.server, transport=getattr(args, "_transport", None))
        return client.post(path, request_model)
    return handler(request_model).model_dump()


def _resolved_seed(seed: int) -> int:
    env = os.environ.get("GRAZING_LAB_SEED")
    return int(env) if env else seed


def _load_base_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else parse_config({})
    return cfg


def write_csv(path: str, rows: list[dict], config_snapshot: dict):
    fh = open(path, "w", encoding="utf-8", newline="") if path != "-" else sys.stdout
    try:
        fh.write(f"# timestamp: {datetime.now(timezone.utc).isoformat()}\n")
        fh.write(f"# config: {json.dumps(config_snapshot, sort_keys=True)}\n")
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    finally:
        if path != "-":
            fh.close()


def _plot_sweep(path: str, rows: list[dict]):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        eps = [r["epsilon"] for r in rows]
        gaps = [abs(r["gap"]) for r in rows]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(eps, gaps, "o-", label="|value - target|")
        ax.set_xlabel("epsilon")
        ax.set_ylabel("gap")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    except Exception as err:  # plotting must never fail the numerical run
        warnings.warn(f"plotting failed: {err}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_check_pairs(args) -> int:
    req = service.PairCheckRequest(pair=args.pair, custom_name=args.custom_name,
                                   samples=args.samples,
                                   seed=_resolved_seed(args.seed))
    out = _dispatch(args, "/check-pairs", service.handle_check_pairs, req)
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK if out["passed"] else EXIT_NUMERICAL


def cmd_check_geometry(args) -> int:
    req = service.GeometryCheckRequest(dim=args.dim, frames=args.frames,
                                       seed=_resolved_seed(args.seed))
    out = _dispatch(args, "/check-geometry", service.handle_check_geometry, req)
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK if out["passed"] else EXIT_NUMERICAL


def _apply_kernel_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    data = cfg.model_dump()
    if getattr(args, "gamma", None) is not None:
        data["kernels"]["a0"]["gamma"] = args.gamma
    if getattr(args, "nu", None) is not None:
        data["kernels"]["beta"]["nu"] = args.nu
    if getattr(args, "eps", None) is not None:
        data["kernels"]["epsilon"] = args.eps
    if getattr(args, "kappa", None) is not None:
        data["kernels"]["kappa"]["c"] = args.kappa
    if getattr(args, "pair", None):
        data["pair"]["name"] = args.pair
    if getattr(args, "samples", None) is not None:
        data["mc"]["samples"] = args.samples
    if getattr(args, "seed", None) is not None:
        data["mc"]["seed"] = args.seed
    data["mc"]["seed"] = _resolved_seed(data["mc"]["seed"])
    if getattr(args, "workers", None) is not None:
        data["mc"]["workers"] = args.workers
    return parse_config(data)


def cmd_functionals(args) -> int:
    cfg = _apply_kernel_overrides(_load_base_config(args), args)
    req = service.FunctionalsRequest(config=cfg, functionals=args.functionals)
    out = _dispatch(args, "/functionals", service.handle_functionals, req)
    write_csv(args.out, out["rows"], out["config"])
    bad = any(r["unreliable"] for r in out["rows"])
    return EXIT_NUMERICAL if bad else EXIT_OK


def cmd_grazing_sweep(args) -> int:
    cfg = _apply_kernel_overrides(_load_base_config(args), args)
    eps_list = [float(tok) for tok in args.eps_list.split(",") if tok]
    req = service.SweepRequest(config=cfg, eps_list=eps_list, kind=args.kind)
    out = _dispatch(args, "/grazing-sweep", service.handle_sweep, req)
    write_csv(args.out, out["rows"], out["config"])
    if args.plot:
        _plot_sweep(args.plot, out["rows"])
    for note in out["notes"]:
        print(f"note: {note}", file=sys.stderr)
    for failure in out["failures"]:
        print(f"failure: {failure}", file=sys.stderr)
    return EXIT_NUMERICAL if out["failures"] else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_base_config(args)
    data = cfg.model_dump()
    if data.get("solver") is None:
        data["solver"] = {}
    for key, attr in (("n", "n"), ("dt", "dt"), ("horizon", "horizon"),
                      ("theta_min", "theta_min"), ("seed", "seed")):
        val = getattr(args, attr, None)
        if val is not None:
            data["solver"][key] = val
    if getattr(args, "eps", None) is not None:
        data["kernels"]["epsilon"] = args.eps
    if getattr(args, "gamma", None) is not None:
        data["kernels"]["a0"]["gamma"] = args.gamma
    if getattr(args, "kappa", None) is not None:
        data["kernels"]["kappa"]["c"] = args.kappa
    data["solver"]["seed"] = _resolved_seed(data["solver"].get("seed", 0))
    cfg = parse_config(data)
    req = service.SimulateRequest(config=cfg)
    out = _dispatch(args, "/simulate", service.handle_simulate, req)
    rows = []
    for r in out["trace"]:
        row = {"t": r["t"], "mass": r["mass"]}
        for i, m in enumerate(r["momentum"]):
            row[f"momentum_{i + 1}"] = m
        row.update({k: r[k] for k in ("energy", "entropy", "entropy_stderr",
                                      "collisions_accepted", "candidates",
                                      "moment_bracket")})
        rows.append(row)
    write_csv(args.trace_out, rows, out["config"])
    if args.snapshot_out and out.get("final_positions") is not None:
        snap = [{**{f"x_{i+1}": xi for i, xi in enumerate(xrow)},
                 **{f"v_{i+1}": vi for i, vi in enumerate(vrow)}}
                for xrow, vrow in zip(out["final_positions"], out["final_velocities"])]
        write_csv(args.snapshot_out, snap, out["config"])
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run(service.app, host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grazing-lab",
        description="Delocalised-collision kinetics lab: functionals, "
                    "small-angle sweeps, particle runs, admissibility checks.")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-pairs", help="verify a dissipation pair")
    p.add_argument("--pair", default="cosh", choices=["quadratic", "cosh", "custom"])
    p.add_argument("--custom-name", default=None)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.set_defaults(func=cmd_check_pairs)

    p = sub.add_parser("check-geometry", help="verify the collision geometry")
    p.add_argument("--dim", type=int, default=2, choices=[2, 3])
    p.add_argument("--frames", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check_geometry)

    p = sub.add_parser("functionals", help="evaluate functionals, one CSV row each")
    p.add_argument("--config", default=None, help="YAML experiment config")
    p.add_argument("--functionals", nargs="+",
                   default=["dissipation_boltzmann", "dissipation_psi",
                            "dissipation_cosh", "dissipation_landau"])
    p.add_argument("--pair", default=None, choices=["quadratic", "cosh", "custom"])
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default="-", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_functionals)

    p = sub.add_parser("grazing-sweep", help="epsilon sweep against the Landau target")
    p.add_argument("--config", default=None)
    p.add_argument("--kind", default="dissipation",
                   choices=["dissipation", "weak_operator"])
    p.add_argument("--pair", default=None, choices=["quadratic", "cosh", "custom"])
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--eps-list", default="0.4,0.2,0.1,0.05")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default="-", help="CSV path (default stdout)")
    p.add_argument("--plot", default=None, help="SVG/PNG log-log plot path")
    p.set_defaults(func=cmd_grazing_sweep)

    p = sub.add_parser("simulate", help="run the delocalised-collision particle solver")
    p.add_argument("--config", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--theta-min", dest="theta_min", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace-out", dest="trace_out", default="-")
    p.add_argument("--snapshot-out", dest="snapshot_out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error:\n{err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
