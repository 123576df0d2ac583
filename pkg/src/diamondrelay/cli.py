"""Command line front end.

Subcommands: partition, capacity, analyze, plan, simulate, sweep.
Numeric output uses 6 significant digits.  Results go to stdout or --out;
file outputs get a sibling .manifest.json.  DIAMONDRELAY_OUT sets the
default output directory for relative --out paths.

Flag resolution: explicit flags beat --config file entries (key=value
lines), which beat built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .channel import build_partition, partition_csv
from .capacity import (
    LinkGains,
    afp_capacity_coherent,
    afp_capacity_general,
    classify_subspace,
    gains_from_levels,
    rates_from_gains,
    srp_capacity,
)
from .buffering import Thresholds, validate_thresholds
from .queueing import delay_upper_bound, interval_moments
from .planner import default_thr1_per_block, enumerate_feasible, select_best
from .sim import SimConfig, run, sweep
from .manifest import write_manifest

USAGE_EXIT = 2
RUNTIME_EXIT = 1

# per-command defaults applied after --config merging (None = no default)
_DEFAULTS = {
    "states": 16,
    "block_ms": 1.0,
    "pc_over_sigma2": 1.0,
    "strategy": "hybrid",
    "blocks": 100_000,
    "replications": 1,
    "format": "json",
    "snr_list": "0,2,4,6,8,10",
    "strategies": "srp,afp,hybrid",
    "workers": 0,
}


class CliError(Exception):
    """Usage-level problem: exits with code 2."""


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _jsonable(d: dict) -> dict:
    return {k: (float(f"{v:.6g}") if isinstance(v, float) else v) for k, v in d.items()}


def _emit(text: str, out: str | None, command: str, config: dict, seeds=None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    base = Path(os.environ.get("DIAMONDRELAY_OUT", "."))
    path = Path(out)
    if not path.is_absolute():
        path = base / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    write_manifest(path, command, {k: v for k, v in config.items() if k != "func"}, seeds)
    print(f"wrote {path}")


def _load_config_file(path: str) -> dict:
    cfg = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"bad config line (expected key=value): {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            cfg[key.replace("-", "_")] = json.loads(val)
        except json.JSONDecodeError:
            cfg[key.replace("-", "_")] = val
    return cfg


def _resolve(args: argparse.Namespace) -> dict:
    """flag > config-file > default; returns a plain dict."""
    merged = dict(vars(args))
    if merged.get("config"):
        file_cfg = _load_config_file(merged["config"])
        for key, val in file_cfg.items():
            if key not in merged:
                raise CliError(f"unknown config key: {key}")
            if merged[key] is None:
                merged[key] = val
    for key, default in _DEFAULTS.items():
        if key in merged and merged[key] is None:
            merged[key] = default
    return merged


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise CliError(f"missing required option(s): {', '.join('--' + k.replace('_', '-') for k in missing)}")
    if "states" in cfg and cfg["states"] is not None and int(cfg["states"]) < 2:
        raise CliError(f"--states must be >= 2, got {cfg['states']}")


def _thresholds(cfg: dict) -> Thresholds:
    _require(cfg, "thr_U", "thr_u", "thr_D", "thr_d")
    return Thresholds(int(cfg["thr_U"]), int(cfg["thr_u"]), int(cfg["thr_D"]), int(cfg["thr_d"]))


def cmd_partition(cfg: dict) -> int:
    _require(cfg, "snr_db")
    part = build_partition(float(cfg["snr_db"]), int(cfg["states"]))
    _emit(partition_csv(part), cfg["out"], "partition", {"snr_db": cfg["snr_db"], "states": cfg["states"]})
    return 0


def cmd_capacity(cfg: dict) -> int:
    if cfg.get("levels"):
        _require(cfg, "snr_db")
        part = build_partition(float(cfg["snr_db"]), int(cfg["states"]))
        lv = [int(v) for v in str(cfg["levels"]).split(",")]
        if len(lv) != 4:
            raise CliError("--levels needs four comma-separated states s1,s2,d1,d2")
        gains = gains_from_levels(part, *lv, pc_over_sigma2=float(cfg["pc_over_sigma2"]))
    elif cfg.get("gains"):
        gs = [float(v) for v in str(cfg["gains"]).split(",")]
        if len(gs) != 4:
            raise CliError("--gains needs four comma-separated magnitudes")
        gains = LinkGains(*gs, pc_over_sigma2=float(cfg["pc_over_sigma2"]))
    else:
        raise CliError("capacity requires --gains or --levels")

    rates = rates_from_gains(gains)
    srp = srp_capacity(rates)
    gen = afp_capacity_general(gains)
    payload = {
        "srp": srp.rate,
        "afp_coherent": afp_capacity_coherent(gains).rate,
        "afp_general": gen.rate,
        "hybrid": max(srp.rate, gen.rate),
        "subset": classify_subspace(rates, gains),
        "lambda1": srp.lambda1,
        "lambda2": srp.lambda2,
        "alpha": gen.alpha,
        "beta": gen.beta,
    }
    _emit(json.dumps(_jsonable(payload), indent=2), cfg["out"], "capacity", payload)
    return 0


def cmd_analyze(cfg: dict) -> int:
    _require(cfg, "snr_db")
    part = build_partition(float(cfg["snr_db"]), int(cfg["states"]))
    thr = _thresholds(cfg)
    rep = validate_thresholds(thr, part)
    block_s = float(cfg["block_ms"]) / 1000.0
    m = interval_moments(thr, part, block_s)
    payload = {
        "p_x": m.p_x,
        "p_y": m.p_y,
        "e_a": m.mean_arrival,
        "e_b": m.mean_service,
        "var_a": m.var_arrival,
        "var_b": m.var_service,
        "rho": m.rho,
        "criterion1": rep.criterion1_ok,
        "criterion2": rep.criterion2_ok,
        "stable": bool(rep.stable and m.rho < 1.0),
    }
    if payload["stable"]:
        bound = delay_upper_bound(thr, part, block_s)
        payload["w_bar_blocks"] = bound["blocks"]
        payload["w_bar_s"] = bound["seconds"]
    _emit(json.dumps(_jsonable(payload), indent=2), cfg["out"], "analyze", payload)
    if not payload["stable"]:
        print(json.dumps({"error": "unstable thresholds", "thresholds": thr.as_tuple()}), file=sys.stderr)
        return RUNTIME_EXIT
    return 0


def cmd_plan(cfg: dict) -> int:
    _require(cfg, "snr_db", "delay_req_blocks")
    part = build_partition(float(cfg["snr_db"]), int(cfg["states"]))
    block_s = float(cfg["block_ms"]) / 1000.0
    thr1 = cfg.get("thr1_per_block")
    thr1 = float(thr1) if thr1 is not None else default_thr1_per_block(part)
    gamma = enumerate_feasible(
        part,
        float(cfg["delay_req_blocks"]),
        block_s,
        thr1_per_block=thr1,
        restrict_columns=not cfg.get("full_lattice"),
    )
    lines = ["U,u,D,d,psi,delay_bound_blocks"]
    for e in sorted(gamma, key=lambda e: -e.psi):
        t = e.thresholds
        lines.append(
            f"{t.upper_sr},{t.upper_rd},{t.lower_sr},{t.lower_rd},{_fmt(e.psi)},{_fmt(e.predicted_delay_blocks)}"
        )
    csv_text = "\n".join(lines) + "\n"
    if not gamma:
        _emit(csv_text + '{"selected": null}\n', cfg["out"], "plan", {"gamma_size": 0})
        return 0
    best = select_best(gamma)
    selected = {
        "U": best.thresholds.upper_sr,
        "u": best.thresholds.upper_rd,
        "D": best.thresholds.lower_sr,
        "d": best.thresholds.lower_rd,
        "psi": float(f"{best.psi:.6g}"),
        "delay_bound_blocks": float(f"{best.predicted_delay_blocks:.6g}"),
    }
    _emit(csv_text + json.dumps({"selected": selected}) + "\n", cfg["out"], "plan", selected)
    return 0


def _sim_config(cfg: dict, strategy: str, snr_db: float, seed: int) -> SimConfig:
    thr = _thresholds(cfg) if strategy == "buffered" else None
    return SimConfig(
        snr_db=snr_db,
        n_states=int(cfg["states"]),
        n_blocks=int(cfg["blocks"]),
        block_ms=float(cfg["block_ms"]),
        strategy=strategy,
        thresholds=thr,
        seed=seed,
        replications=int(cfg["replications"]),
    )


def _pick_seed(cfg: dict) -> int:
    if cfg.get("seed") is not None:
        return int(cfg["seed"])
    seed = int(np.random.SeedSequence().entropy % (2**31))
    print(f"seed not given; using {seed}", file=sys.stderr)
    return seed


def cmd_simulate(cfg: dict) -> int:
    _require(cfg, "snr_db")
    seed = _pick_seed(cfg)
    sim_cfg = _sim_config(cfg, str(cfg["strategy"]), float(cfg["snr_db"]), seed)
    rep = run(sim_cfg)
    row = {
        "strategy": sim_cfg.strategy,
        "snr_db": sim_cfg.snr_db,
        "seed": seed,
        "mean_throughput": rep.mean_throughput,
        "stderr_throughput": rep.stderr_throughput,
    }
    if rep.mean_delay_s is not None:
        row.update(
            mean_delay_s=rep.mean_delay_s,
            mean_delay_blocks=rep.mean_delay_blocks,
            rho_measured=rep.rho_measured,
            rho_analytic=rep.rho_analytic,
            diverged=rep.divergence_flag,
        )
    if cfg["format"] == "json":
        text = json.dumps(_jsonable(row), indent=2)
    else:
        keys = list(row)
        text = ",".join(keys) + "\n" + ",".join(_fmt(row[k]) for k in keys) + "\n"
    _emit(text, cfg["out"], "simulate", row, seeds=[seed])
    return 0


def cmd_sweep(cfg: dict) -> int:
    snrs = [float(s) for s in str(cfg["snr_list"]).split(",")]
    strategies = str(cfg["strategies"]).split(",")
    seed = _pick_seed(cfg)
    configs = [
        _sim_config(cfg, strat, db, seed)
        for db in snrs
        for strat in strategies
    ]
    reports = sweep(configs, workers=int(cfg["workers"]))
    lines = ["snr_db,strategy,variable,value,stderr"]
    for rep in reports:
        if rep is None:
            lines.append("# failed entry")
            continue
        lines.append(
            f"{rep.config.snr_db},{rep.config.strategy},throughput,"
            f"{_fmt(rep.mean_throughput)},{_fmt(rep.stderr_throughput)}"
        )
        if rep.mean_delay_s is not None:
            lines.append(
                f"{rep.config.snr_db},{rep.config.strategy},delay_s,"
                f"{_fmt(rep.mean_delay_s)},{_fmt(rep.stderr_delay_s)}"
            )
    _emit("\n".join(lines) + "\n", cfg["out"], "sweep",
          {"snr_list": cfg["snr_list"], "strategies": cfg["strategies"], "seed": seed},
          seeds=[c.seed for c in configs])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diamondrelay")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--snr-db", dest="snr_db", type=float, default=None)
        p.add_argument("--states", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--config", default=None, help="key=value defaults file")

    def thr_flags(p):
        p.add_argument("--U", dest="thr_U", type=int, default=None)
        p.add_argument("--u", dest="thr_u", type=int, default=None)
        p.add_argument("--D", dest="thr_D", type=int, default=None)
        p.add_argument("--d", dest="thr_d", type=int, default=None)

    p = sub.add_parser("partition", help="export the rate partition as CSV")
    common(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("capacity", help="per-block capacities for one realization")
    common(p)
    p.add_argument("--gains", default=None, help="g_s1,g_s2,g_1d,g_2d magnitudes")
    p.add_argument("--levels", default=None, help="s1,s2,d1,d2 state levels")
    p.add_argument("--pc-over-sigma2", dest="pc_over_sigma2", type=float, default=None)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("analyze", help="interval moments and delay bound for thresholds")
    common(p)
    thr_flags(p)
    p.add_argument("--block-ms", dest="block_ms", type=float, default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plan", help="enumerate and rank feasible thresholds")
    common(p)
    p.add_argument("--delay-req-blocks", dest="delay_req_blocks", type=float, default=None)
    p.add_argument("--block-ms", dest="block_ms", type=float, default=None)
    p.add_argument("--thr1-per-block", dest="thr1_per_block", type=float, default=None)
    p.add_argument("--full-lattice", dest="full_lattice", action="store_true")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="Monte Carlo run of one strategy")
    common(p)
    thr_flags(p)
    p.add_argument("--strategy", choices=("srp", "afp", "hybrid", "buffered"), default=None)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--block-ms", dest="block_ms", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid of SNRs x strategies")
    p.add_argument("--snr-list", dest="snr_list", default=None)
    p.add_argument("--strategies", default=None)
    p.add_argument("--states", type=int, default=None)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--block-ms", dest="block_ms", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    thr_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        return args.func(cfg)
    except CliError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except ValueError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
