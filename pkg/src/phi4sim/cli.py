"""Command-line entry point: experiment orchestration and CSV/manifest output.

Subcommands
-----------
constants   sweep eps, emit the renormalization-constant table
moments     Monte Carlo second-moment audit with z-scores against exact oracles
solve       integrate the remainder system, persist snapshots + a manifest
converge    matched-seed eps-sweep vs the limit system, emit Y-distances
validate    numerical checks on the smoothing symbol

All CSVs are comma-separated UTF-8 with Unix newlines and start with the
comment lines "# schema=1", "# version=...", "# config=<hash>", "# seed=<n>",
so a rerun from the same config and seed is byte-identical.  Failures exit
nonzero and print a single JSON object {"error": <reason>} on stderr.
"""

import argparse
import json
import os
import sys

import numpy as np
import yaml

from . import __version__
from .config import ExperimentConfig, config_hash, dump_config, load_config
from .diagrams import build_limit_upsilon, build_upsilon
from .errors import (BlowUpSignal, ConfigError, GrowthViolationError,
                     Phi4Error, SymbolError)
from .fourier import (FourierField, FrequencyLattice, save_field, set_threads,
                      validate_symbol)
from .renorm import build_renorm, coupling_lambda, sigma2_limit
from .gaussian import NoiseSeed
from .solver import SolverConfig, solve, y_norm, RemainderPair

EXIT_USAGE = 2
EXIT_VALIDATION = 3


def _fail(code, reason):
    sys.stderr.write(json.dumps({"error": reason}) + "\n")
    sys.exit(code)


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path, cfg, seed, columns, rows, trailer=None):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# schema=1\n")
        fh.write(f"# version={__version__}\n")
        fh.write(f"# config={config_hash(cfg)}\n")
        fh.write(f"# seed={seed}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
        for line in trailer or []:
            fh.write(f"# {line}\n")
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(cfg, out_dir, seed):
    eps_list = cfg.eps or [0.1]
    rows = []
    for eps in eps_list:
        Q = cfg.make_symbol(eps)
        try:
            rep = validate_symbol(Q)
        except SymbolError as exc:
            _fail(EXIT_VALIDATION, str(exc))
        rows.append((eps, rep.items["normalization"], rep.items["positivity"],
                     rep.items["growth"], rep.eta_hat, rep.passed))
        if not rep.items["growth"]:
            _write_csv(os.path.join(out_dir, "validate.csv"), cfg, seed,
                       ["eps", "normalization", "positivity", "growth",
                        "eta_hat", "passed"], rows)
            _fail(EXIT_VALIDATION, "growth violation")
    return _write_csv(os.path.join(out_dir, "validate.csv"), cfg, seed,
                      ["eps", "normalization", "positivity", "growth",
                       "eta_hat", "passed"], rows)


def cmd_constants(cfg, out_dir, seed):
    if not cfg.eps:
        _fail(EXIT_USAGE, "empty eps list")
    V = cfg.make_potential()
    rows = []
    for eps in cfg.eps:
        Q = cfg.make_symbol(eps)
        rep = validate_symbol(Q)
        if not rep.items["growth"]:
            _fail(EXIT_VALIDATION, "growth violation")
        K = cfg.cutoff_for(eps)
        try:
            rs = build_renorm(Q, V, K=K)
        except GrowthViolationError:
            _fail(EXIT_VALIDATION, "growth violation")
        rows.append((eps, K, rs.sigma2_eps, rs.lam, rs.C1, rs.C2, rs.C3,
                     rs.C_total))
    return _write_csv(os.path.join(out_dir, "constants.csv"), cfg, seed,
                      ["eps", "K", "sigma2_eps", "lambda", "C1", "C2", "C3",
                       "C_total"], rows)


def cmd_moments(cfg, out_dir, seed):
    from .diagrams import mc_moment

    if cfg.samples < 1:
        _fail(EXIT_USAGE, "zero samples")
    if not cfg.eps:
        _fail(EXIT_USAGE, "empty eps list")
    V = cfg.make_potential()
    noise = NoiseSeed(seed)
    rows = []
    worst = 0.0
    for eps in cfg.eps:
        Q = cfg.make_symbol(eps)
        K = cfg.cutoff_for(eps)
        grid = FrequencyLattice(K)
        rs = build_renorm(Q, V, K=K)
        for symbol in ("one", ("wick", 2), "c1", "c2"):
            for k in ((0, 0, 0), (1, 0, 0)):
                rep = mc_moment(symbol, k, 0.0, cfg.samples, noise, grid, Q,
                                V=V, renorm_set=rs)
                name = symbol if isinstance(symbol, str) else \
                    f"{symbol[0]}{symbol[1]}"
                z = rep.z if np.isfinite(rep.z) else 0.0
                worst = max(worst, abs(z))
                rows.append((eps, name, f"{k[0]};{k[1]};{k[2]}", rep.M,
                             rep.mean, rep.oracle, rep.se, rep.z))
    verdict = "pass" if worst <= 4.0 else "fail"
    return _write_csv(os.path.join(out_dir, "moments.csv"), cfg, seed,
                      ["eps", "symbol", "k", "M", "mean", "oracle", "se", "z"],
                      rows, trailer=[f"verdict={verdict}",
                                     f"max_abs_z={_fmt(float(worst))}"])


def _solver_config(cfg, eps, K, lam, n_half):
    s = dict(cfg.solver)
    s.pop("lam", None)
    return SolverConfig(eps=eps, lam=lam, K=K, n_half=n_half,
                        dt=float(s.pop("dt", 1e-3)), T=float(s.pop("T", 0.1)),
                        kappa=float(s.pop("kappa", 0.05)),
                        mode=s.pop("mode", "sequential"),
                        picard_iters=int(s.pop("picard_iters", 40)))


def _time_grid(dt, T):
    n = int(round(T / dt))
    return np.arange(n + 1) * dt


def _run_one(cfg, noise, eps, K, lam, V):
    Q = cfg.make_symbol(eps)
    grid = FrequencyLattice(K)
    sc = _solver_config(cfg, eps, K, lam if lam is not None else 1.0, V.n)
    t_grid = _time_grid(sc.dt, sc.T)
    if eps > 0:
        rs = build_renorm(Q, V, K=K)
        if lam is None:
            sc.lam = rs.lam
        U = build_upsilon(noise, grid, Q, V, eps, t_grid, rs)
    else:
        if lam is None:
            sc.lam = 1.0
        U = build_limit_upsilon(noise, grid, 1.0 / (K + 1), t_grid, lam=sc.lam)
    z = np.zeros((grid.n,) * 3, dtype=np.complex128)
    pair = solve(sc, U, z, z, V=V)
    return grid, sc, U, pair


def cmd_solve(cfg, out_dir, seed):
    if not cfg.eps:
        _fail(EXIT_USAGE, "empty eps list")
    V = cfg.make_potential()
    noise = NoiseSeed(seed)
    lam = cfg.solver.get("lam")
    manifest = {"version": __version__, "config": config_hash(cfg),
                "seed": int(seed), "runs": []}
    os.makedirs(out_dir, exist_ok=True)
    for eps in cfg.eps:
        K = cfg.cutoff_for(eps)
        entry = {"eps": float(eps), "K": int(K)}
        try:
            grid, sc, U, pair = _run_one(cfg, noise, eps, K, lam, V)
            entry["lam"] = float(sc.lam)
            entry["t_final"] = float(pair.t_grid[-1])
            entry["status"] = "ok"
            for tag, traj in (("v", pair.v_traj), ("w", pair.w_traj)):
                path = os.path.join(out_dir, f"{tag}_eps{eps:g}.fld")
                save_field(path, FourierField(grid, traj[-1], hermitian=True))
                entry[f"{tag}_snapshot"] = os.path.basename(path)
        except BlowUpSignal as sig:
            entry["status"] = "blowup"
            entry["blowup_time"] = float(sig.t)
        manifest["runs"].append(entry)
    path = os.path.join(out_dir, "manifest.yaml")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=True)
    dump_config(cfg, os.path.join(out_dir, "config.yaml"))
    return path


def cmd_converge(cfg, out_dir, seed):
    if not cfg.eps:
        _fail(EXIT_USAGE, "empty eps list")
    V = cfg.make_potential()
    noise = NoiseSeed(seed)
    eps_sorted = sorted(float(e) for e in cfg.eps)
    if any(e <= 0 for e in eps_sorted):
        _fail(EXIT_USAGE, "eps list must be positive (the limit run is implicit)")
    # one shared lattice so the runs couple through identical mode noise
    K = cfg.cutoff_for(min(eps_sorted)) if cfg.k_rule["kind"] == "inverse" \
        else int(cfg.k_rule["K"])
    lam = cfg.solver.get("lam")
    if lam is None:
        Qref = cfg.make_symbol(min(eps_sorted))
        lam = coupling_lambda(V, sigma2_limit(Qref))
    grid, sc0, U0, limit = _run_one(
        _with_fixed_K(cfg, K), noise, 0.0, K, lam, V)
    rows = []
    prev = None
    monotone = True
    for eps in sorted(eps_sorted, reverse=True):
        _, sc, U, pair = _run_one(_with_fixed_K(cfg, K), noise, eps, K, lam, V)
        stride = max(1, (len(pair.t_grid) - 1) // 8)
        dist = _y_distance(pair, limit, grid, sc.T, V.n, stride)
        if prev is not None and dist >= prev:
            monotone = False
        prev = dist
        rows.append((eps, K, lam, dist))
    verdict = "decreasing" if monotone else "non-monotone"
    return _write_csv(os.path.join(out_dir, "converge.csv"), cfg, seed,
                      ["eps", "K", "lambda", "y_distance"], rows,
                      trailer=[f"verdict={verdict}"])


def _with_fixed_K(cfg, K):
    d = {f: getattr(cfg, f) for f in ExperimentConfig.__dataclass_fields__}
    d["k_rule"] = {"kind": "fixed", "K": int(K)}
    return ExperimentConfig(**d)


def _y_distance(pair, limit, grid, T, n_half, stride):
    diff = RemainderPair(t_grid=pair.t_grid,
                         v_traj=pair.v_traj - limit.v_traj,
                         w_traj=pair.w_traj - limit.w_traj,
                         initial=pair.initial)
    return y_norm(diff, 0.0, T, n_half=n_half, grid=grid,
                  holder_stride=stride)


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    p = argparse.ArgumentParser(prog="phi4sim",
                                description="spectral toolkit for a smoothed "
                                            "stochastic quantization equation")
    p.add_argument("command", choices=["constants", "moments", "solve",
                                       "converge", "validate"])
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--threads", type=int, default=None,
                   help="FFT worker threads (fallback: PHI4_THREADS)")
    p.add_argument("--eps", default=None,
                   help="comma-separated eps list override")
    return p


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        _fail(EXIT_USAGE, f"config error: {exc}")
    if args.eps is not None:
        try:
            cfg.eps = [float(tok) for tok in args.eps.split(",") if tok.strip()]
        except ValueError:
            _fail(EXIT_USAGE, "bad --eps list")
    if args.threads is not None:
        set_threads(args.threads)
    elif os.environ.get("PHI4_THREADS"):
        set_threads(int(os.environ["PHI4_THREADS"]))
    seed = args.seed if args.seed is not None else int(cfg.seed)
    out_dir = args.out or cfg.out_dir
    handler = {"constants": cmd_constants, "moments": cmd_moments,
               "solve": cmd_solve, "converge": cmd_converge,
               "validate": cmd_validate}[args.command]
    try:
        path = handler(cfg, out_dir, seed)
    except Phi4Error as exc:
        _fail(1, str(exc))
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
