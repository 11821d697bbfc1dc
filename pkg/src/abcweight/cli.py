"""Command line entry point: ``abcweight <command> [options]``.

Exit codes: 0 on success, 2 on invalid configuration or arguments, 1 on any
other failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .divergence import estimate_hellinger
from .harness.config import ConfigError, PRESETS, load_config, preset
from .harness.problems import schedule_for
from . import models

log = logging.getLogger("abcweight")


def _config(args, **overrides):
    if args.config is None:
        raise ConfigError("config", "--config PATH or a preset name is required")
    if args.config in PRESETS and not Path(args.config).exists():
        cfg = preset(args.config)
    elif not Path(args.config).is_file():
        raise ConfigError("config", f"no such file or preset: {args.config}")
    else:
        cfg = load_config(args.config)
    changes = dict(overrides)
    if args.seed is not None:
        changes["seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def _out_dir(args) -> Path:
    return Path(args.out_dir or ".")


def cmd_simulate(args):
    if args.config is None and args.model:
        args.config = f"{args.model}_desk"
    cfg = _config(args)
    if args.model and cfg.model != args.model:
        raise ConfigError("model", f"--model {args.model} disagrees with config model {cfg.model}")
    seed = int(rngmod.simulation_seeds(cfg.seed, 1, rngmod.OBSERVED, 0)[0])
    theta = cfg.theta_star
    if cfg.model == "toy":
        draws = models.simulate_toy(theta[0], cfg.n, seed)
        header = ["t", "species_1"]
        rows = [[i + 1, repr(float(x))] for i, x in enumerate(draws)]
    else:
        schedule = schedule_for(cfg)
        if cfg.model == "death":
            traj = models.simulate_death(theta[0], theta[1], schedule, seed, cfg.initial[0],
                                         cfg.event_cap)
        elif cfg.model == "dimerization":
            traj = models.simulate_dimerization(theta, schedule, seed, cfg.initial, cfg.event_cap)
        else:
            traj = models.ssa_simulate(models.diffusion_network(len(cfg.initial)), theta,
                                       cfg.initial, schedule, seed, cfg.event_cap)
        s = traj.states.shape[1]
        header = ["t"] + [f"species_{i + 1}" for i in range(s)]
        if traj.aux is not None:
            header.append("z")
        rows = []
        for j, t in enumerate(traj.times):
            row = [repr(float(t))] + [int(x) for x in traj.states[j]]
            if traj.aux is not None:
                row.append(repr(float(traj.aux)))
            rows.append(row)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if args.out:
            out.close()


def cmd_infer(args):
    from .harness.runner import run_experiment
    overrides = {"method": args.method} if args.method else {}
    cfg = _config(args, **overrides)
    base = _out_dir(args)
    summary = []
    for rep in range(cfg.repeats):
        art = run_experiment(cfg, base / f"repeat_{rep:02d}", rep)
        summary.append({"repeat": rep, **{k: art.result.metrics[k]
                                          for k in ("hellinger", "mean_bias", "mode_bias")}})
        print(json.dumps(summary[-1]))


def cmd_metrics(args):
    from .harness.config import from_dict
    from .harness.metrics import averaged_hellinger, metric_bias
    from .harness.runner import read_generation_csv, verify_manifest
    from .smc import Population, PriorSpec
    run_dir = Path(args.run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    cfg = from_dict(manifest["config"])
    last = max(int(p.stem.split("_")[1]) for p in run_dir.glob("generation_*.csv"))
    theta, v, dist = read_generation_csv(run_dir / f"generation_{last}.csv")
    pop = Population(last, np.log10(theta), v, np.empty((len(v), 0)), dist)
    prior = PriorSpec(np.array(cfg.prior_lo), np.array(cfg.prior_hi))
    seed = manifest["seeds"]["run"] if args.seed is None else args.seed
    g = rngmod.generator(seed, rngmod.METRIC)
    hell, _ = averaged_hellinger(pop, prior, cfg.n_ref, cfg.k, g, cfg.exponent_dim,
                                 cfg.metric_draws)
    mean_bias, mode_bias = metric_bias(pop, cfg.theta_star, g)
    print(json.dumps({"generation": last, "hellinger": hell, "mean_bias": mean_bias,
                      "mode_bias": mode_bias, "manifest_ok": verify_manifest(run_dir)}))


def _table(args, table_id):
    from .harness.tables import HEADER, reproduce_table, summarize_table
    problems = args.problems.split(",") if args.problems else None
    kw = {"problems": problems} if problems else {}
    rows = reproduce_table(table_id, args.scale, args.seed or 0, replicates=args.replicates, **kw)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"table{table_id}_{args.scale}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(r.as_list() for r in rows)
    print(json.dumps(summarize_table(rows), indent=2))
    print(f"wrote {path}")


def cmd_scan_line(args):
    from .adapt import make_context, optimize_weights, scan_line
    from .harness.problems import build_problem
    from .harness.runner import repeat_seed, settings_for
    from .smc import GenerationPool, KernelSpec, simulate_pool
    cfg = _config(args)
    problem = build_problem(cfg)
    seed = repeat_seed(cfg.seed, 0)
    settings = settings_for(cfg, seed, generations=1)
    u, S = simulate_pool(problem, settings, 1, None,
                         KernelSpec.isotropic(cfg.proposal_sd, problem.prior.dim))
    ctx = make_context(GenerationPool(1, u, S, problem.observed, settings.n_keep,
                                      problem.prior, seed), cfg.k, cfg.exponent_dim)
    best = optimize_weights(ctx, cfg.optimizer, rngmod.generator(seed, 1, rngmod.OPTIMIZER))
    r, L = scan_line(best.weights, ctx, args.radius, args.points,
                     rngmod.generator(seed, rngmod.ORDERING))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["r", "L", "valid"])
        for ri, li in zip(r, L):
            w.writerow([repr(float(ri)), "" if np.isnan(li) else repr(float(li)),
                        int(not np.isnan(li))])
    finally:
        if args.out:
            out.close()


def cmd_weights_consistency(args):
    from .harness.tables import consistency_study
    cfg = _config(args)
    res = consistency_study(cfg, args.runs)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    kappa = res.weights.shape[1]
    with (out / "weights_consistency.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "seed", "kind"] + [f"w_{i + 1}" for i in range(kappa)])
        for i, s in enumerate(res.seeds):
            w.writerow([i, s, "weights"] + [repr(float(x)) for x in res.weights[i]])
            w.writerow([i, s, "centered"] + [repr(float(x)) for x in res.centered[i]])
        w.writerow(["mean", "", "weights"] + [repr(float(x)) for x in res.mean])
        w.writerow(["mean", "", "centered"] + [repr(float(x)) for x in res.centered_mean])
    print(f"argmax of mean-centered trace: statistic {int(np.argmax(res.centered_mean)) + 1}")


def _read_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))


def cmd_divergence(args):
    X = _read_matrix(args.x)
    Y = _read_matrix(args.y)
    print(f"{estimate_hellinger(X, Y, args.k).value:.6f}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config path or preset name")
    common.add_argument("--seed", type=int, help="root seed (overrides the config)")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="numba worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="abcweight", parents=[common],
                                description="Adaptive summary weighting for ABC-SMC")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate the model at theta_star")
    s.add_argument("--model", choices=("toy", "death", "dimerization", "diffusion"))
    s.add_argument("--out", help="CSV output path (default stdout)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("infer", parents=[common], help="run inference and write artifacts")
    s.add_argument("--method", choices=("adaptive", "uniform", "scaled", "semiauto", "subset"))
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("metrics", parents=[common], help="recompute metrics of a run directory")
    s.add_argument("run_dir")
    s.set_defaults(func=cmd_metrics)

    for name, tid in (("table1", 1), ("table2", 2)):
        s = sub.add_parser(name, parents=[common], help=("equal-compute comparison" if tid == 1
                                                       else "single-generation method comparison"))
        s.add_argument("--scale", choices=("desk", "full"), default="desk")
        s.add_argument("--problems", help="comma-separated subset of toy,death,dimerization,diffusion")
        s.add_argument("--replicates", type=int)
        s.set_defaults(func=lambda a, tid=tid: _table(a, tid))

    s = sub.add_parser("scan-line", parents=[common], help="objective along a random line")
    s.add_argument("--radius", type=float, default=1e-4)
    s.add_argument("--points", type=int, default=200)
    s.add_argument("--out", help="CSV output path (default stdout)")
    s.set_defaults(func=cmd_scan_line)

    s = sub.add_parser("weights-consistency", parents=[common], help="repeat the weight search")
    s.add_argument("--runs", type=int, default=40)
    s.set_defaults(func=cmd_weights_consistency)

    s = sub.add_parser("divergence", parents=[common], help="Hellinger estimate of two CSV samples")
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--k", type=int, default=4)
    s.set_defaults(func=cmd_divergence)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads and args.threads > 1:
        import numba
        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
