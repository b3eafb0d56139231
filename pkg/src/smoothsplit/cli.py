"""Command-line driver: solve, bench, compare and check.

Config files are flat JSON objects with dotted keys, e.g.

    {"algo": "sama", "problem.kind": "feasibility", "problem.n": 1000,
     "problem.angle": 1e-2, "max_iters": 5000, "eps": 1e-6, "output": "run.csv"}

Flags given on the command line override file values.
"""

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from smoothsplit import baselines
from smoothsplit.functions import CapabilityError
from smoothsplit.gap import IterateRecord, loglog_slope
from smoothsplit.problems import (
    InstanceError,
    build_box_lp,
    build_feasibility_instance,
    build_strongly_convex_qp,
    build_trivial,
)
from smoothsplit.sadmm import SadmmConfig, sadmm_conditions, sadmm_run
from smoothsplit.sama import ConfigError, SamaConfig, first_violation, sama_conditions, sama_run, sama_sc_conditions

ALGOS = ("sama", "sadmm", "sama-sc1", "sama-sc2", "ama", "admm", "dr", "admm-feas", "dykstra", "haugazeau")
PROBLEMS = ("feasibility", "box-lp", "sc-qp", "trivial")
SMOOTHED = ("sama", "sadmm", "sama-sc1", "sama-sc2")
_VARIANT = {"sama": "standard", "sama-sc1": "strongly_convex_rule1", "sama-sc2": "strongly_convex_rule2"}

DEFAULTS = {
    "algo": "sama",
    "problem.kind": "feasibility",
    "problem.n": None,
    "problem.angle": 1e-2,
    "problem.radius": None,
    "problem.mu": 1.0,
    "gamma1": None,
    "rho": None,
    "max_iters": 1000,
    "eps": 1e-6,
    "seed": 0,
    "record_gap": False,
    "paper_beta": False,
    "thin": 1,
    "lam0": 0.0,
    "output": None,
}

# flag dest -> config key
_FLAG_KEYS = {
    "algo": "algo",
    "problem": "problem.kind",
    "n": "problem.n",
    "angle": "problem.angle",
    "radius": "problem.radius",
    "mu": "problem.mu",
    "gamma1": "gamma1",
    "rho": "rho",
    "max_iter": "max_iters",
    "eps": "eps",
    "seed": "seed",
    "record_gap": "record_gap",
    "paper_beta": "paper_beta",
    "thin": "thin",
    "lam0": "lam0",
    "output": "output",
}


def load_config(path, args):
    cfg = dict(DEFAULTS)
    if path:
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(data)
    for dest, key in _FLAG_KEYS.items():
        val = getattr(args, dest, None)
        if val is not None:
            cfg[key] = val
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg["algo"] not in ALGOS:
        raise ConfigError(f"algo: unknown {cfg['algo']!r}; valid names: {', '.join(ALGOS)}")
    if cfg["problem.kind"] not in PROBLEMS:
        raise ConfigError(f"problem.kind: unknown {cfg['problem.kind']!r}; valid kinds: {', '.join(PROBLEMS)}")
    if not float(cfg["eps"]) > 0:
        raise ConfigError("eps: must be positive")
    if int(cfg["max_iters"]) < 1:
        raise ConfigError("max_iters: must be at least 1")
    if int(cfg["thin"]) < 1:
        raise ConfigError("thin: must be at least 1")
    for key in ("gamma1", "rho"):
        if cfg[key] is not None and not float(cfg[key]) > 0:
            raise ConfigError(f"{key}: must be positive")


def build_problem(cfg):
    kind = cfg["problem.kind"]
    n = cfg["problem.n"]
    if kind == "feasibility":
        return build_feasibility_instance(int(n or 1000), float(cfg["problem.angle"]), cfg["problem.radius"])
    if kind == "box-lp":
        return build_box_lp(int(n or 3), seed=int(cfg["seed"]))
    if kind == "sc-qp":
        return build_strongly_convex_qp(int(n or 3), mu=float(cfg["problem.mu"]), seed=int(cfg["seed"]))
    return build_trivial(int(n or 1))


def _start(problem):
    # the feasibility experiment starts from the all-ones point
    if problem.name == "feasibility":
        return np.ones(problem.A.in_dim)
    return None


def run(problem, cfg, stop_on_eps=True):
    algo = cfg["algo"]
    max_iters = int(cfg["max_iters"])
    eps = float(cfg["eps"])
    thin = int(cfg["thin"])
    lam0 = None
    if cfg["lam0"]:
        lam0 = np.full(problem.A.out_dim, float(cfg["lam0"]))
    gamma1 = None if cfg["gamma1"] is None else float(cfg["gamma1"])
    start = _start(problem)
    if algo in SMOOTHED:
        common = dict(
            gamma1=gamma1,
            center=start,
            max_iters=max_iters,
            eps=eps,
            record_gap=bool(cfg["record_gap"]),
            stop_on_eps=stop_on_eps,
            thin=thin,
            lam0=lam0,
        )
        if algo == "sadmm":
            return sadmm_run(problem, SadmmConfig(paper_beta=bool(cfg["paper_beta"]), **common))
        return sama_run(problem, SamaConfig(variant=_VARIANT[algo], **common))
    stop = eps if stop_on_eps else None
    rho = None if cfg["rho"] is None else float(cfg["rho"])
    if algo in ("admm", "ama"):
        v0 = start
        return baselines.run_general(problem, algo, max_iters, rho=rho, lam0=lam0, v0=v0, thin=thin, eps=stop)
    return baselines.run_feasibility(problem, algo, max_iters, start=start, lam0=lam0, thin=thin, eps=stop)


def write_csv(path, trace, timing=True):
    """Write atomically: a temp file in the target directory, then rename.

    timing=False leaves wall_time_ns empty so repeated runs give identical bytes.
    """
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(IterateRecord.CSV_HEADER + "\n")
        for rec in trace:
            row = rec.csv_row()
            if not timing:
                row = row.rsplit(",", 1)[0] + ","
            fh.write(row + "\n")
    os.replace(tmp, path)


def _fmt(x):
    if x is None:
        return "-"
    return f"{x:.3e}"


def cmd_solve(args):
    cfg = load_config(args.config, args)
    problem = build_problem(cfg)
    res = run(problem, cfg)
    if cfg["output"]:
        write_csv(cfg["output"], res.trace, timing=not args.no_timing)
    last = res.trace[-1]
    print(
        f"{cfg['algo']} on {problem.name}: k={last.k} primal={_fmt(last.primal_obj_residual)} "
        f"feas={_fmt(last.feasibility_gap)} dual={_fmt(last.dual_obj_residual)}"
    )
    print("eps-solution" if res.converged else "max iterations reached")
    return 0 if res.converged else 2


def _bench_one(job):
    cfg, out_dir, k_min, k_max, timing = job
    problem = build_problem(cfg)
    res = run(problem, cfg, stop_on_eps=False)
    name = f"{cfg['algo']}_angle{cfg['problem.angle']:g}.csv"
    write_csv(os.path.join(out_dir, name), res.trace, timing)
    ks = [r.k for r in res.trace]
    dual = [r.dual_obj_residual for r in res.trace]
    slope = loglog_slope(ks, dual, k_min, k_max)
    seconds = res.trace[-1].wall_time_ns / 1e9
    return cfg["algo"], cfg["problem.angle"], dual[-1], slope, seconds


def cmd_bench(args):
    base = load_config(args.config, args)
    algos = args.algos.split(",") if args.algos else ["sama", "sadmm", "admm-feas", "dykstra", "haugazeau"]
    for a in algos:
        if a not in ALGOS:
            raise ConfigError(f"algo: unknown {a!r}; valid names: {', '.join(ALGOS)}")
    angles = [float(a) for a in args.angles.split(",")] if args.angles else [1e-1, 1e-2, 1e-3, 1e-4]
    if args.max_iter is None:
        base["max_iters"] = 5000
    base["problem.kind"] = "feasibility"
    out_dir = args.out_dir
    k_max = args.k_max or int(base["max_iters"])
    jobs = []
    for angle in angles:
        for algo in algos:
            cfg = dict(base, algo=algo)
            cfg["problem.angle"] = angle
            jobs.append((cfg, out_dir, args.k_min, k_max, not args.no_timing))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]
    lines = ["algo,angle,final_dual_residual,slope,seconds"]
    for algo, angle, final, slope, sec in rows:
        lines.append(f"{algo},{angle!r},{final!r},{slope!r},{sec:.3f}")
        print(f"{algo:10s} angle={angle:<8g} final={_fmt(final)} slope={slope:.3f} time={sec:.2f}s")
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


def cmd_compare(args):
    base = load_config(args.config, args)
    algos = args.algos.split(",") if args.algos else ["sama", "sadmm", "admm-feas", "dr", "dykstra", "haugazeau"]
    problem = build_problem(base)
    status = 0
    for algo in algos:
        cfg = dict(base, algo=algo)
        try:
            validate(cfg)
            res = run(problem, cfg, stop_on_eps=False)
        except (ConfigError, CapabilityError) as exc:
            print(f"{algo:10s} skipped: {exc}")
            status = 1
            continue
        last = res.trace[-1]
        print(
            f"{algo:10s} k={last.k} primal={_fmt(last.primal_obj_residual)} "
            f"feas={_fmt(last.feasibility_gap)} dual={_fmt(last.dual_obj_residual)}"
        )
    return status


def _schedule_check(cfg, k_max):
    algo = cfg["algo"]
    g1 = 1.0 if cfg["gamma1"] is None else float(cfg["gamma1"])
    if algo == "sama":
        conds = sama_conditions(k_max, gamma1=g1)
    elif algo == "sadmm":
        conds = sadmm_conditions(k_max, gamma1=g1, paper_beta=bool(cfg["paper_beta"]))
    elif algo in ("sama-sc1", "sama-sc2"):
        conds = sama_sc_conditions(k_max, mu=float(cfg["problem.mu"]), rule="rule1" if algo == "sama-sc1" else "rule2")
    else:
        raise CapabilityError(f"no parameter schedule for {algo}")
    hit = first_violation(conds)
    if hit is None:
        print(f"schedule {algo}: all {len(conds)} conditions hold for k = 1..{k_max}")
        return 0
    print(f"schedule {algo}: condition {hit[0]!r} violated first at k={hit[1]}")
    return 2


def cmd_check(args):
    cfg = load_config(args.config, args)
    if args.kind == "schedule":
        return _schedule_check(cfg, args.k_max or 1000000)
    if cfg["algo"] not in SMOOTHED:
        raise CapabilityError(f"{args.kind} checks need a smoothed solver, not {cfg['algo']}")
    problem = build_problem(cfg)
    if problem.reference is None or problem.reference.lam_star is None:
        raise CapabilityError("instance has no reference solution")
    if args.kind == "gap-reduction":
        if not problem.has_conjugates:
            raise CapabilityError("gap-reduction needs conjugates of g and h")
        cfg["record_gap"] = True
    res = run(problem, cfg, stop_on_eps=False)
    if args.kind == "gap-reduction":
        bad = [v for v in res.violations if v[0] == "gap_reduction"]
        checked = sum(r.gap_red_lhs is not None for r in res.trace)
    else:
        bad = [v for v in res.violations if v[0] != "gap_reduction"]
        checked = len(res.trace)
    if args.output:
        write_csv(args.output, res.trace, timing=not args.no_timing)
    if bad:
        name, k, value, bound = bad[0]
        print(f"{args.kind}: {len(bad)} violations; first {name} at k={k}: {value!r} > {bound!r}")
        return 2
    slack = _min_slack(res.trace, args.kind)
    print(f"{args.kind}: pass over {res.trace[-1].k} iterations ({checked} recorded); min slack {slack:.3e}")
    return 0


def _min_slack(trace, kind):
    pairs = []
    for r in trace:
        if kind == "gap-reduction":
            pairs.append((r.gap_red_lhs, r.gap_red_rhs))
        else:
            pairs += [
                (r.primal_obj_residual, r.bound_primal),
                (r.feasibility_gap, r.bound_feas),
                (r.dual_obj_residual, r.bound_dual),
            ]
    gaps = [b - v for v, b in pairs if v is not None and b is not None]
    return min(gaps) if gaps else math.nan


def _add_common(p):
    p.add_argument("--config")
    p.add_argument("--algo")
    p.add_argument("--problem")
    p.add_argument("--n", type=int)
    p.add_argument("--angle", type=float)
    p.add_argument("--radius", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma1", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--thin", type=int)
    p.add_argument("--lam0", type=float)
    p.add_argument("--record-gap", action="store_const", const=True)
    p.add_argument("--paper-beta", action="store_const", const=True)
    p.add_argument("--output")
    p.add_argument("--no-timing", action="store_true", help="leave wall_time_ns empty in CSV output")


def make_parser():
    parser = argparse.ArgumentParser(prog="smoothsplit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver and write its trace")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="feasibility sweep over angles and algorithms")
    _add_common(p)
    p.add_argument("--angles", help="comma-separated tangent angles")
    p.add_argument("--algos", help="comma-separated algorithm names")
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--k-min", type=int, default=100)
    p.add_argument("--k-max", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", help="final residuals of several algorithms on one instance")
    _add_common(p)
    p.add_argument("--algos")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", help="schedule, bounds or gap-reduction checks")
    p.add_argument("kind", choices=("schedule", "bounds", "gap-reduction"))
    _add_common(p)
    p.add_argument("--k-max", type=int)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CapabilityError, InstanceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
