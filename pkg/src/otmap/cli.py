"""Command-line entry point.

Subcommands: train, eval, baseline, approx, plot, audit.  Errors print a
single machine-parsable line on stderr; exit codes are 0 on success, 2
for usage or config problems, 3 for data problems, 4 for numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import nn
from .data import GroundTruthMap, SourceSpec, apply_map, load_csv, sample, save_csv
from .discrete import solve_assignment, save_matching_csv
from .errors import ConfigError, DataError, NumericError
from .evaluate import EvalReport, approx_harness, compare_to_discrete, holdout_mse, save_eval_report
from .figures import emit_figures
from .lipschitz import audit_lipschitz
from .seeding import tagged_spawn
from .train import TrainConfig, load_config, read_metrics, save_config, train, with_seed

BENCHMARK_MAPS = {"exp": "coordwise_exp", "square": "coordwise_signed_square"}
TAG_DATA = 0xDA7A

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def build_benchmark(kind: str, dim: int, n: int, eval_size: int, seed: int):
    """Deterministic benchmark clouds: training pair, held-out pair, ground truth.

    Source and target draws use independent streams; the held-out target
    is the exact image of the held-out source, so map-quality metrics have
    no sampling floor.
    """
    seeds = tagged_spawn(seed, TAG_DATA, 4)
    if kind in BENCHMARK_MAPS:
        spec = SourceSpec("uniform_cube", dim=dim)
        gt = GroundTruthMap(BENCHMARK_MAPS[kind])
        p = sample(spec, n, seeds[0])
        q = apply_map(gt, sample(spec, n, seeds[1]))
        p_eval = sample(spec, eval_size, seeds[2])
        q_eval = apply_map(gt, p_eval)
        return p, q, gt, (p_eval, q_eval)
    if kind == "two_moons":
        if dim != 2:
            raise ConfigError("two_moons benchmark is two-dimensional")
        upper = SourceSpec("two_moons", moons="upper")
        lower = SourceSpec("two_moons", moons="lower")
        p = sample(upper, n, seeds[0])
        q = sample(lower, n, seeds[1])
        p_eval = sample(upper, eval_size, seeds[2])
        q_eval = sample(lower, eval_size, seeds[3])
        return p, q, None, (p_eval, q_eval)
    raise ConfigError(f"unknown benchmark {kind!r}; have exp, square, two_moons")


def _cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.x or args.y:
        if not (args.x and args.y):
            raise ConfigError("--x and --y must be given together")
        p = load_csv(args.x)
        q = load_csv(args.y)
        gt, eval_clouds = None, None
        manifest = {"benchmark": None, "x": str(args.x), "y": str(args.y)}
    else:
        p, q, gt, eval_clouds = build_benchmark(
            args.benchmark, args.dim, args.n, cfg.eval_size, cfg.seed
        )
        manifest = {"benchmark": args.benchmark, "x": None, "y": None}
    manifest.update({"dim": int(p.shape[1]), "n": int(p.shape[0]), "seed": cfg.seed})

    save_config(cfg, out / "config.cfg")
    save_csv(p, out / "P.csv", seed=cfg.seed)
    save_csv(q, out / "Q.csv", seed=cfg.seed)
    state = train(p, q, cfg, ground_truth=gt, eval_clouds=eval_clouds, run_dir=out)
    save_csv(nn.forward(state.generator, p), out / "pushforward.csv", seed=cfg.seed)
    if eval_clouds is not None:
        save_csv(eval_clouds[0], out / "P_eval.csv", seed=cfg.seed)
        save_csv(eval_clouds[1], out / "Q_eval.csv", seed=cfg.seed)
    manifest["steps"] = state.outer_step
    with open(out / "run.json", "w", encoding="ascii", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=0)
        fh.write("\n")
    print(f"trained {state.outer_step} outer steps -> {out}")
    return 0


def _load_run(run_dir: Path):
    if not run_dir.is_dir():
        raise DataError(f"{run_dir}: not a run directory")
    missing = [f for f in ("run.json", "generator.ckpt", "metrics.csv") if not (run_dir / f).exists()]
    if missing:
        raise DataError(f"{run_dir}: missing inputs: {', '.join(missing)}")
    with open(run_dir / "run.json", encoding="ascii") as fh:
        manifest = json.load(fh)
    generator = nn.load_checkpoint(run_dir / "generator.ckpt")
    return manifest, generator


def _cmd_eval(args) -> int:
    run_dir = Path(args.run)
    manifest, generator = _load_run(run_dir)
    gen_map = nn.as_map(generator)
    metrics = read_metrics(run_dir / "metrics.csv")
    steps = int(metrics["step"][-1]) if metrics["step"].size else 0

    seed = args.seed if args.seed is not None else manifest["seed"] + 1
    benchmark = manifest.get("benchmark")
    if benchmark in BENCHMARK_MAPS:
        gt = GroundTruthMap(BENCHMARK_MAPS[benchmark])
        spec = SourceSpec("uniform_cube", dim=manifest["dim"])
        mse = holdout_mse(gen_map, gt, spec, args.eval_n, seed)
        p_eval = sample(spec, args.eval_n, seed)
        q_eval = apply_map(gt, p_eval)
    else:
        mse = float("nan")
        if benchmark == "two_moons":
            p_eval = sample(SourceSpec("two_moons", moons="upper"), args.eval_n, seed)
            q_eval = sample(SourceSpec("two_moons", moons="lower"), args.eval_n, seed + 1)
        else:
            p_eval = load_csv(run_dir / "P.csv")[: args.eval_n]
            q_eval = load_csv(run_dir / "Q.csv")[: args.eval_n]
    frag = compare_to_discrete(gen_map, p_eval, q_eval)
    report = EvalReport(
        n=manifest["n"], d=manifest["dim"], seed=manifest["seed"], steps=steps,
        holdout_mse=mse, **frag,
    )
    out = Path(args.out) if args.out else run_dir / "eval_report.csv"
    save_eval_report(report, out)
    print(
        f"holdout_mse={report.holdout_mse:.6g} w1_gen_vs_target={report.w1_gen_vs_target:.6g} "
        f"quad_cost_gen={report.quad_cost_gen:.6g} quad_cost_matching={report.quad_cost_matching:.6g}"
    )
    return 0


def _cmd_baseline(args) -> int:
    x = load_csv(args.x)
    y = load_csv(args.y)
    kind = {"w1": "euclidean", "w2": "squared_euclidean"}[args.cost]
    try:
        matching = solve_assignment(x, y, kind)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if args.out:
        save_matching_csv(matching, x, y, args.out)
    print(f"cost={matching.cost!r} kind={kind} n={x.shape[0]}")
    return 0


def _cmd_approx(args) -> int:
    probe = approx_harness(
        args.target, eps_target=args.eps, width=args.width,
        steps=args.steps, seed=args.seed if args.seed is not None else 0,
    )
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write("target,width,steps,sup_error\n")
            fh.write(f"{probe.target_kind},{probe.width},{probe.steps_used},{probe.sup_error!r}\n")
    print(f"target={probe.target_kind} width={probe.width} sup_error={probe.sup_error:.6g}")
    return 0


def _cmd_plot(args) -> int:
    written = emit_figures(args.run, out_dir=args.out)
    print("\n".join(str(p) for p in written))
    return 0


def _cmd_audit(args) -> int:
    try:
        params = nn.load_checkpoint(args.checkpoint)
    except OSError as exc:
        raise DataError(f"{args.checkpoint}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    report = audit_lipschitz(
        params,
        bounds=(args.lo, args.hi),
        n_pairs=args.pairs,
        seed=args.seed if args.seed is not None else 0,
    )
    print(
        f"max_ratio={report.max_ratio!r} pairs={report.samples} "
        f"feasible={int(report.feasible)} layer_norms={['%.6f' % v for v in report.layer_norms]}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="seed override")
        sp.add_argument("--config", default=None, help="flat key=value training config")
        sp.add_argument("--out", default=None, help="output file or directory")

    sp = sub.add_parser("train", help="train a transport map")
    common(sp)
    sp.add_argument("--benchmark", default="exp", help="exp | square | two_moons")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--n", type=int, default=4096, help="training sample size per cloud")
    sp.add_argument("--x", default=None, help="source cloud CSV (overrides --benchmark)")
    sp.add_argument("--y", default=None, help="target cloud CSV")
    sp.set_defaults(fn=_cmd_train, requires_out=True)

    sp = sub.add_parser("eval", help="evaluate a finished run")
    common(sp)
    sp.add_argument("--run", required=True, help="run directory from train")
    sp.add_argument("--eval-n", type=int, default=500)
    sp.set_defaults(fn=_cmd_eval)

    sp = sub.add_parser("baseline", help="exact discrete matching between two clouds")
    common(sp)
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--cost", choices=("w1", "w2"), default="w2")
    sp.set_defaults(fn=_cmd_baseline)

    sp = sub.add_parser("approx", help="fit a known 1-Lipschitz target")
    common(sp)
    sp.add_argument("--target", default="norm")
    sp.add_argument("--width", type=int, default=32)
    sp.add_argument("--steps", type=int, default=800)
    sp.add_argument("--eps", type=float, default=0.0)
    sp.set_defaults(fn=_cmd_approx)

    sp = sub.add_parser("plot", help="emit report figures for a run")
    common(sp)
    sp.add_argument("--run", required=True)
    sp.set_defaults(fn=_cmd_plot)

    sp = sub.add_parser("audit", help="empirical Lipschitz audit of a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--pairs", type=int, default=100_000)
    sp.add_argument("--lo", type=float, default=-1.0)
    sp.add_argument("--hi", type=float, default=1.0)
    sp.set_defaults(fn=_cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "requires_out", False) and not args.out:
        parser.error("train requires --out")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
