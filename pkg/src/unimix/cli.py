"""Command-line front end: synth, solve, eval, repro, gradcheck.

Every command is a pure function of its input files, flags and seed, and
each writes a JSON manifest capturing enough to re-execute it
bit-identically (flag snapshot, input hashes, artifact names, tool
version). Timing goes to stderr, never into artifacts.

Exit codes: 0 converged/success, 2 stopped on a time or step budget,
1 error.
"""

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__
from .channels import (
    apply,
    channel_sha,
    depolarizing,
    fidelity,
    generate_dataset,
    load_channel,
    load_dataset,
    random_channel,
    save_channel,
    save_dataset,
)
from .metrics import (
    batch_statistics,
    build_report,
    choi_distance,
    report_to_dict,
    write_histogram_csv,
    write_report_json,
)
from .objective import ObjectiveInstance, gradient_check
from .solver import FlowConfig, run, write_events_json, write_trajectory_csv

# Experiment presets are data: copy one, tweak fields, rerun.
PRESETS = {
    "example1-single": {
        "dim": 5, "true_components": 5, "pairs": 1, "initial_components": 10,
        "channel": "random",
    },
    "example1-multi": {
        "dim": 5, "true_components": 5, "pairs": 20, "initial_components": 10,
        "channel": "random",
    },
    "example2-depol": {
        "dim": 2, "depolarizing_p": 0.9, "pairs": 20, "initial_components": 8,
        "channel": "depolarizing",
    },
}

_CONVERGED = ("objective_tol", "grad_tol")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _default_out_dir():
    return os.environ.get("UNIMIX_OUT_DIR", ".")


def _write_manifest(path, command, argv, seed, config=None, inputs=None, artifacts=None,
                    extra=None):
    manifest = {
        "command": command,
        "version": __version__,
        "argv": list(argv),
        "seed": seed,
        "config": config or {},
        "inputs": {name: {"path": str(p), "sha256": _sha256(p)}
                   for name, p in (inputs or {}).items()},
        "artifacts": artifacts or {},
    }
    if extra:
        manifest.update(extra)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return manifest


def _add_flow_flags(parser):
    cfg = FlowConfig()
    parser.add_argument("--abs-tol", type=float, default=cfg.abs_tol)
    parser.add_argument("--rel-tol", type=float, default=cfg.rel_tol)
    parser.add_argument("--objective-tol", type=float, default=cfg.objective_tol)
    parser.add_argument("--grad-tol", type=float, default=cfg.grad_tol)
    parser.add_argument("--p-zero-threshold", type=float, default=cfg.p_zero_threshold)
    parser.add_argument("--unitarity-tol", type=float, default=cfg.unitarity_tol)
    parser.add_argument("--renorm-interval", type=int, default=cfg.renorm_interval)
    parser.add_argument("--t-max", type=float, default=cfg.t_max)
    parser.add_argument("--max-steps", type=int, default=cfg.max_steps)
    parser.add_argument("--samples-per-decade", type=int, default=cfg.samples_per_decade)


def _config_from_args(args, seed):
    return FlowConfig(
        abs_tol=args.abs_tol, rel_tol=args.rel_tol,
        objective_tol=args.objective_tol, grad_tol=args.grad_tol,
        p_zero_threshold=args.p_zero_threshold, unitarity_tol=args.unitarity_tol,
        renorm_interval=args.renorm_interval, t_max=args.t_max,
        max_steps=args.max_steps, seed=seed,
        samples_per_decade=args.samples_per_decade,
    )


def cmd_synth(args, argv):
    channel_rng = np.random.default_rng([args.seed, 0])
    if args.depolarizing is not None:
        chan = depolarizing(args.depolarizing)
    else:
        chan = random_channel(args.dim, args.components, channel_rng)
    dataset = generate_dataset(chan, args.pairs, np.random.default_rng([args.seed, 1]),
                               seed=args.seed)
    save_channel(chan, args.channel_out)
    save_dataset(dataset, args.dataset_out)
    manifest = _write_manifest(
        None, "synth", argv, args.seed,
        artifacts={"channel": str(args.channel_out), "dataset": str(args.dataset_out)},
        extra={"dim": chan.dim, "components": chan.n_components, "pairs": args.pairs,
               "channel_sha": channel_sha(chan)},
    )
    json.dump(manifest, sys.stdout, indent=1, sort_keys=True)
    print()
    return 0


def _solve_into(out_dir, dataset_path, R, cfg, true_channel_path=None):
    os.makedirs(out_dir, exist_ok=True)
    dataset = load_dataset(dataset_path)
    inst = ObjectiveInstance.from_pairs(dataset.pairs)
    true_chan = load_channel(true_channel_path) if true_channel_path else None
    result = run(inst, cfg, n_components=R)
    report = build_report(result, inst=inst, true_channel=true_chan, cfg=cfg)
    save_channel(result.channel, os.path.join(out_dir, "result_channel.json"))
    write_trajectory_csv(result.record, os.path.join(out_dir, "trajectory.csv"))
    write_events_json(result.record, os.path.join(out_dir, "events.json"))
    write_report_json(report, os.path.join(out_dir, "report.json"))
    return result, report


def cmd_solve(args, argv):
    cfg = _config_from_args(args, args.seed)
    out_dir = args.out_dir
    result, report = _solve_into(out_dir, args.dataset, args.initial_components, cfg,
                                 args.true_channel)
    inputs = {"dataset": args.dataset}
    if args.true_channel:
        inputs["true_channel"] = args.true_channel
    _write_manifest(
        os.path.join(out_dir, "manifest.json"), "solve", argv, args.seed,
        config=asdict(cfg), inputs=inputs,
        artifacts={"channel": "result_channel.json", "trajectory": "trajectory.csv",
                   "events": "events.json", "report": "report.json"},
        extra={"initial_components": args.initial_components},
    )
    print(f"stop_reason={result.stop_reason} final_objective={result.final_objective:.3e} "
          f"final_rank={report.final_rank} restarts={report.restarts}", file=sys.stderr)
    print(f"wall_time={result.wall_time:.2f}s steps={result.n_steps}", file=sys.stderr)
    return 0 if result.stop_reason in _CONVERGED else 2


def cmd_eval(args, argv):
    true_chan = load_channel(args.true_channel)
    recovered = load_channel(args.recovered)
    report_fields = {
        "choi_distance": choi_distance(true_chan, recovered),
        "fidelity_per_pair": [],
    }
    if args.dataset:
        dataset = load_dataset(args.dataset)
        for pair in dataset.pairs:
            report_fields["fidelity_per_pair"].append(
                float(fidelity(pair.sigma, apply(recovered, pair.rho))))
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report_fields, fh, indent=1, sort_keys=True)
        fh.write("\n")
    inputs = {"true_channel": args.true_channel, "recovered": args.recovered}
    if args.dataset:
        inputs["dataset"] = args.dataset
    _write_manifest(args.out + ".manifest.json", "eval", argv, None, inputs=inputs,
                    artifacts={"report": os.path.basename(args.out)})
    print(f"choi_distance={report_fields['choi_distance']:.6e}", file=sys.stderr)
    return 0


def _repro_worker(task):
    """One repro run; module-level so process pools can pickle it."""
    (out_dir, dataset_path, true_path, R, cfg_dict, run_seed) = task
    cfg = FlowConfig(**cfg_dict)
    cfg.seed = run_seed
    result, report = _solve_into(out_dir, dataset_path, R, cfg, true_path)
    return report_to_dict(report), result.wall_time


def cmd_repro(args, argv):
    if args.experiment not in PRESETS:
        raise ValueError(f"unknown experiment '{args.experiment}'; "
                         f"choose from {sorted(PRESETS)}")
    preset = dict(PRESETS[args.experiment])
    if args.pairs is not None:
        preset["pairs"] = args.pairs
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)

    channel_rng = np.random.default_rng([args.seed, 0])
    if preset["channel"] == "depolarizing":
        chan = depolarizing(preset["depolarizing_p"])
    else:
        chan = random_channel(preset["dim"], preset["true_components"], channel_rng)
    dataset = generate_dataset(chan, preset["pairs"], np.random.default_rng([args.seed, 1]),
                               seed=args.seed)
    true_path = os.path.join(out_dir, "true_channel.json")
    dataset_path = os.path.join(out_dir, "dataset.json")
    save_channel(chan, true_path)
    save_dataset(dataset, dataset_path)

    cfg = _config_from_args(args, args.seed)
    cfg_dict = asdict(cfg)
    tasks = []
    for idx in range(args.runs):
        run_dir = os.path.join(out_dir, f"run_{idx:03d}")
        tasks.append((run_dir, dataset_path, true_path,
                      preset["initial_components"], cfg_dict, [args.seed, 2 + idx]))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_repro_worker, tasks))
    else:
        outcomes = [_repro_worker(t) for t in tasks]

    reports = [rep for rep, _ in outcomes]
    distances = [rep["choi_distance"] for rep in reports]
    summary = batch_statistics(distances)
    batch = {
        "experiment": args.experiment,
        "preset": preset,
        "runs": args.runs,
        "choi_distances": distances,
        "min": summary.min, "median": summary.median, "max": summary.max,
        "reports": reports,
    }
    with open(os.path.join(out_dir, "batch.json"), "w", encoding="utf-8") as fh:
        json.dump(batch, fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_histogram_csv(summary, os.path.join(out_dir, "histogram.csv"))
    _write_manifest(
        os.path.join(out_dir, "manifest.json"), "repro", argv, args.seed,
        config=cfg_dict,
        artifacts={"true_channel": "true_channel.json", "dataset": "dataset.json",
                   "batch": "batch.json", "histogram": "histogram.csv",
                   "runs": [f"run_{i:03d}" for i in range(args.runs)]},
        extra={"experiment": args.experiment, "preset": preset},
    )
    total_wall = sum(w for _, w in outcomes)
    print(f"{args.experiment}: {args.runs} runs, choi distance "
          f"min={summary.min:.3e} median={summary.median:.3e} max={summary.max:.3e} "
          f"(total solver time {total_wall:.1f}s)", file=sys.stderr)
    return 0


def cmd_gradcheck(args, argv):
    worst = 0.0
    rng = np.random.default_rng(args.seed)
    for n in (2, 3, 5):
        for r in (1, 2, 5):
            for m in (1, 3):
                err = gradient_check(n, r, m, args.trials, rng, h=args.step)
                worst = max(worst, err)
                print(f"n={n} r={r} m={m}: max relative error {err:.3e}")
    print(f"overall max relative error: {worst:.3e}")
    return 0 if worst <= args.tolerance else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="unimix",
        description="Reconstruct mixed-unitary quantum channels by projected gradient flow.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a random channel and a dataset")
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--components", type=int, default=5)
    p.add_argument("--depolarizing", type=float, default=None, metavar="P",
                   help="use the qubit depolarizing channel with this probability")
    p.add_argument("--pairs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channel-out", default=None)
    p.add_argument("--dataset-out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve", help="reconstruct a channel from a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--initial-components", "-R", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--true-channel", default=None,
                   help="optional reference channel for the Choi distance in the report")
    p.add_argument("--out-dir", default=None)
    _add_flow_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="compare a recovered channel against the truth")
    p.add_argument("--true-channel", required=True)
    p.add_argument("--recovered", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("repro", help="run a preset experiment ensemble")
    p.add_argument("--experiment", required=True, choices=sorted(PRESETS))
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=None,
                   help="override the preset's number of data pairs")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default=None)
    _add_flow_flags(p)
    p.set_defaults(func=cmd_repro)

    p = sub.add_parser("gradcheck", help="finite-difference check of the gradients")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def _fill_default_paths(args):
    base = _default_out_dir()
    if getattr(args, "out_dir", "") is None:
        args.out_dir = base
    if getattr(args, "channel_out", "") is None:
        args.channel_out = os.path.join(base, "channel.json")
    if getattr(args, "dataset_out", "") is None:
        args.dataset_out = os.path.join(base, "dataset.json")
    if getattr(args, "out", "") is None:
        args.out = os.path.join(base, "eval_report.json")


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    _fill_default_paths(args)
    try:
        return args.func(args, argv)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
