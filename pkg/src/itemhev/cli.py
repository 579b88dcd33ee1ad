"""Command-line pipeline: segment, cluster, train-recognizer, simulate, train-agents, evaluate, compare, report.

Exit status is 0 on success, 2 on usage errors and 1 on any runtime
failure. Every command writing into ``--out`` also writes a
``manifest.json`` listing its arguments, config hash and the digest of each
file it produced; ``itemhev --replay MANIFEST --out DIR`` re-runs it.
Relative config and cycle paths are resolved against ``$ITEMHEV_CONFIG_ROOT``
when they do not exist relative to the working directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import CONFIG_ROOT_ENV, Config, config_hash, dump_config, load_config, resolve_cycle
from .cycles import bundled_names, extract_features, segment

MANIFEST = "manifest.json"


# -- helpers ----------------------------------------------------------------

def _out_dir(path: str) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _finish(out: Path, manifest, files) -> None:
    from .report import now

    for f in sorted({Path(f) for f in files}):
        manifest.add_artifact(f, out)
    manifest.finished = now()
    manifest.write(out / MANIFEST)


def _manifest(args, cfg: Config | None, argv: list[str]):
    from .report import RunManifest, now

    return RunManifest(command=args.command, argv=list(argv), config_hash=config_hash(cfg) if cfg else "",
                       started=now())


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _cycles(names: list[str] | None, default: list[str]):
    return [resolve_cycle(n) for n in (names or default)]


def _config_text(cfg: Config, out: Path) -> Path:
    path = out / "config.yaml"
    dump_config(cfg, path)
    return path


# -- subcommands ------------------------------------------------------------

def cmd_segment(args, cfg, argv) -> list[Path]:
    out = _out_dir(args.out)
    path = out / "microtrips.csv"
    count = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "start_index", "start_s", "avg_speed_mps", "max_accel_mps2"])
        for c in _cycles(args.cycles, bundled_names()):
            for trip in segment(c, args.window):
                f = extract_features(trip, c.dt)
                w.writerow([c.name, trip.start_index, repr(trip.start_index * c.dt), repr(f.avg_speed), repr(f.max_accel)])
                count += 1
    print(f"{count} micro-trips written to {path}")
    return [path]


def _read_trips(path: str) -> tuple[list[tuple[str, int]], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no micro-trips")
    ids = [(r["cycle"], int(r["start_index"])) for r in rows]
    feats = np.array([[float(r["avg_speed_mps"]), float(r["max_accel_mps2"])] for r in rows])
    return ids, feats


def cmd_cluster(args, cfg, argv) -> list[Path]:
    from .clustering import fit_features, save_model

    out = _out_dir(args.out)
    ids, feats = _read_trips(args.trips)
    model, labels = fit_features(feats, k=args.k, seed=args.seed)
    mpath = out / "clusters.txt"
    save_model(model, mpath)
    lpath = out / "labels.csv"
    with open(lpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "start_index", "label"])
        for (name, start), lab in zip(ids, labels):
            w.writerow([name, start, int(lab)])
    counts = np.bincount(labels, minlength=args.k)
    print(f"k={args.k} inertia={model.inertia:.6g} iterations={model.n_iter} counts={counts.tolist()}")
    return [mpath, lpath]


def cmd_train_recognizer(args, cfg, argv) -> list[Path]:
    from .recognizer import build_recognizer

    rc = cfg.recognizer
    out = _out_dir(args.out)
    rec, report, ds = build_recognizer(
        _cycles(None, rc.cycles), window_s=rc.window_s, k=rc.k, cluster_seed=rc.cluster_seed,
        val_fraction=rc.val_fraction, split_seed=rc.split_seed, train_seed=rc.train_seed,
        epochs=rc.epochs, batch=rc.batch, lr=rc.lr, hidden=tuple(rc.hidden))
    rec.update_mode = rc.update_mode
    bundle = out / "recognizer"
    rec.save(bundle)
    stats = {"n_trips": int(len(ds.inputs)), "val_accuracy": report.val_accuracy,
             "train_accuracy": report.train_accuracy, "class_counts": np.bincount(ds.labels, minlength=rc.k).tolist()}
    spath = _write_json(out / "recognizer_report.json", stats)
    print(f"validation accuracy {report.val_accuracy:.4f} on {len(ds.val_idx)} held-out micro-trips")
    return [spath, _config_text(cfg, out)] + sorted(p for p in bundle.iterdir())


def _load_recognizer(path: str | None, cfg: Config):
    from .recognizer import Recognizer, build_recognizer

    if path:
        return Recognizer.load(path)
    rc = cfg.recognizer
    rec = build_recognizer(
        _cycles(None, rc.cycles), window_s=rc.window_s, k=rc.k, cluster_seed=rc.cluster_seed,
        val_fraction=rc.val_fraction, split_seed=rc.split_seed, train_seed=rc.train_seed,
        epochs=rc.epochs, batch=rc.batch, lr=rc.lr, hidden=tuple(rc.hidden))[0]
    rec.update_mode = rc.update_mode
    return rec


def cmd_simulate(args, cfg, argv) -> list[Path]:
    from .agents.rollout import rollout_reference
    from .plant.model import Plant
    from .report import write_trace

    out = _out_dir(args.out)
    cycle = resolve_cycle(args.cycle)
    res = rollout_reference(cycle, Plant(cfg.plant), args.ems, args.cabin, cfg.rewards, cfg.baseline,
                            cfg.report.warmup_s, cfg.report.comfort_band)
    tpath = out / "trace.csv"
    write_trace(res.trace, tpath)
    mpath = _write_json(out / "metrics.json", {"cycle": cycle.name, "policy": args.ems, **res.metrics.to_dict()})
    m = res.metrics
    print(f"{cycle.name}: fuel {m.fuel_g:.2f} g, TM {m.tm_energy_Wh:.2f} Wh, SOC {m.soc_initial:.3f} -> {m.soc_final:.3f}")
    return [tpath, mpath, _config_text(cfg, out)]


def cmd_train_agents(args, cfg, argv) -> list[Path]:
    from .agents.training import save_bundle, train, write_curve

    out = _out_dir(args.out)
    tc = cfg.train
    if args.episodes is not None:
        tc.episodes = args.episodes
    dc = args.dc == "on"
    rec = _load_recognizer(args.recognizer, cfg) if dc else None
    cycles = _cycles(args.cycles, tc.train_cycles)
    eval_cycle = resolve_cycle(tc.eval_cycle)
    cfg_path = _config_text(cfg, out)
    files = [cfg_path]
    for seed in args.seeds:
        cfg.agent.seed = seed
        res = train(cfg, cycles, dc, recognizer=rec, eval_cycle=eval_cycle,
                    log=(lambda r: print(_curve_line(r), flush=True)) if args.verbose else None)
        sd = out / f"seed_{seed}"
        sd.mkdir(exist_ok=True)
        curve = sd / "learning_curve.csv"
        write_curve(res.curve, curve)
        files.append(curve)
        text = cfg_path.read_text(encoding="utf-8")
        for which, ag in (("best", res.best), ("final", res.agents)):
            b = save_bundle(sd / which, ag, rec, dc, text,
                            {"seed": seed, "episodes": tc.episodes, "config_hash": config_hash(cfg)})
            files += [p for p in b.rglob("*") if p.is_file()]
        print(f"seed {seed}: best eval return {res.best_eval_return:.2f}, bundles in {sd}")
    return files


def _curve_line(r: dict) -> str:
    keys = ("episode", "cycle", "epsilon", "return_cab", "return_ems", "fuel_g", "soc_final", "eval_return")
    return " ".join(f"{k}={r[k]:.4g}" if isinstance(r.get(k), float) else f"{k}={r.get(k)}" for k in keys if k in r)


def _bundle_path(root: str, seed: int | None, which: str) -> Path:
    p = Path(root)
    if seed is not None and (p / f"seed_{seed}").is_dir():
        p = p / f"seed_{seed}"
    if not (p / "bundle.json").exists() and (p / which / "bundle.json").exists():
        p = p / which
    if not (p / "bundle.json").exists():
        raise FileNotFoundError(f"no policy bundle found at {root} (seed {seed}, {which})")
    return p


def _eval_bundle(path: Path, cycle_ref: str, cfg_override: Config | None = None):
    from .agents.rollout import rollout_episode
    from .agents.training import load_bundle
    from .config import from_dict
    import yaml

    b = load_bundle(path)
    cfg = cfg_override or from_dict(Config, yaml.safe_load(b.config_yaml))
    from .plant.model import Plant

    cycle = resolve_cycle(cycle_ref)
    return rollout_episode(cycle, Plant(cfg.plant), b.recognizer, b.agents, b.dc_enabled, "eval",
                           rewards=cfg.rewards, ranges=cfg.obs,
                           warmup_s=cfg.report.warmup_s, comfort_band=cfg.report.comfort_band), cycle


def cmd_evaluate(args, cfg, argv) -> list[Path]:
    from .report import write_trace

    out = _out_dir(args.out)
    res, cycle = _eval_bundle(_bundle_path(args.bundle, None, args.checkpoint), args.cycle)
    tpath = out / "trace.csv"
    write_trace(res.trace, tpath)
    mpath = _write_json(out / "metrics.json", {"cycle": cycle.name, **res.metrics.to_dict()})
    m = res.metrics
    print(f"{cycle.name}: fuel {m.fuel_g:.2f} g, TM {m.tm_energy_Wh:.2f} Wh, SOC {m.soc_final:.3f}, |e_cab| {m.mean_abs_ecab:.2f} C")
    return [tpath, mpath]


def _compare_seed(job):
    aware_root, blind_root, which, cycle_ref, seed, baseline, cfg_dict = job
    from .agents.rollout import rollout_reference
    from .config import from_dict
    from .plant.model import Plant

    cfg = from_dict(Config, cfg_dict)
    a, cycle = _eval_bundle(_bundle_path(aware_root, seed, which), cycle_ref)
    b, _ = _eval_bundle(_bundle_path(blind_root, seed, which), cycle_ref)
    base = None
    if baseline:
        base = rollout_reference(cycle, Plant(cfg.plant), baseline, "thermostat", cfg.rewards, cfg.baseline,
                                 cfg.report.warmup_s, cfg.report.comfort_band)
    return seed, cycle.name, a, b, base


def cmd_compare(args, cfg, argv) -> list[Path]:
    from .config import to_dict
    from .report import compare, emit_plots, write_trace

    out = _out_dir(args.out)
    seeds = list(range(args.seeds)) if args.seed_list is None else args.seed_list
    jobs = [(args.aware, args.blind, args.checkpoint, args.cycle, s, args.baseline, to_dict(cfg)) for s in seeds]
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_compare_seed, jobs))
    else:
        results = [_compare_seed(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    files = []
    tdir = out / "traces"
    tdir.mkdir(exist_ok=True)
    for seed, name, a, b, base in results:
        for variant, res in (("aware", a), ("blind", b), ("baseline", base)):
            if res is not None:
                p = tdir / f"seed_{seed}_{variant}.csv"
                write_trace(res.trace, p)
                files.append(p)
        files += emit_plots(a.trace, b.trace, out / "plots" / f"seed_{seed}")
    cycle_name = results[0][1]
    report = compare([(n, s, a.metrics) for s, n, a, _, _ in results],
                     [(n, s, b.metrics) for s, n, _, b, _ in results],
                     [(n, s, base.metrics) for s, n, _, _, base in results] if args.baseline else None,
                     cycle=cycle_name, seeds=[r[0] for r in results])
    rpath = out / "report.json"
    rpath.write_text(report.to_json(), encoding="utf-8")
    files.append(rpath)
    print(report.text())
    return files


def cmd_report(args, cfg, argv) -> list[Path]:
    from .metrics import EpisodeMetrics
    from .report import ComparisonReport, SeedRow

    data = json.loads(Path(args.comparison).read_text(encoding="utf-8"))
    rows = [SeedRow(s["seed"], EpisodeMetrics(**s["aware"]), EpisodeMetrics(**s["blind"]),
                    EpisodeMetrics(**s["baseline"]) if s.get("baseline") else None) for s in data["seeds"]]
    report = ComparisonReport(data["cycle"], rows)
    text = report.text()
    print(text)
    if args.out:
        out = _out_dir(args.out)
        p = out / "report.txt"
        p.write_text(text + "\n", encoding="utf-8")
        return [p]
    return []


COMMANDS = {
    "segment": cmd_segment,
    "cluster": cmd_cluster,
    "train-recognizer": cmd_train_recognizer,
    "simulate": cmd_simulate,
    "train-agents": cmd_train_agents,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="itemhev",
        description="Driving-condition-aware thermal and energy management for a power-split HEV.",
        epilog=f"Relative paths fall back to ${CONFIG_ROOT_ENV}. Exit codes: 0 ok, 1 runtime error, 2 usage error.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--replay", metavar="MANIFEST", help="re-run the command recorded in a manifest (use with --out)")
    ap.add_argument("--out", dest="replay_out", metavar="DIR", help="output directory for --replay")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, help_, out_required=True):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="YAML config file (partial files allowed)")
        if out_required is not None:
            p.add_argument("--out", required=out_required, help="output directory")
        return p

    p = add("segment", "split drive cycles into micro-trips and write their features")
    p.add_argument("--window", type=float, default=20.0, help="micro-trip length in seconds")
    p.add_argument("--cycles", nargs="+", help="cycle names or CSV paths (default: all bundled cycles)")

    p = add("cluster", "k-means clustering of micro-trip features")
    p.add_argument("--trips", required=True, help="micro-trip CSV written by 'segment'")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    add("train-recognizer", "cluster the training roster and train the driving-condition classifier")

    p = add("simulate", "run a rule-based reference policy on a cycle")
    p.add_argument("--cycle", required=True)
    p.add_argument("--ems", choices=("naive", "baseline"), default="naive")
    p.add_argument("--cabin", choices=("thermostat", "off"), default="thermostat")

    p = add("train-agents", "train the cabin and EMS agents")
    p.add_argument("--dc", choices=("on", "off"), default="on", help="driving-condition input")
    p.add_argument("--recognizer", help="recognizer bundle (trained from the config when omitted)")
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--episodes", type=int)
    p.add_argument("--cycles", nargs="+", help="override the training roster")
    p.add_argument("--verbose", action="store_true")

    p = add("evaluate", "greedy evaluation of a trained bundle on one cycle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--cycle", required=True)
    p.add_argument("--checkpoint", choices=("best", "final"), default="best")

    p = add("compare", "recognition-aware vs recognition-blind comparison")
    p.add_argument("--cycle", required=True)
    p.add_argument("--aware", required=True, help="bundle or train-agents output directory")
    p.add_argument("--blind", required=True, help="bundle or train-agents output directory")
    p.add_argument("--seeds", type=int, default=1, help="use seeds 0..N-1")
    p.add_argument("--seed-list", type=int, nargs="+", help="explicit seeds (overrides --seeds)")
    p.add_argument("--checkpoint", choices=("best", "final"), default="best")
    p.add_argument("--baseline", choices=("naive", "baseline"), help="also run a rule-based reference")
    p.add_argument("--workers", type=int, default=1)

    p = add("report", "print a comparison report", out_required=False)
    p.add_argument("--comparison", required=True, help="report.json written by 'compare'")
    return ap


def _replace_out(argv: list[str], out: str) -> list[str]:
    argv = list(argv)
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            argv[i + 1] = out
            return argv
        if a.startswith("--out="):
            argv[i] = f"--out={out}"
            return argv
    return argv + ["--out", out]


def _run_seeds(args) -> list[int]:
    if getattr(args, "seed_list", None):
        return list(args.seed_list)
    seeds = getattr(args, "seeds", None)
    if isinstance(seeds, list):
        return seeds
    return list(range(seeds or 0))


def cli(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.replay:
            from .report import RunManifest

            if args.command:
                parser.error("--replay takes no subcommand")
            m = RunManifest.read(args.replay)
            if not args.replay_out:
                parser.error("--replay needs --out")
            return cli(_replace_out(m.argv, args.replay_out))
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 2
        cfg = load_config(args.config)
        manifest = _manifest(args, cfg, argv)
        files = COMMANDS[args.command](args, cfg, argv)
        if getattr(args, "out", None):
            out = Path(args.out)
            manifest.seeds = _run_seeds(args)
            manifest.cycles = [c for c in ([getattr(args, "cycle", None)] + list(getattr(args, "cycles", None) or [])) if c]
            manifest.checkpoints = {k: getattr(args, k) for k in ("aware", "blind", "bundle", "recognizer")
                                    if getattr(args, k, None)}
            _finish(out, manifest, files)
        return 0
    except SystemExit as e:
        return int(e.code or 0)
    except KeyboardInterrupt:
        return 130
    except Exception as e:  # reported, not raised, so the exit status is meaningful
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
