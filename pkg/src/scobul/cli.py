"""Command-line front end.

    scobul signal      --config C --out DIR          events + ground truth
    scobul experiment  --config C --arm A --out DIR  metrics + snapshot
    scobul experiment  --manifest DIR/manifest.json --out DIR2   (replay)
    scobul optimize    --config C --arm A --out DIR  best genome + history
    scobul report      FILE [FILE ...] --out DIR     table + plot data

Every command writes a ``manifest.json`` next to its outputs. ``--seed``
replaces the run, signal and GA seeds at once; ``--phase-lengths`` takes
``train,test`` (cluster) or ``train,rf,test`` (dvs).

On failure the last line on stderr is ``error: <ErrorClass>: <message>``
and the exit status is non-zero (2 for configuration problems, 3 for
unreadable or incompatible files, 4 for unsupported requests, 1 otherwise).
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from scobul import persist
from scobul.config import ConfigError, ExperimentConfig, config_hash, from_dict, load_config, to_dict
from scobul.events import EventFileError
from scobul.experiment import (
    comparison_key,
    load_signal,
    make_signal,
    phase_bounds,
    run_experiment,
    save_signal,
)
from scobul.optimize import ExperimentFitness, GaConfig, SearchSpace, ga_run

log = logging.getLogger("scobul")


class UnsupportedError(RuntimeError):
    """The request is outside what the tool does (e.g. resuming a GA run)."""


class ManifestMismatch(ValueError):
    """Inputs to a report were produced under incompatible settings."""


EXIT_CODES = {ConfigError: 2, persist.SchemaError: 3, EventFileError: 3, ManifestMismatch: 3,
              FileNotFoundError: 3, UnsupportedError: 4}


def _exit_code(exc: BaseException) -> int:
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return 1


# -- config plumbing ----------------------------------------------------------


def _phase_overrides(text: str, kind: str) -> dict:
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise ConfigError("--phase-lengths", f"expected comma-separated integers, got {text!r}") from None
    names = ("train_steps", "rf_steps", "test_steps") if kind == "dvs" else ("train_steps", "test_steps")
    if len(parts) != len(names) or min(parts) <= 0:
        raise ConfigError("--phase-lengths", f"{kind} runs need {len(names)} positive lengths")
    return {f"phases.{n}": v for n, v in zip(names, parts)}


def resolve_config(args) -> ExperimentConfig:
    if getattr(args, "manifest", None):
        cfg = from_dict(persist.RunManifest.read(args.manifest).config)
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise ConfigError("--config", "a config file is required")
    over = {}
    if args.seed is not None:
        over.update({"seed": args.seed, "signal.seed": args.seed, "ga.seed": args.seed})
    if getattr(args, "phase_lengths", None):
        over.update(_phase_overrides(args.phase_lengths, cfg.signal.kind))
    return cfg.replace(**over) if over else cfg


def _freeze_calibration(cfg: ExperimentConfig, signal) -> ExperimentConfig:
    # record calibrated DVS constants so the manifest alone replays the signal
    if signal.dvs is None:
        return cfg
    return cfg.replace(**{"dvs.brightness_rate_scale": signal.dvs.brightness_rate_scale,
                          "dvs.change_threshold": signal.dvs.change_threshold})


def _seeds(cfg: ExperimentConfig, **extra) -> dict:
    return {"root": cfg.seed, "signal": cfg.signal.seed, "ga": cfg.ga.seed, **extra}


# -- commands -----------------------------------------------------------------


def cmd_signal(cfg: ExperimentConfig, out: Path) -> persist.RunManifest:
    signal = make_signal(cfg)
    cfg = _freeze_calibration(cfg, signal)
    files = save_signal(signal, out)
    manifest = persist.RunManifest(
        command="signal", config=to_dict(cfg), seeds=_seeds(cfg),
        input_hash=persist.input_hash(to_dict(cfg)),
        phases={"signal": [signal.events.start, signal.events.stop]}, outputs=files,
    )
    manifest.write(out / "manifest.json")
    return manifest


def _signal_for(cfg: ExperimentConfig, signal_dir: Optional[Path]):
    if signal_dir is None:
        return make_signal(cfg), []
    src = persist.RunManifest.read(signal_dir / "manifest.json")
    if src.config["signal"]["kind"] != cfg.signal.kind:
        raise ManifestMismatch(f"signal kind {src.config['signal']['kind']} != config {cfg.signal.kind}")
    files = [signal_dir / f for f in sorted(src.outputs.values())]
    return load_signal(signal_dir, cfg.signal.kind), files


def cmd_experiment(cfg: ExperimentConfig, arm: str, out: Path, signal_dir: Optional[Path] = None) -> dict:
    signal, files = _signal_for(cfg, signal_dir)
    cfg = _freeze_calibration(cfg, signal)
    res = run_experiment(cfg, signal, arm)
    net = res.pop("network")
    metrics = {
        "schema": persist.SCHEMA_VERSION, "kind": "metrics", "arm": arm, "signal_kind": cfg.signal.kind,
        "config_hash": config_hash(cfg), "compat": comparison_key(cfg), **res,
    }
    out.mkdir(parents=True, exist_ok=True)
    persist.write_json(out / "metrics.json", metrics)
    persist.write_json(out / "snapshot.json", net.snapshot())
    persist.RunManifest(
        command="experiment", config=to_dict(cfg), seeds=_seeds(cfg, replica=0),
        input_hash=persist.input_hash(to_dict(cfg), *files),
        phases=phase_bounds(cfg, cfg.signal.kind), arm=arm,
        outputs={"metrics": "metrics.json", "snapshot": "snapshot.json"},
        inputs={"signal": str(signal_dir.resolve())} if signal_dir else {},
    ).write(out / "manifest.json")
    return metrics


def cmd_optimize(cfg: ExperimentConfig, arm: str, out: Path, signal_dir: Optional[Path] = None,
                 workers: int = 1, resume: bool = False):
    if resume:
        raise UnsupportedError("resuming a GA run is not supported; rerun from its manifest")
    if arm not in cfg.search:
        raise ConfigError(f"search.{arm}", "no search space for this arm")
    space = SearchSpace.from_entries(cfg.search[arm])
    ga = GaConfig.from_params(cfg.ga)
    fitness = ExperimentFitness(cfg, space, arm, ga.seeds_per_fitness, signal_dir)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            result = ga_run(space, ga, fitness, map_fn=pool.map)
    else:
        result = ga_run(space, ga, fitness)
    out.mkdir(parents=True, exist_ok=True)
    best = {
        "schema": persist.SCHEMA_VERSION, "kind": "genome", "arm": arm, "compat": comparison_key(cfg),
        "fitness": result.best_fitness, "genome": list(result.best_genome),
        "params": space.decode(result.best_genome), "generations": len(result.history),
        "evaluations": len(result.evaluations),
    }
    persist.write_json(out / "best_genome.json", best)
    persist.write_history(out / "history.csv", result.history, arm, comparison_key(cfg))
    persist.RunManifest(
        command="optimize", config=to_dict(cfg), seeds=_seeds(cfg, replicas=list(range(ga.seeds_per_fitness))),
        input_hash=persist.input_hash(to_dict(cfg)), phases=phase_bounds(cfg, cfg.signal.kind), arm=arm,
        outputs={"best": "best_genome.json", "history": "history.csv"},
        inputs={"signal": str(signal_dir.resolve())} if signal_dir else {},
    ).write(out / "manifest.json")
    return result


def _load_report_input(path: Path) -> dict:
    if path.suffix == ".json":
        data = persist.read_json(path)
        if data.get("kind") not in ("metrics", "genome"):
            raise persist.SchemaError(f"{path}: cannot report on a {data.get('kind')!r} file")
        score = data.get("normalized_msd") if data["kind"] == "metrics" else data["fitness"]
        if data["kind"] == "metrics" and data.get("signal_kind") == "cluster":
            score = data["mean_matched_f1"]
        return {"source": str(path), "kind": data["kind"], "arm": data["arm"], "compat": data["compat"],
                "score": score, "coverage": data.get("coverage"), "series": None}
    meta, rows = persist.read_history(path)
    return {"source": str(path), "kind": "history", "arm": meta["arm"], "compat": meta["compat"],
            "score": float(rows[:, 4].min()) if len(rows) else None, "coverage": None,
            "series": rows[:, 4]}


def cmd_report(paths: list, out: Path) -> list:
    if not paths:
        raise ConfigError("inputs", "report needs at least one metrics or history file")
    rows = [_load_report_input(Path(p)) for p in paths]
    keys = {r["compat"] for r in rows}
    if len(keys) > 1:
        detail = "; ".join(f"{r['source']}={r['compat']}" for r in rows)
        raise ManifestMismatch(f"inputs come from incompatible signal/phase settings: {detail}")
    out.mkdir(parents=True, exist_ok=True)
    fmt = lambda v: "" if v is None else repr(float(v))  # noqa: E731
    lines = ["source,kind,arm,score,coverage"]
    lines += [f"{r['source']},{r['kind']},{r['arm']},{fmt(r['score'])},{fmt(r['coverage'])}" for r in rows]
    (out / "table.csv").write_text("\n".join(lines) + "\n")
    series = [r for r in rows if r["series"] is not None]
    if series:
        names, seen = [], {}
        for r in series:
            seen[r["arm"]] = seen.get(r["arm"], 0) + 1
            names.append(r["arm"] if seen[r["arm"]] == 1 else f"{r['arm']}_{seen[r['arm']]}")
        n = max(len(r["series"]) for r in series)
        plot = ["generation," + ",".join(names)]
        for g in range(n):
            # a finished search holds its final best-so-far
            vals = [r["series"][min(g, len(r["series"]) - 1)] for r in series]
            plot.append(f"{g}," + ",".join(repr(float(v)) for v in vals))
        (out / "plot.csv").write_text("\n".join(plot) + "\n")
    return rows


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scobul", description="Resource-based plasticity experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, arm=False):
        sp.add_argument("--config", type=Path)
        sp.add_argument("--out", type=Path, required=True)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--phase-lengths", dest="phase_lengths")
        if arm:
            sp.add_argument("--arm", choices=("scobul", "stdp"))
            sp.add_argument("--signal", type=Path, help="directory written by 'scobul signal'")

    common(sub.add_parser("signal", help="generate an input signal"))
    ex = sub.add_parser("experiment", help="train, fit and score one network")
    common(ex, arm=True)
    ex.add_argument("--manifest", type=Path, help="replay the run recorded in this manifest")
    op = sub.add_parser("optimize", help="genetic hyperparameter search")
    common(op, arm=True)
    op.add_argument("--workers", type=int, default=1)
    op.add_argument("--resume", type=Path, help="not supported; present to fail loudly")
    rp = sub.add_parser("report", help="tabulate metrics and history files")
    rp.add_argument("inputs", nargs="*", type=Path)
    rp.add_argument("--out", type=Path, required=True)
    return p


def run(args) -> int:
    if args.command == "report":
        rows = cmd_report(args.inputs, args.out)
        for r in rows:
            print(f"{r['arm']}\t{r['kind']}\t{r['score']}\t{r['source']}")
        return 0
    cfg = resolve_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.command == "signal":
        m = cmd_signal(cfg, args.out)
        print(f"wrote {', '.join(m.outputs.values())} to {args.out}")
        return 0
    arm = args.arm
    signal_dir = args.signal
    if getattr(args, "manifest", None):
        m = persist.RunManifest.read(args.manifest)
        arm = arm or m.arm
        if signal_dir is None and m.inputs.get("signal"):
            signal_dir = Path(m.inputs["signal"])
    arm = arm or cfg.arm
    if args.command == "experiment":
        metrics = cmd_experiment(cfg, arm, args.out, signal_dir)
        score = metrics.get("normalized_msd", metrics.get("mean_matched_f1"))
        print(f"{arm}: score={score} -> {args.out / 'metrics.json'}")
        return 0
    res = cmd_optimize(cfg, arm, args.out, signal_dir, args.workers, resume=args.resume is not None)
    print(f"{arm}: best fitness {res.best_fitness:.6g} after {len(res.history)} generations")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except Exception as exc:  # noqa: BLE001 - reported as one line below
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
