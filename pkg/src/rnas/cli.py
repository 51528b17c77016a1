"""Command-line entry point: ``rnas {search,derive,train,attack,report,pipeline}``.

Every command that produces artifacts writes them into a fresh run directory
``<out>/<command>-<tag>-seed<k>-<timestamp>`` together with the resolved
config (``config.yaml``) and wall-clock timings (``timing.json``). All other
files are a pure function of the config and seed.

Exit codes are listed in :data:`EXIT_CODES`. On failure an ``error.json``
record is left in the run directory next to any partial artifacts.
"""

import argparse
import csv
import json
import os
import sys
import time
import traceback
from dataclasses import replace
from datetime import datetime
from pathlib import Path

from . import config as config_mod
from .checkpoint import load_arrays, load_module, save_module
from .data import gen_synthetic, load_cifar10
from .evaltrain import report_table, robustness_row, rows_from_csv, train_discrete
from .search import SearchReport, run_search
from .supernet import build_discrete_net, derive_genotype, load_genotype, save_genotype

OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_RUNTIME = 5
EXIT_IO = 6
EXIT_CODES = {
    OK: "success, all artifacts written",
    EXIT_USAGE: "bad command-line usage",
    EXIT_CONFIG: "invalid configuration (unknown key or bad value)",
    EXIT_DATA: "missing or malformed input data, genotype or checkpoint",
    EXIT_RUNTIME: "failure during search, training or evaluation",
    EXIT_IO: "could not write output artifacts",
}
OUT_ENV = "RNAS_OUT"


class StageError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# run directories


def make_run_dir(root, name):
    root = Path(root)
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    path = root / f"{name}-{stamp}"
    k = 1
    while path.exists():
        path = root / f"{name}-{stamp}-{k}"
        k += 1
    path.mkdir(parents=True)
    (path / "checkpoints").mkdir()
    return path


def write_error(run_dir, code, exc, stage):
    record = {"exit_code": code, "meaning": EXIT_CODES[code], "stage": stage,
              "error": type(exc).__name__, "message": str(exc)}
    if run_dir is not None:
        (Path(run_dir) / "error.json").write_text(json.dumps(record, indent=2) + "\n")
    return record


class Timer:
    def __init__(self):
        self.entries = {}

    def add(self, key, seconds):
        self.entries[key] = self.entries.get(key, 0.0) + seconds

    def dump(self, run_dir):
        (Path(run_dir) / "timing.json").write_text(json.dumps(self.entries, indent=2, sort_keys=True) + "\n")


# stages


def load_data(cfg):
    """(train, test) datasets for a run config."""
    d = cfg.data
    try:
        if d.source == "cifar10":
            train = load_cifar10(d.path, d.subset, cfg.seed, train=True)
            test = load_cifar10(d.path, d.test_subset, cfg.seed, train=False)
        else:
            train = gen_synthetic(d.kind, d.n, d.classes, d.image_shape, seed=[cfg.seed, 0])
            test = gen_synthetic(d.kind, d.test_n, d.classes, d.image_shape, seed=[cfg.seed, 1])
    except (OSError, ValueError) as exc:
        raise StageError(EXIT_DATA, f"loading data: {exc}") from exc
    return train, test


def stage_search(cfg, run_dir, train, timer, csv_name="report.csv"):
    csv_path = run_dir / csv_name
    done = []

    def on_epoch(rec):
        # rewritten every epoch so a failed run still leaves its history
        done.append(rec)
        timer.add(f"search_epoch_{rec.epoch:03d}", rec.seconds)
        SearchReport(cfg.search, done).to_csv(csv_path)

    report = run_search(cfg.search, dataset=train, supernet_config=cfg.supernet, on_epoch=on_epoch)
    timer.add("search_total", report.wall_clock)
    save_module(run_dir / "checkpoints" / "supernet.ckpt", report.model)
    save_genotype(report.genotype, run_dir / "genotype.txt")
    return report.genotype


def stage_train(cfg, run_dir, genotype, train, mode, timer):
    net = build_discrete_net(genotype, cfg.discrete.cells, cfg.discrete.channels, cfg.data.classes,
                             cfg.data.image_shape[0], cfg.supernet.stem_multiplier, cfg.discrete.auxiliary,
                             seed=cfg.seed)
    t0 = time.perf_counter()
    net, history = train_discrete(net, train, replace(cfg.train, mode=mode))
    timer.add(f"train_{mode}", time.perf_counter() - t0)
    save_module(run_dir / "checkpoints" / f"net-{mode}.ckpt", net)
    with open(run_dir / f"train-{mode}.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["epoch", "lr", "loss", "accuracy"])
        for h in history:
            out.writerow([h["epoch"], repr(h["lr"]), repr(h["loss"]), repr(h["accuracy"])])
    return net


def stage_attack(cfg, run_dir, net, test, mode, name, timer):
    ev = cfg.evaluate
    t0 = time.perf_counter()
    row = robustness_row(name, net, test, mode, ev.epsilon, ev.pgd_steps, ev.batch_size, seed=cfg.seed)
    timer.add(f"attack_{mode}", time.perf_counter() - t0)
    return row


def write_report(run_dir, rows):
    csv_text, md_text = report_table(rows)
    (run_dir / "report.csv").write_text(csv_text)
    (run_dir / "report.md").write_text(md_text)
    return md_text


def read_genotype(path):
    try:
        return load_genotype(path)
    except (OSError, ValueError) as exc:
        raise StageError(EXIT_DATA, f"reading genotype {path}: {exc}") from exc


def net_for(cfg, genotype, checkpoint):
    net = build_discrete_net(genotype, cfg.discrete.cells, cfg.discrete.channels, cfg.data.classes,
                             cfg.data.image_shape[0], cfg.supernet.stem_multiplier, cfg.discrete.auxiliary,
                             seed=cfg.seed)
    try:
        load_module(checkpoint, net)
    except (OSError, ValueError, KeyError) as exc:
        raise StageError(EXIT_DATA, f"loading checkpoint {checkpoint}: {exc}") from exc
    return net


# commands: each takes (cfg, args, run_dir, timer) and returns text to print


def cmd_search(cfg, args, run_dir, timer):
    train, _ = load_data(cfg)
    genotype = stage_search(cfg, run_dir, train, timer)
    return (run_dir / "genotype.txt").read_text() if genotype else ""


def cmd_derive(cfg, args, run_dir, timer):
    if not args.checkpoint:
        raise StageError(EXIT_USAGE, "derive needs --checkpoint (a supernet checkpoint or search run directory)")
    path = Path(args.checkpoint)
    if path.is_dir():
        path = path / "checkpoints" / "supernet.ckpt"
    try:
        arrays = load_arrays(path)
        alpha_normal, alpha_reduce = arrays["alpha_normal"], arrays["alpha_reduce"]
    except (OSError, ValueError, KeyError) as exc:
        raise StageError(EXIT_DATA, f"reading supernet checkpoint {path}: {exc}") from exc
    genotype = derive_genotype(alpha_normal, alpha_reduce, cfg.supernet.op_names, cfg.supernet.nodes)
    save_genotype(genotype, run_dir / "genotype.txt")
    return (run_dir / "genotype.txt").read_text()


def _modes(cfg, args):
    return (args.mode,) if getattr(args, "mode", None) else cfg.evaluate.modes


def cmd_train(cfg, args, run_dir, timer):
    if not args.genotype:
        raise StageError(EXIT_USAGE, "train needs --genotype")
    genotype = read_genotype(args.genotype)
    save_genotype(genotype, run_dir / "genotype.txt")
    train, _ = load_data(cfg)
    for mode in _modes(cfg, args):
        stage_train(cfg, run_dir, genotype, train, mode, timer)
    return f"trained {', '.join(_modes(cfg, args))}"


def cmd_attack(cfg, args, run_dir, timer):
    if not args.genotype or not args.checkpoint:
        raise StageError(EXIT_USAGE, "attack needs --genotype and --checkpoint (a net checkpoint or train run dir)")
    genotype = read_genotype(args.genotype)
    path = Path(args.checkpoint)
    if path.is_dir():
        pairs = [(p.stem[len("net-"):], p) for p in sorted((path / "checkpoints").glob("net-*.ckpt"))]
    else:
        pairs = [(args.mode or path.stem, path)]
    if not pairs:
        raise StageError(EXIT_DATA, f"no net checkpoints found under {path}")
    _, test = load_data(cfg)
    name = Path(args.genotype).stem
    rows = [stage_attack(cfg, run_dir, net_for(cfg, genotype, ckpt), test, mode, name, timer) for mode, ckpt in pairs]
    return write_report(run_dir, rows)


def cmd_pipeline(cfg, args, run_dir, timer):
    train, test = load_data(cfg)
    if args.genotype:
        genotype = read_genotype(args.genotype)
        save_genotype(genotype, run_dir / "genotype.txt")
        name = Path(args.genotype).stem
    else:
        genotype = stage_search(cfg, run_dir, train, timer, csv_name="search.csv")
        name = f"rnas-{cfg.search.strategy}"
    rows = []
    for mode in _modes(cfg, args):
        net = stage_train(cfg, run_dir, genotype, train, mode, timer)
        rows.append(stage_attack(cfg, run_dir, net, test, mode, name, timer))
    return write_report(run_dir, rows)


def cmd_report(args):
    rows = []
    for path in args.csv:
        try:
            rows.extend(rows_from_csv(Path(path).read_text()))
        except (OSError, ValueError) as exc:
            raise StageError(EXIT_DATA, f"reading report {path}: {exc}") from exc
    if not rows:
        raise StageError(EXIT_DATA, "no rows to report")
    csv_text, md_text = report_table(rows)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(md_text)
    return md_text


COMMANDS = {"search": cmd_search, "derive": cmd_derive, "train": cmd_train, "attack": cmd_attack,
            "pipeline": cmd_pipeline}


# argument handling


def parse_seeds(text):
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def build_parser():
    parser = argparse.ArgumentParser(prog="rnas", description="Robust differentiable architecture search.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config (merged over the profile)")
    common.add_argument("--profile", choices=config_mod.PROFILES, help="default values to start from (desk)")
    common.add_argument("--strategy", choices=("max", "uniform", "baseline"))
    common.add_argument("--lambda", dest="lam", type=float, help="regularizer weight")
    common.add_argument("--epsilon", type=float, help="perturbation radius for search, training and attacks")
    seeds = common.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int)
    seeds.add_argument("--seeds", type=parse_seeds, help="comma-separated seeds, one run each")
    common.add_argument("--out", help=f"output root (overrides ${OUT_ENV} and the config)")
    common.add_argument("--genotype", help="genotype file")
    common.add_argument("--checkpoint", help="checkpoint file or run directory")
    common.add_argument("--mode", choices=("standard", "adversarial"), help="restrict to one training mode")
    help_text = {
        "search": "search a cell on the supernet",
        "derive": "extract a genotype from a supernet checkpoint",
        "train": "train the discrete net for a genotype",
        "attack": "evaluate trained nets under FGSM and PGD",
        "pipeline": "search, train in both modes, attack, report",
    }
    for name, text in help_text.items():
        sub.add_parser(name, parents=[common], help=text)
    rep = sub.add_parser("report", help="merge robustness CSVs into a markdown table")
    rep.add_argument("csv", nargs="+")
    rep.add_argument("--out", help="write the markdown table here")
    return parser


def resolve_config(args, seed=None):
    overrides = {}
    if args.strategy is not None:
        overrides.setdefault("search", {})["strategy"] = args.strategy
    if args.lam is not None:
        overrides.setdefault("search", {})["lam"] = args.lam
    if args.epsilon is not None:
        eps = args.epsilon
        overrides.setdefault("search", {})["perturb"] = {"epsilon": eps}
        overrides["train"] = {"attack": {"epsilon": eps}}
        overrides["evaluate"] = {"epsilon": eps}
    if seed is not None:
        overrides["seed"] = seed
    out = args.out or os.environ.get(OUT_ENV)
    if out:
        overrides["out"] = out
    if args.config:
        try:
            values = config_mod.read_yaml(args.config)
        except OSError as exc:
            raise config_mod.ConfigError(f"cannot read config {args.config}: {exc}") from exc
        profile = args.profile or (values.get("profile", "desk") if isinstance(values, dict) else "desk")
        return config_mod.resolve(profile, values, overrides)
    return config_mod.resolve(args.profile or "desk", None, overrides)


def run_one(args, seed):
    """Run one command for one seed; returns (exit code, run dir or None)."""
    stage = "config"
    run_dir = None
    try:
        cfg = resolve_config(args, seed)
        tag = cfg.search.strategy if args.command in ("search", "pipeline") and not args.genotype else "run"
        stage = "setup"
        try:
            run_dir = make_run_dir(cfg.out, f"{args.command}-{tag}-seed{cfg.seed}")
            (run_dir / "config.yaml").write_text(config_mod.dump(cfg))
        except OSError as exc:
            raise StageError(EXIT_IO, f"creating run directory under {cfg.out}: {exc}") from exc
        stage = args.command
        timer = Timer()
        try:
            text = COMMANDS[args.command](cfg, args, run_dir, timer)
        finally:
            timer.dump(run_dir)
        if text:
            print(text.rstrip("\n"))
        print(f"run directory: {run_dir}")
        return OK, run_dir
    except config_mod.ConfigError as exc:
        code, err = EXIT_CONFIG, exc
    except StageError as exc:
        code, err = exc.code, exc
    except OSError as exc:
        code, err = EXIT_IO, exc
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime failure
        code, err = EXIT_RUNTIME, exc
        traceback.print_exc()
    write_error(run_dir, code, err, stage)
    print(f"rnas {args.command}: error: {err}", file=sys.stderr)
    return code, run_dir


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "report":
        try:
            print(cmd_report(args).rstrip("\n"))
            return OK
        except StageError as exc:
            print(f"rnas report: error: {exc}", file=sys.stderr)
            return exc.code
        except OSError as exc:
            print(f"rnas report: error: {exc}", file=sys.stderr)
            return EXIT_IO
    seeds = args.seeds or [args.seed]
    codes = [run_one(args, seed)[0] for seed in seeds]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
