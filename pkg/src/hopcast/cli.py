"""Command-line front end: ``hopcast gen | train | eval | report``.

Every command works on a dataset directory written by ``gen``::

    <data>/experiment.meta   key=value experiment configuration
    <data>/manifest.csv      one row per trace with its split
    <data>/traces/<name>.csv (+ .meta)
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .datasets import LabeledTrace, phase1_samples, power_windows, sliding_phase1_samples, static_traces
from .netsim import MOBILITY_MODELS, NOISE_FLOOR_DBM, SimConfig, interference_threshold, received_power
from .nnkernel import CheckpointError, load_checkpoint, save_checkpoint
from .pipeline import RESULT_HEADER, Aggregate, run_integrated, window_ends, write_results
from .ssan1 import CHECKPOINT_KIND as SSAN1_KIND
from .ssan1 import NoPeriodError, Ssan1Model, predict_co, train_ssan1
from .ssan2 import CHECKPOINT_KIND as SSAN2_KIND
from .ssan2 import Ssan2Model, predict_values, train_ssan2
from .traceio import (
    TraceFormatError,
    load_trace,
    parse_value,
    read_meta,
    save_trace,
    write_meta,
)

log = logging.getLogger("hopcast")

EXPERIMENTS = ("phase1", "phase2", "integrated")
MANIFEST_HEADER = ("name", "split", "kind", "graph", "observer", "mobility", "bounded", "period", "seed")


class CliError(Exception):
    """User-facing failure; reported as one line with a nonzero exit code."""


@dataclass
class ExperimentConfig:
    experiment: str = "integrated"
    # simulator
    n_nodes: int = 200
    rho: float = 4.0
    r_t: float = 1000.0
    r_i: float = 1000.0
    r_s: float = 1100.0
    n_channels: int = 16
    period: int = 4
    epsilon: float = 0.1
    flows: int = 10
    bounded: bool = False
    slot_dt: float = 4.0
    mobility: str = "FM"
    # datasets
    graphs: int = 100
    train_graphs: int = 2
    observers: int = 5
    slots: int = 160
    samples: int = 200
    # models
    input_len: int = 40
    horizon: int = 40
    window: int = 10
    heads: int = 4
    d_model: int = 16
    epochs1: int = 100
    epochs2: int = 500
    lr1: float = 1e-2
    lr2: float = 1e-2
    seed: int = 0
    workers: int = 1

    def sim_config(self, **over) -> SimConfig:
        names = {f.name for f in fields(SimConfig)}
        kw = {k: v for k, v in asdict(self).items() if k in names}
        kw.update(over)
        return SimConfig(**kw)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise CliError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.mobility not in MOBILITY_MODELS:
            raise CliError(f"unknown mobility {self.mobility!r}; choose from {', '.join(MOBILITY_MODELS)}")
        try:
            self.sim_config()
        except ValueError as exc:
            raise CliError(f"invalid simulator settings: {exc}") from None
        for name in ("graphs", "observers", "slots", "samples", "input_len", "horizon", "window", "heads",
                     "d_model", "workers"):
            if getattr(self, name) < 1:
                raise CliError(f"{name.replace('_', '-')} must be >= 1")
        for name in ("epochs1", "epochs2", "train_graphs"):
            if getattr(self, name) < 0:
                raise CliError(f"{name.replace('_', '-')} must be >= 0")
        if self.experiment != "phase1" and self.train_graphs >= self.graphs:
            raise CliError(f"train-graphs ({self.train_graphs}) must be below graphs ({self.graphs})")
        if self.experiment == "integrated" and self.slots < self.input_len + self.horizon:
            raise CliError(f"slots ({self.slots}) cannot hold input-len + horizon")


# Table-shaped defaults per recipe; explicit settings override them.
PRESETS = {
    "phase1": dict(n_nodes=100, mobility="static", slot_dt=1.0),
    "phase2": dict(n_nodes=100, slot_dt=1.0, graphs=23, train_graphs=3, window=30, heads=3),
    "integrated": {},
}


def _field_types() -> dict[str, str]:
    return {f.name: f.type if isinstance(f.type, str) else f.type.__name__ for f in fields(ExperimentConfig)}


def parse_settings(items: dict[str, str], source: str) -> dict:
    types = _field_types()
    out = {}
    for key, text in items.items():
        name = key.replace("-", "_")
        if name not in types:
            raise CliError(f"{source}: unknown setting {key!r}")
        try:
            out[name] = parse_value(text, types[name])
        except ValueError:
            raise CliError(f"{source}: cannot parse {key}={text!r} as {types[name]}") from None
    return out


def build_config(file_settings: dict, flag_settings: dict) -> ExperimentConfig:
    """Defaults, then the recipe preset, then the config file, then flags."""
    experiment = flag_settings.get("experiment", file_settings.get("experiment", ExperimentConfig.experiment))
    cfg = replace(ExperimentConfig(), experiment=experiment, **PRESETS.get(experiment, {}))
    cfg = replace(cfg, **{**file_settings, **flag_settings})
    cfg.validate()
    return cfg


def config_to_meta(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


# ---------------------------------------------------------------- manifest


@dataclass
class Entry:
    name: str
    split: str
    kind: str
    graph: int
    observer: int
    mobility: str
    bounded: bool
    period: int
    seed: int


def write_manifest(path: Path, entries: list[Entry]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for e in entries:
            w.writerow([e.name, e.split, e.kind, e.graph, e.observer, e.mobility, int(e.bounded), e.period, e.seed])


def read_manifest(path: Path) -> list[Entry]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise CliError(f"missing dataset: {path} not found (run `hopcast gen` first)") from None
    return [Entry(r["name"], r["split"], r["kind"], int(r["graph"]), int(r["observer"]), r["mobility"],
                  r["bounded"] == "1", int(r["period"]), int(r["seed"])) for r in rows]


def load_dataset(data: Path) -> tuple[ExperimentConfig, list[Entry]]:
    meta_path = data / "experiment.meta"
    if not meta_path.exists():
        raise CliError(f"missing dataset: {meta_path} not found (run `hopcast gen` first)")
    cfg = replace(ExperimentConfig(), **parse_settings(read_meta(meta_path), str(meta_path)))
    return cfg, read_manifest(data / "manifest.csv")


def write_power(path: Path, nodes: np.ndarray, power: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot"] + [f"n{j}" for j in nodes])
        for t in range(power.shape[0]):
            w.writerow([t] + [repr(float(v)) for v in power[t]])


def read_power(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "slot":
        raise TraceFormatError(f"{path}: malformed header")
    nodes = np.array([int(h[1:]) for h in rows[0][1:]], dtype=int)
    power = np.array([[float(v) for v in r[1:]] for r in rows[1:]]).reshape(len(rows) - 1, len(nodes))
    return nodes, power


# ---------------------------------------------------------------- gen


def cmd_gen(cfg: ExperimentConfig, out: Path) -> list[Entry]:
    traces_dir = out / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    entries: list[Entry] = []
    if cfg.experiment == "phase1":
        sim = cfg.sim_config()
        slots = cfg.input_len + cfg.horizon
        splits = (("train", ex.SEEN_PERIODS, cfg.seed), ("seen", ex.SEEN_PERIODS, cfg.seed + 1),
                  ("unseen", ex.UNSEEN_PERIODS, cfg.seed + 2))
        for split, periods, seed in splits:
            for k, lt in enumerate(static_traces(sim, list(periods), cfg.samples, slots, seed)):
                name = f"{split}_{k:04d}"
                save_trace(traces_dir / name, lt.trace, lt.cfg, mobility="static", graph=k)
                entries.append(Entry(name, split, "trace", k, lt.trace.observer, "static", False, lt.period, lt.seed))
    elif cfg.experiment == "phase2":
        sim = cfg.sim_config()
        for rec in ex.phase2_records(sim, cfg.mobility, cfg.graphs, cfg.seed, slots=cfg.slots):
            name = f"g{rec.graph:04d}_o{rec.observer}"
            split = "train" if rec.graph < cfg.train_graphs else "test"
            write_power(traces_dir / f"{name}.csv", rec.nodes, rec.power)
            entries.append(Entry(name, split, "power", rec.graph, rec.observer, cfg.mobility, cfg.bounded,
                                 cfg.period, cfg.seed))
    else:
        sim = cfg.sim_config()
        for lt in ex.integrated_datasets(sim, cfg.mobility, cfg.graphs, cfg.observers, cfg.slots, cfg.seed):
            name = f"g{lt.graph:04d}_o{lt.trace.observer}"
            split = "train" if lt.graph < cfg.train_graphs else "test"
            save_trace(traces_dir / name, lt.trace, lt.cfg, mobility=cfg.mobility, graph=lt.graph)
            entries.append(Entry(name, split, "trace", lt.graph, lt.trace.observer, cfg.mobility, cfg.bounded,
                                 lt.period, lt.seed))
    write_meta(out / "experiment.meta", config_to_meta(cfg))
    write_manifest(out / "manifest.csv", entries)
    return entries


# ---------------------------------------------------------------- loading helpers


def _labeled(data: Path, e: Entry) -> LabeledTrace:
    trace, sim, _ = load_trace(data / "traces" / e.name)
    return LabeledTrace(trace, e.period, e.graph, e.seed, e.mobility, sim)


def _split(entries: list[Entry], *splits: str) -> list[Entry]:
    return [e for e in entries if e.split in splits]


def _load_model(path: Path | None, kind: int, what: str):
    if path is None:
        raise CliError(f"{what} checkpoint required (--m{kind})")
    try:
        got, mats = load_checkpoint(path)
    except FileNotFoundError:
        raise CliError(f"checkpoint not found: {path}") from None
    if got != kind:
        raise CliError(f"{path}: holds a kind-{got} model, expected {what} (kind {kind})")
    try:
        return (Ssan1Model if kind == SSAN1_KIND else Ssan2Model).from_matrices(mats)
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from None


def _check_m1(m1: Ssan1Model, traces: list[LabeledTrace], path: Path) -> None:
    for lt in traces:
        if lt.trace.n_channels != m1.n_channels:
            raise CliError(f"{path}: model expects {m1.n_channels} channels, trace has {lt.trace.n_channels}")
        if lt.trace.ell < m1.input_len + m1.horizon:
            raise CliError(f"{path}: model needs {m1.input_len + m1.horizon} slots, trace has {lt.trace.ell}")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "n/a" if math.isnan(v) else f"{v:.6f}"
    return str(v)


# ---------------------------------------------------------------- train


def cmd_train(cfg: ExperimentConfig, data: Path, phase: int, out: Path, *, standard: bool = False) -> Path:
    _, entries = load_dataset(data)
    train = _split(entries, "train")
    if not train:
        raise CliError(f"missing dataset: {data}/manifest.csv has no train split")
    if phase == 1:
        if cfg.experiment == "phase2":
            raise CliError("the phase2 dataset holds per-node power only; train phase 1 on a phase1 or integrated dataset")
        traces = [_labeled(data, e) for e in train]
        if cfg.experiment == "phase1":
            samples = phase1_samples(traces, cfg.input_len, cfg.horizon)
        else:
            samples = [s for lt in traces for s in sliding_phase1_samples(lt.trace, lt.period, cfg.input_len,
                                                                          cfg.horizon, 4)]
        model, losses = train_ssan1(samples, cfg.epochs1, lr=cfg.lr1, seed=cfg.seed, standard=standard,
                                    augment=not standard, align_weight=0.0 if standard else 1.0)
        save_checkpoint(out, SSAN1_KIND, model.to_matrices())
    elif phase == 2:
        floor = received_power(cfg.r_s)
        if cfg.experiment == "phase1":
            raise CliError("the phase1 dataset is static; train phase 2 on a phase2 or integrated dataset")
        if cfg.experiment == "phase2":
            theta = interference_threshold(cfg.sim_config())
            parts = [power_windows(read_power(data / "traces" / f"{e.name}.csv")[1], cfg.window, theta)
                     for e in train]
            x = np.concatenate([p[0] for p in parts])
            t = np.concatenate([p[1] for p in parts])
        else:
            pairs = [ex.stride_power_samples(_labeled(data, e).trace, e.period, cfg.window, floor) for e in train]
            x = np.concatenate([p[0] for p in pairs])
            t = np.concatenate([p[1] for p in pairs])
        if len(x) == 0:
            raise CliError("training split has no sensed transmitter")
        model, losses = train_ssan2(x, t, cfg.epochs2, heads=cfg.heads, d_model=cfg.d_model, lr=cfg.lr2,
                                    seed=cfg.seed, floor=floor)
        save_checkpoint(out, SSAN2_KIND, model.to_matrices())
    else:
        raise CliError(f"phase must be 1 or 2, got {phase}")
    _write_rows(out.with_name(out.name + ".loss.csv"), ("epoch", "loss"),
                [(i, repr(v)) for i, v in enumerate(losses)])
    return out


# ---------------------------------------------------------------- eval


def _eval_phase1(cfg, data, entries, m1_path, out: Path) -> list[Path]:
    m1 = _load_model(m1_path, SSAN1_KIND, "phase-1")
    header = ("model", "train", "seen", "unseen", "no_period")
    acc_path = out / "phase1_accuracy.csv"
    splits = {s: [_labeled(data, e) for e in _split(entries, s)] for s in ("train", "seen", "unseen")}
    if not splits["seen"] and not splits["unseen"]:
        _write_rows(acc_path, header, [])
        return [acc_path]
    row = ["standard" if m1.standard else "ssan1"]
    fails = 0
    for split, traces in splits.items():
        _check_m1(m1, traces, m1_path)
        if not traces:
            row.append("n/a")
            continue
        acc, f = ex.phase1_accuracy(m1, phase1_samples(traces, m1.input_len, m1.horizon), standard=m1.standard)
        row.append(_fmt(acc))
        fails += f
    row.append(fails)
    _write_rows(acc_path, header, [row])
    written = [acc_path]
    # one attention heatmap per period: the first trace of that period in each split
    for split in ("seen", "unseen"):
        firsts = {}
        for lt in splits[split]:
            firsts.setdefault(lt.period, lt)
        for period, lt in sorted(firsts.items()):
            w = m1.attention(lt.trace.co[: m1.input_len].astype(np.float64))
            path = out / f"heatmap_{split}_L{period}.csv"
            _write_rows(path, [f"c{j}" for j in range(w.shape[1])], [[repr(float(v)) for v in r] for r in w])
            written.append(path)
    return written


def _eval_phase2(cfg, data, entries, m2_path, out: Path) -> list[Path]:
    m2 = _load_model(m2_path, SSAN2_KIND, "phase-2")
    header = ("mobility", "bounded", "train", "test", "n_train", "n_test")
    path = out / "phase2_accuracy.csv"
    test = _split(entries, "test")
    if not test:
        _write_rows(path, header, [])
        return [path]
    theta = interference_threshold(cfg.sim_config())
    sets = {}
    for split in ("train", "test"):
        parts = [power_windows(read_power(data / "traces" / f"{e.name}.csv")[1], m2.window, theta)
                 for e in _split(entries, split)]
        sets[split] = ex.Phase2Data(*(np.concatenate([p[k] for p in parts]) for k in range(3))) if parts else None
    acc = {s: ex.region_accuracy(m2, d, theta) if d is not None else math.nan for s, d in sets.items()}
    _write_rows(path, header, [[cfg.mobility, int(cfg.bounded), _fmt(acc["train"]), _fmt(acc["test"]),
                                len(sets["train"]) if sets["train"] else 0, len(sets["test"])]])
    traj = out / "trajectory.csv"
    nodes, power = read_power(data / "traces" / f"{test[0].name}.csv")
    rows = []
    w = m2.window
    for k, j in enumerate(nodes):
        col = power[:, k]
        if not np.any(col > NOISE_FLOOR_DBM):
            continue
        pred = np.full(len(col), math.nan)
        if len(col) > w:
            windows = np.lib.stride_tricks.sliding_window_view(col[:-1], w)
            pred[w:] = predict_values(m2, windows)
        rows += [[s, int(j), repr(float(col[s])), _fmt(float(pred[s])), repr(theta)] for s in range(len(col))]
    _write_rows(traj, ("slot", "node", "true_dbm", "pred_dbm", "theta"), rows)
    return [path, traj]


def _integrated_reports(args):
    lt, m1, m2, name = args
    return [run_integrated(lt.trace, m1, m2, end=end, mobility=lt.mobility, bounded=lt.cfg.bounded, dataset=name)
            for end in window_ends(lt.trace.ell, m1.input_len, m1.horizon)]


def _eval_integrated(cfg, data, entries, m1_path, m2_path, out: Path) -> list[Path]:
    m1 = _load_model(m1_path, SSAN1_KIND, "phase-1")
    m2 = _load_model(m2_path, SSAN2_KIND, "phase-2")
    path = out / "integrated_results.csv"
    detail = out / "integrated_windows.csv"
    detail_header = ("name", "end", "period", "predictable", "n_bits", "n_fp", "n_fn", "n_fp_fixed",
                     "n_fn_fixed", "n_broken")
    test = _split(entries, "test")
    if not test:
        _write_rows(path, RESULT_HEADER, [])
        _write_rows(detail, detail_header, [])
        return [path, detail]
    traces = [_labeled(data, e) for e in test]
    _check_m1(m1, traces, m1_path)
    jobs = [(lt, m1, m2, e.name) for lt, e in zip(traces, test)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            per_trace = list(pool.map(_integrated_reports, jobs))
    else:
        per_trace = [_integrated_reports(j) for j in jobs]
    reports = [r for rs in per_trace for r in rs]
    write_results(path, [Aggregate(cfg.mobility, cfg.bounded, reports)])
    rows = []
    for e, lt, rs in zip(test, traces, per_trace):
        for end, r in zip(window_ends(lt.trace.ell, m1.input_len, m1.horizon), rs):
            rows.append([e.name, end, r.period if r.period is not None else "", int(r.predictable), r.n_bits, r.n_fp,
                         r.n_fn, r.n_fp_fixed, r.n_fn_fixed, r.n_broken])
    _write_rows(detail, detail_header, rows)
    return [path, detail]


def cmd_eval(cfg: ExperimentConfig, data: Path, out: Path, m1: Path | None, m2: Path | None) -> list[Path]:
    _, entries = load_dataset(data)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "phase1":
        return _eval_phase1(cfg, data, entries, m1, out)
    if cfg.experiment == "phase2":
        return _eval_phase2(cfg, data, entries, m2, out)
    return _eval_integrated(cfg, data, entries, m1, m2, out)


# ---------------------------------------------------------------- report


def cmd_report(paths: list[Path], out: Path | None) -> str:
    """Concatenate result CSVs (same header) and render them as an aligned table."""
    header, rows = None, []
    for p in paths:
        try:
            with open(p, newline="") as fh:
                r = list(csv.reader(fh))
        except FileNotFoundError:
            raise CliError(f"result file not found: {p}") from None
        if not r:
            raise CliError(f"{p}: empty file")
        if header is None:
            header = r[0]
        elif r[0] != header:
            raise CliError(f"{p}: columns differ from {paths[0]}")
        rows += r[1:]
    if header is None:
        raise CliError("no result files given")
    if out is not None:
        _write_rows(out, header, rows)
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header] + rows]
    return "\n".join(lines)


# ---------------------------------------------------------------- argparse


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment settings (override --config)")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        t = f.type if isinstance(f.type, str) else f.type.__name__
        if t == "bool":
            g.add_argument(flag, dest=f.name, default=argparse.SUPPRESS, metavar="BOOL",
                           type=lambda s: parse_value(s, "bool"))
        else:
            g.add_argument(flag, dest=f.name, default=argparse.SUPPRESS, type={"int": int, "float": float}.get(t, str))
    p.add_argument("--config", type=Path, help="key=value settings file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopcast", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="simulate networks and write traces plus a manifest")
    gen.add_argument("--out", type=Path, required=True, help="dataset directory")
    _add_config_flags(gen)

    train = sub.add_parser("train", help="train a phase-1 or phase-2 model on the train split")
    train.add_argument("--data", type=Path, required=True)
    train.add_argument("--phase", type=int, choices=(1, 2), required=True)
    train.add_argument("--out", type=Path, help="checkpoint path (default <data>/m<phase>.ckpt)")
    train.add_argument("--standard", action="store_true", help="phase 1: plain self-attention comparator")
    _add_config_flags(train)

    ev = sub.add_parser("eval", help="score checkpoints on the test splits and dump figure data")
    ev.add_argument("--data", type=Path, required=True)
    ev.add_argument("--m1", type=Path)
    ev.add_argument("--m2", type=Path)
    ev.add_argument("--out", type=Path, help="results directory (default <data>/results)")
    _add_config_flags(ev)

    rep = sub.add_parser("report", help="merge result CSVs and print them as a table")
    rep.add_argument("results", type=Path, nargs="+")
    rep.add_argument("--out", type=Path)
    return parser


def _resolve_config(args: argparse.Namespace, base: dict | None = None) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    flags = {k: v for k, v in vars(args).items() if k in names}
    file_settings = dict(base or {})
    if getattr(args, "config", None) is not None:
        try:
            file_settings.update(parse_settings(read_meta(args.config), str(args.config)))
        except FileNotFoundError:
            raise CliError(f"config file not found: {args.config}") from None
    return build_config(file_settings, flags)


def _dataset_settings(data: Path) -> dict:
    meta_path = data / "experiment.meta"
    if not meta_path.exists():
        raise CliError(f"missing dataset: {meta_path} not found (run `hopcast gen` first)")
    return parse_settings(read_meta(meta_path), str(meta_path))


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "gen":
        cfg = _resolve_config(args)
        entries = cmd_gen(cfg, args.out)
        counts = {}
        for e in entries:
            counts[e.split] = counts.get(e.split, 0) + 1
        summary = ", ".join(f"{k}={v}" for k, v in counts.items()) or "no traces"
        print(f"{args.out / 'manifest.csv'}: {len(entries)} entries ({summary})")
    elif args.command == "train":
        cfg = _resolve_config(args, _dataset_settings(args.data))
        out = args.out or args.data / f"m{args.phase}.ckpt"
        print(cmd_train(cfg, args.data, args.phase, out, standard=args.standard))
    elif args.command == "eval":
        cfg = _resolve_config(args, _dataset_settings(args.data))
        for p in cmd_eval(cfg, args.data, args.out or args.data / "results", args.m1, args.m2):
            print(p)
    else:
        print(cmd_report(args.results, args.out))
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except (CliError, CheckpointError, TraceFormatError, NoPeriodError) as exc:
        print(f"hopcast: error: {exc}", file=sys.stderr)
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"hopcast: error: {exc.strerror or exc}{where}", file=sys.stderr)
    except ValueError as exc:
        print(f"hopcast: error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
