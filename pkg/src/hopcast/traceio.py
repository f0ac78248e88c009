"""Trace files: one CSV of per-slot CO bits and RP values plus a key=value sidecar."""

from __future__ import annotations

import csv
from dataclasses import fields
from pathlib import Path

import numpy as np

from .netsim import ObservationTrace, SimConfig


class TraceFormatError(ValueError):
    """A trace or sidecar file does not have the expected layout."""


def trace_header(n_channels: int) -> list[str]:
    return ["slot"] + [f"ch{c}_co" for c in range(n_channels)] + [f"ch{c}_rp" for c in range(n_channels)]


def write_trace(path: str | Path, trace: ObservationTrace) -> None:
    """Floats are written with ``repr`` so reading them back is exact."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(trace.n_channels))
        for t in range(trace.ell):
            w.writerow([t] + [int(b) for b in trace.co[t]] + [repr(float(v)) for v in trace.rp[t]])


def read_trace(path: str | Path, observer: int, theta: float) -> ObservationTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceFormatError(f"{path}: empty file")
    header = rows[0]
    if (len(header) - 1) % 2 or header[0] != "slot":
        raise TraceFormatError(f"{path}: malformed header")
    u = (len(header) - 1) // 2
    if header != trace_header(u):
        raise TraceFormatError(f"{path}: malformed header")
    body = rows[1:]
    co = np.zeros((len(body), u), dtype=np.uint8)
    rp = np.zeros((len(body), u))
    for t, row in enumerate(body):
        if len(row) != 1 + 2 * u or int(row[0]) != t:
            raise TraceFormatError(f"{path}: bad row {t + 2}")
        co[t] = [int(v) for v in row[1 : 1 + u]]
        rp[t] = [float(v) for v in row[1 + u :]]
    return ObservationTrace(observer=observer, co=co, rp=rp, theta=theta)


def write_meta(path: str | Path, meta: dict) -> None:
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n")


def read_meta(path: str | Path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise TraceFormatError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def trace_meta(trace: ObservationTrace, cfg: SimConfig, **extra) -> dict:
    meta = {f.name: getattr(cfg, f.name) for f in fields(SimConfig)}
    meta.update(observer=trace.observer, theta=trace.theta)
    meta.update(extra)
    return meta


def config_from_meta(meta: dict[str, str]) -> SimConfig:
    kw = {}
    for f in fields(SimConfig):
        if f.name in meta:
            kw[f.name] = parse_value(meta[f.name], f.type)
    return SimConfig(**kw)


def parse_value(text: str, type_name) -> object:
    name = type_name if isinstance(type_name, str) else type_name.__name__
    if name == "bool":
        low = text.lower()
        if low in ("1", "true", "yes"):
            return True
        if low in ("0", "false", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if name == "int":
        return int(text)
    if name == "float":
        return float(text)
    return text


def save_trace(stem: str | Path, trace: ObservationTrace, cfg: SimConfig, **extra) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.meta``."""
    stem = Path(stem)
    csv_path, meta_path = stem.with_suffix(".csv"), stem.with_suffix(".meta")
    write_trace(csv_path, trace)
    write_meta(meta_path, trace_meta(trace, cfg, **extra))
    return csv_path, meta_path


def load_trace(stem: str | Path) -> tuple[ObservationTrace, SimConfig, dict[str, str]]:
    stem = Path(stem)
    meta = read_meta(stem.with_suffix(".meta"))
    try:
        observer, theta = int(meta["observer"]), float(meta["theta"])
    except KeyError as exc:
        raise TraceFormatError(f"{stem}.meta: missing {exc.args[0]}") from None
    return read_trace(stem.with_suffix(".csv"), observer, theta), config_from_meta(meta), meta
