"""On-disk formats: the flow checkpoint container and the CSV exports.

Checkpoint layout (all integers little-endian)::

    8 bytes   magic  b"DCFLOW\\x00\\x00"
    4 bytes   uint32 format version
    8 bytes   uint64 header length H
    H bytes   UTF-8 JSON header (sorted keys): param space, flow
              hyperparameters, and a section table {name, shape, offset}
    ...       payload: float64 little-endian arrays, offsets in values
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .flow import ConditionalFlow
from .params import ParamSpace

MAGIC = b"DCFLOW\x00\x00"
VERSION = 1


def _sections(flow: ConditionalFlow):
    yield "context_mean", flow.context_mean
    yield "context_scale", flow.context_scale
    for li, net in enumerate(flow.conditioners):
        for pi, p in enumerate(net.params):
            kind = "W" if pi % 2 == 0 else "b"
            yield f"layer{li}.{kind}{pi // 2}", p


def checkpoint_bytes(flow: ConditionalFlow) -> bytes:
    table, chunks, offset = [], [], 0
    for name, arr in _sections(flow):
        arr = np.ascontiguousarray(arr, dtype="<f8")
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.size
    header = {"format": "domainchar-flow", "version": VERSION,
              "space": flow.space.to_dict(), "flow": flow.hyperparameters(),
              "sections": table}
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<IQ", VERSION, len(hb)) + hb + b"".join(chunks)


def save_flow(flow: ConditionalFlow, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(flow))


def load_flow(path) -> ConditionalFlow:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a flow checkpoint")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[20:20 + hlen])
    payload = np.frombuffer(data[20 + hlen:], dtype="<f8")
    hp = header["flow"]
    flow = ConditionalFlow(ParamSpace.from_dict(header["space"]), hp["context_dim"],
                           hp["num_layers"], hp["hidden"], hp["num_bins"],
                           hp["tail_bound"])
    targets = dict(_sections(flow))
    for sec in header["sections"]:
        n = int(np.prod(sec["shape"], dtype=int))
        arr = payload[sec["offset"]:sec["offset"] + n].reshape(sec["shape"])
        targets[sec["name"]][...] = arr
    return flow


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_coverage(path, curve) -> None:
    write_csv(path, ["gamma", "coverage"], zip(curve.levels, curve.coverage))


def write_corner(prefix, corner) -> tuple[Path, Path, Path]:
    """Write the ``<prefix>_*.csv`` corner exports in long format."""
    prefix = Path(prefix)
    mpath = prefix.with_name(prefix.name + "_marginals.csv")
    ppath = prefix.with_name(prefix.name + "_pairs.csv")
    rows = []
    for d, (edges, masses) in enumerate(zip(corner.edges, corner.marginals)):
        for b, m in enumerate(masses):
            rows.append((corner.names[d], b, edges[b], edges[b + 1], m))
    write_csv(mpath, ["dim", "bin", "lower", "upper", "mass"], rows)
    rows = []
    for (i, j), grid in corner.pairs.items():
        area = corner.cell_area(i, j)
        for bi in range(grid.shape[0]):
            for bj in range(grid.shape[1]):
                rows.append((corner.names[i], corner.names[j], bi, bj, grid[bi, bj] / area))
    write_csv(ppath, ["dim_i", "dim_j", "bin_i", "bin_j", "density"], rows)
    levels = []
    for (i, j), ts in corner.iso_levels.items():
        area = corner.cell_area(i, j)
        for lvl, t in zip(corner.levels, ts):
            levels.append((corner.names[i], corner.names[j], lvl, t / area))
    lpath = prefix.with_name(prefix.name + "_levels.csv")
    write_csv(lpath, ["dim_i", "dim_j", "level", "density_threshold"], levels)
    return mpath, ppath, lpath
