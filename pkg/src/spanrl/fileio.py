"""On-disk formats: parameter checkpoints, offline datasets, curves, summaries.

Binary layouts (all integers and floats little-endian):

Checkpoint (magic ``SRLCKPT1``)
    magic[8] | u32 meta_len | meta JSON (utf-8) | u32 count |
    per entry: u16 name_len | name utf-8 | u8 ndim | u32 dims[ndim] | f64 data

Dataset (magic ``SRLDSET1``)
    magic[8] | u32 meta_len | meta JSON (utf-8) |
    f64 states[n, d] | f64 actions[n, a] | f64 rewards[n] |
    f64 next_states[n, d] | f64 dones[n]

The curve CSV starts with a ``# spanrl-curve-v1`` comment line followed by the
header ``step,mean_return,std_return,ep_returns_json``; the per-episode
returns ride along as a JSON array so no information is lost to aggregation.
Run summaries are JSON documents with an explicit ``schema`` field.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from typing import Dict, List, Tuple

import numpy as np

from .errors import CheckpointError
from .iql import OfflineDataset
from .metrics import EvalRecord, RunSummary

CKPT_MAGIC = b"SRLCKPT1"
DSET_MAGIC = b"SRLDSET1"
CURVE_SCHEMA = "spanrl-curve-v1"


def write_checkpoint(path, meta: Dict, arrays: Dict[str, np.ndarray]):
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<I", len(meta_bytes)))
        f.write(meta_bytes)
        f.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            name_bytes = name.encode("utf-8")
            f.write(struct.pack("<H", len(name_bytes)))
            f.write(name_bytes)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def read_checkpoint(path) -> Tuple[Dict, Dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        if f.read(8) != CKPT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (meta_len,) = struct.unpack("<I", f.read(4))
        meta = json.loads(f.read(meta_len).decode("utf-8"))
        (count,) = struct.unpack("<I", f.read(4))
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(f.read(8 * n), dtype="<f8").reshape(shape)
            arrays[name] = data.astype(np.float64)
        return meta, arrays


def save_network_checkpoint(path, net, extra_meta: Dict = None):
    meta = {"network": net.meta()}
    meta.update(extra_meta or {})
    write_checkpoint(path, meta, {n: v for n, v, _ in net.store.items()})


def write_dataset(path, dataset: OfflineDataset):
    meta_bytes = json.dumps(dataset.meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(DSET_MAGIC)
        f.write(struct.pack("<I", len(meta_bytes)))
        f.write(meta_bytes)
        for arr in (dataset.states, dataset.actions, dataset.rewards,
                    dataset.next_states, dataset.dones):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_dataset(path) -> OfflineDataset:
    with open(path, "rb") as f:
        if f.read(8) != DSET_MAGIC:
            raise CheckpointError(f"{path}: not a dataset file")
        (meta_len,) = struct.unpack("<I", f.read(4))
        meta = json.loads(f.read(meta_len).decode("utf-8"))
        n = int(meta["size"])
        d = int(meta["obs_dim"])
        a = int(meta["action_dim"])

        def block(rows, cols=None):
            count = rows * (cols or 1)
            arr = np.frombuffer(f.read(8 * count), dtype="<f8").astype(np.float64)
            return arr.reshape(rows, cols) if cols else arr

        states = block(n, d)
        actions = block(n, a)
        rewards = block(n)
        next_states = block(n, d)
        dones = block(n)
        leftover = f.read(1)
        if leftover:
            raise CheckpointError(f"{path}: trailing bytes after dataset payload")
    return OfflineDataset(states, actions, rewards, next_states, dones, meta)


def write_curve_csv(path, curve: List[EvalRecord]):
    buf = io.StringIO()
    buf.write(f"# {CURVE_SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "mean_return", "std_return", "ep_returns_json"])
    for rec in curve:
        writer.writerow([
            rec.step,
            repr(rec.mean),
            repr(rec.std),
            json.dumps([float(r) for r in rec.returns]),
        ])
    with open(path, "w", newline="") as f:
        f.write(buf.getvalue())


def read_curve_csv(path) -> List[EvalRecord]:
    records = []
    with open(path, newline="") as f:
        first = f.readline()
        if not first.startswith(f"# {CURVE_SCHEMA}"):
            raise CheckpointError(f"{path}: unsupported curve schema")
        reader = csv.reader(f)
        header = next(reader)
        if header[:4] != ["step", "mean_return", "std_return", "ep_returns_json"]:
            raise CheckpointError(f"{path}: unexpected curve header {header}")
        for row in reader:
            records.append(EvalRecord(step=int(row[0]), returns=json.loads(row[3])))
    return records


def write_summary_json(path, summary: RunSummary):
    with open(path, "w") as f:
        json.dump(summary.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def read_summary_json(path) -> RunSummary:
    with open(path) as f:
        return RunSummary.from_json_dict(json.load(f))
