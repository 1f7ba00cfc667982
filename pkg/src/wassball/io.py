"""Result files: versioned JSON, the ``WADV`` binary array container, and CSV tables."""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .errors import SchemaError

SCHEMA_VERSION = 1
MAGIC = b"WADV"

SAMPLE_FIELDS = (
    "index",
    "label",
    "clean_label",
    "adversarial_label",
    "initial_loss",
    "final_loss",
    "transport_cost",
    "delta",
    "max_pixel",
    "mass_above_one",
    "mean_dual_iterations",
)


# ---------------------------------------------------------------- binary arrays


def encode_array(array) -> bytes:
    """``WADV`` magic, u32 ndim, u32 dims, then the row-major float64 payload, all little-endian."""
    array = np.ascontiguousarray(array, dtype="<f8")
    header = MAGIC + struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape)
    return header + array.tobytes()


def decode_array(data: bytes) -> np.ndarray:
    if len(data) < 8 or data[:4] != MAGIC:
        raise SchemaError("not a WADV container (bad magic bytes)")
    (ndim,) = struct.unpack_from("<I", data, 4)
    offset = 8 + 4 * ndim
    if len(data) < offset:
        raise SchemaError("truncated WADV header")
    dims = struct.unpack_from(f"<{ndim}I", data, 8)
    count = int(np.prod(dims, dtype=np.int64))
    if len(data) != offset + 8 * count:
        raise SchemaError(f"WADV payload has {len(data) - offset} bytes, header promises {8 * count}")
    return np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(dims).astype(float)


def write_array(path, array) -> None:
    Path(path).write_bytes(encode_array(array))


def read_array(path) -> np.ndarray:
    return decode_array(Path(path).read_bytes())


# ---------------------------------------------------------------- JSON results


def _floats(values) -> list:
    return [float(v) for v in np.ravel(values)]


def sample_record(index: int, result, store_coupling: bool = True) -> dict:
    """JSON-ready record of one :class:`AttackResult`."""
    iters = result.dual_iterations
    record = {
        "index": int(index),
        "label": result.label,
        "clean_label": result.clean_label,
        "adversarial_label": result.adversarial_label,
        "initial_loss": float(result.initial_loss),
        "final_loss": float(result.final_loss),
        "transport_cost": float(result.transport_cost),
        "delta": float(result.delta),
        "max_pixel": float(result.max_pixel),
        "mass_above_one": float(result.mass_above_one),
        "dual_iterations": [int(i) for i in iters],
        "mean_dual_iterations": float(np.mean(iters)) if iters else 0.0,
        "x": _floats(result.x),
        "z": _floats(result.z),
    }
    if store_coupling and result.coupling is not None:
        record["coupling"] = [_floats(row) for row in result.coupling.block]
    return record


def summarize(records: list[dict]) -> dict:
    n = len(records)
    iters = [i for r in records for i in r["dual_iterations"]]
    return {
        "samples": n,
        "clean_accuracy": sum(r["clean_label"] == r["label"] for r in records) / n if n else 0.0,
        "adversarial_accuracy": sum(r["adversarial_label"] == r["label"] for r in records) / n if n else 0.0,
        "mean_dual_iterations": float(np.mean(iters)) if iters else 0.0,
        "max_dual_iterations": int(max(iters)) if iters else 0,
    }


def result_document(config: dict, shape: dict, records: list[dict]) -> dict:
    records = sorted(records, key=lambda r: r["index"])
    return {
        "schema": SCHEMA_VERSION,
        "config": config,
        "shape": shape,
        "samples": records,
        "summary": summarize(records),
    }


def dumps(document: dict) -> str:
    return json.dumps(document, indent=1, sort_keys=True) + "\n"


def load_results(source) -> dict:
    """Parse and validate a result document (path, file object or string)."""
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"result file is not valid JSON: {exc}") from None
    validate(doc)
    return doc


def validate(doc) -> None:
    if not isinstance(doc, dict):
        raise SchemaError("result document must be a JSON object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {doc.get('schema')!r}, expected {SCHEMA_VERSION}")
    for key in ("config", "shape", "samples"):
        if key not in doc:
            raise SchemaError(f"missing top-level key {key!r}")
    shape = doc["shape"]
    try:
        n = int(shape["width"]) * int(shape["height"]) * int(shape.get("channels", 1))
    except (KeyError, TypeError, ValueError):
        raise SchemaError("shape must give integer width and height") from None
    config = doc["config"]
    for key in ("epsilon", "k"):
        if key not in config:
            raise SchemaError(f"config is missing {key!r}")
    if not isinstance(doc["samples"], list):
        raise SchemaError("samples must be a list")
    for i, sample in enumerate(doc["samples"]):
        if not isinstance(sample, dict):
            raise SchemaError(f"sample {i} is not an object")
        for key in ("x", "z"):
            values = sample.get(key)
            if not isinstance(values, list) or len(values) != n:
                raise SchemaError(f"sample {i}: {key!r} must hold {n} numbers")
        if "label" not in sample:
            raise SchemaError(f"sample {i}: missing label")


# ---------------------------------------------------------------- CSV


def to_csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def samples_csv(records: list[dict]) -> str:
    return to_csv(([r[f] for f in SAMPLE_FIELDS] for r in records), SAMPLE_FIELDS)


def trace_rows(results) -> list[tuple]:
    """Mean loss and accuracy per iteration across samples; iteration 0 is the clean input."""
    if not results:
        return []
    rows = [(0, float(np.mean([r.initial_loss for r in results])),
             float(np.mean([r.clean_label == r.label for r in results])))]
    length = max(len(r.trace) for r in results)
    for t in range(length):
        # runs that stopped early keep their last value
        points = [r.trace[min(t, len(r.trace) - 1)] for r in results if r.trace]
        rows.append((t + 1, float(np.mean([p[1] for p in points])), float(np.mean([p[2] for p in points]))))
    return rows


def trace_csv(results) -> str:
    return to_csv(trace_rows(results), ("iteration", "mean_loss", "accuracy"))


def dykstra_csv(log_rows) -> str:
    return to_csv(log_rows, ("iteration", "simplex_residual", "halfspace_residual"))
