"""On-disk formats: JSON documents, spectrum CSV, binary slice container.

JSON documents carry a ``format_version`` field and, where produced by the
CLI, the fully resolved run ``config``. Angles are stored in radians.

Slice container layout (all little-endian):

    header   uint64 n_slices, uint64 n_theta, uint64 n_r, float64 r_max
    payload  complex128 values, row-major, shape (n_slices, n_theta, n_r)

Node indices and frames live in a JSON sidecar next to the container.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .kernels import CommonLinesDatum, MalformedDatum
from .projection import Phantom, PolarSlice
from .spectral import ReconstructionReport
from .sphere import DirectionSet, PlaneBasis

FORMAT_VERSION = "1.0"
_HEADER = struct.Struct("<QQQd")


class FormatError(ValueError):
    """A file does not follow the expected layout or version."""


def _check_version(doc, what):
    if not isinstance(doc, dict):
        raise FormatError(f"{what}: expected a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{what}: unsupported format_version {version!r}")


def dumps(doc):
    """Deterministic JSON text (sorted keys, repr-exact floats)."""
    return json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def write_text_atomic(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_bytes_atomic(path, data):
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


# --------------------------------------------------------------------------
# datum


def datum_to_doc(datum, config=None):
    doc = {
        "format_version": FORMAT_VERSION,
        "n": int(datum.n),
        "provenance": datum.provenance,
        "pairs": [
            {"i": int(i), "j": int(j), "c_ij": [float(v) for v in a], "c_ji": [float(v) for v in b]}
            for (i, j), a, b in zip(datum.pairs, datum.c_ij, datum.c_ji)
        ],
        "excluded": [[int(i), int(j)] for i, j in datum.excluded],
    }
    if datum.metadata:
        doc["metadata"] = datum.metadata
    if config is not None:
        doc["config"] = config
    return doc


def datum_from_doc(doc):
    _check_version(doc, "datum")
    try:
        entries = doc["pairs"]
        pairs = [(int(p["i"]), int(p["j"])) for p in entries]
        c_ij = [[float(v) for v in p["c_ij"]] for p in entries]
        c_ji = [[float(v) for v in p["c_ji"]] for p in entries]
        for p, a, b in zip(pairs, c_ij, c_ji):
            if len(a) != 2 or len(b) != 2:
                raise MalformedDatum(f"pair {p} does not hold 2-vectors", p)
        return CommonLinesDatum(
            int(doc["n"]),
            np.array(pairs, dtype=np.int64).reshape(-1, 2),
            np.array(c_ij).reshape(-1, 2),
            np.array(c_ji).reshape(-1, 2),
            doc.get("provenance", "oracle"),
            metadata=doc.get("metadata", {}),
            excluded=[tuple(p) for p in doc.get("excluded", [])],
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MalformedDatum):
            raise
        raise MalformedDatum(f"datum document is malformed: {exc}") from exc


def write_datum(path, datum, config=None):
    write_text_atomic(path, dumps(datum_to_doc(datum, config)))


def read_datum(path):
    return datum_from_doc(read_json(path))


# --------------------------------------------------------------------------
# ground truth


def truth_to_doc(ds, config=None):
    doc = {
        "format_version": FORMAT_VERSION,
        "n": ds.n,
        "seed": ds.seed,
        "nodes": [
            {"x": p.tolist(), "b1": a.tolist(), "b2": b.tolist()}
            for p, a, b in zip(ds.points, ds.b1, ds.b2)
        ],
    }
    if config is not None:
        doc["config"] = config
    return doc


def truth_from_doc(doc):
    _check_version(doc, "truth")
    nodes = doc["nodes"]
    if len(nodes) != doc["n"]:
        raise FormatError("truth: node count does not match n")
    return DirectionSet(
        np.array([v["x"] for v in nodes], dtype=float),
        np.array([v["b1"] for v in nodes], dtype=float),
        np.array([v["b2"] for v in nodes], dtype=float),
        doc.get("seed"),
    )


def write_truth(path, ds, config=None):
    write_text_atomic(path, dumps(truth_to_doc(ds, config)))


def read_truth(path):
    return truth_from_doc(read_json(path))


# --------------------------------------------------------------------------
# phantom


def phantom_to_doc(phantom):
    return {
        "format_version": FORMAT_VERSION,
        "min_sigma": phantom.min_sigma,
        "components": [
            {"center": c.tolist(), "amplitude": float(a), "sigma": float(s)}
            for c, a, s in zip(phantom.centers, phantom.amplitudes, phantom.sigmas)
        ],
    }


def phantom_from_doc(doc):
    _check_version(doc, "phantom")
    comps = doc["components"]
    return Phantom(
        [c["center"] for c in comps],
        [c["amplitude"] for c in comps],
        [c["sigma"] for c in comps],
        doc.get("min_sigma", 0.05),
    )


def read_phantom(path):
    return phantom_from_doc(read_json(path))


# --------------------------------------------------------------------------
# reports and verdicts


def report_to_doc(report, config=None, extra=None):
    doc = {"format_version": FORMAT_VERSION, **asdict(report)}
    for name in ("mean_angular_error", "median_angular_error", "max_angular_error"):
        doc[name + "_deg"] = getattr(report, name + "_deg")
    if extra:
        doc.update(extra)
    if config is not None:
        doc["config"] = config
    return doc


def report_from_doc(doc):
    _check_version(doc, "report")
    names = ReconstructionReport.__dataclass_fields__
    return ReconstructionReport(**{k: v for k, v in doc.items() if k in names})


def write_report(path, report, config=None, extra=None):
    write_text_atomic(path, dumps(report_to_doc(report, config, extra)))


def read_report(path):
    return report_from_doc(read_json(path))


def verdict_doc(suite, checks, config=None):
    doc = {
        "format_version": FORMAT_VERSION,
        "suite": suite,
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
    }
    if config is not None:
        doc["config"] = config
    return doc


def read_verdict(path):
    doc = read_json(path)
    _check_version(doc, "verdict")
    return doc


# --------------------------------------------------------------------------
# spectrum CSV


def spectrum_csv(eigenvalues):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "eigenvalue"])
    for k, v in enumerate(eigenvalues):
        writer.writerow([k, repr(float(v))])
    return buf.getvalue()


def write_spectrum(path, eigenvalues):
    write_text_atomic(path, spectrum_csv(eigenvalues))


def read_spectrum(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["eigenvalue"]) for r in rows])


# --------------------------------------------------------------------------
# slice container


def slices_to_bytes(slices):
    if not slices:
        raise ValueError("no slices to write")
    first = slices[0]
    header = _HEADER.pack(len(slices), first.n_theta, first.n_r, float(first.r_max))
    payload = np.stack([np.asarray(s.values) for s in slices]).astype("<c16", copy=False)
    return header + payload.tobytes(order="C")


def slices_sidecar(slices, config=None):
    doc = {
        "format_version": FORMAT_VERSION,
        "n_slices": len(slices),
        "n_theta": slices[0].n_theta,
        "n_r": slices[0].n_r,
        "r_max": float(slices[0].r_max),
        "dtype": "complex128-le",
        "nodes": [
            {"node": int(s.node), "b1": s.frame.b1.tolist(), "b2": s.frame.b2.tolist(), "x": s.frame.normal.tolist()}
            for s in slices
        ],
    }
    if config is not None:
        doc["config"] = config
    return doc


def slices_from_bytes(data, sidecar):
    if len(data) < _HEADER.size:
        raise FormatError("slice container is shorter than its header")
    n_slices, n_theta, n_r, r_max = _HEADER.unpack_from(data)
    expected = _HEADER.size + 16 * n_slices * n_theta * n_r
    if len(data) != expected:
        raise FormatError(f"slice container has {len(data)} bytes, expected {expected}")
    _check_version(sidecar, "slices sidecar")
    nodes = sidecar["nodes"]
    if len(nodes) != n_slices:
        raise FormatError("sidecar node count does not match the container")
    values = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(n_slices, n_theta, n_r)
    out = []
    for k, node in enumerate(nodes):
        arr = values[k].astype(complex)
        arr.setflags(write=False)
        frame = PlaneBasis(node["b1"], node["b2"], node["x"])
        out.append(PolarSlice(int(node["node"]), arr, float(r_max), frame))
    return out


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_slices(path):
    return slices_from_bytes(Path(path).read_bytes(), read_json(sidecar_path(path)))
