"""On-disk feature format.

A directory holds ``features.json``, a manifest listing every path in
output order with its array shape and strides, and ``features.bin``, the
arrays as little-endian float64, row-major, concatenated in manifest order.
The manifest records the SHA-256 of the binary file.
"""

import hashlib
import json
import os

import numpy as np

from .errors import FormatError
from .scattering import CoefficientSet, PathKey

MANIFEST = "features.json"
BINARY = "features.bin"
FORMAT_VERSION = 1


def write_features(S, plan, directory):
    """Write ``S`` to ``directory``; returns the manifest path."""
    os.makedirs(directory, exist_ok=True)
    blob = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes()
                    for v in S.entries.values())
    paths, offset = [], 0
    for key, v in S.items():
        meta = S.meta.get(key, {})
        entry = key.as_dict()
        entry.update(rows=int(v.shape[0]), cols=int(v.shape[1]), offset=offset,
                     log2_stride=meta.get("log2_stride"),
                     log2_stride_fr=meta.get("log2_stride_fr"),
                     n1_max=meta.get("n1_max"))
        paths.append(entry)
        offset += v.size
    manifest = {
        "version": FORMAT_VERSION,
        "dtype": "float64",
        "byte_order": "little",
        "layout": "row-major",
        "hyperparameters": plan.hyperparameters,
        "fingerprint": plan.fingerprint,
        "n_paths": len(paths),
        "n_coefficients": offset,
        "sha256": hashlib.sha256(blob).hexdigest(),
        "paths": paths,
    }
    with open(os.path.join(directory, BINARY), "wb") as f:
        f.write(blob)
    manifest_path = os.path.join(directory, MANIFEST)
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1)
        f.write("\n")
    return manifest_path


def read_features(directory):
    """Load a feature directory back into a :class:`CoefficientSet`."""
    with open(os.path.join(directory, MANIFEST), encoding="utf-8") as f:
        manifest = json.load(f)
    with open(os.path.join(directory, BINARY), "rb") as f:
        blob = f.read()
    if hashlib.sha256(blob).hexdigest() != manifest["sha256"]:
        raise FormatError(f"{directory}: binary does not match manifest hash")
    data = np.frombuffer(blob, dtype="<f8")
    if data.size != manifest["n_coefficients"]:
        raise FormatError(f"{directory}: expected {manifest['n_coefficients']} "
                          f"values, found {data.size}")
    entries, meta = {}, {}
    for p in manifest["paths"]:
        key = PathKey(p["order"], p["n2"], p["n_fr"], p["spin"], tuple(p["j"]))
        n = p["rows"] * p["cols"]
        entries[key] = data[p["offset"]:p["offset"] + n].reshape(p["rows"], p["cols"])
        meta[key] = {"n1_max": p["n1_max"], "log2_stride": p["log2_stride"],
                     "log2_stride_fr": p["log2_stride_fr"]}
    return CoefficientSet(entries, meta, manifest["fingerprint"])
