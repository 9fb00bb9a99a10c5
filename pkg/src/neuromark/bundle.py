"""Model bundle files: a text header plus raw little-endian float32 tensors.

Layout: magic "NMRK1\\n", an 8-byte little-endian header length, the JSON
header (canonical form: sorted keys, no whitespace), then each tensor's raw
bytes in the order the header's manifest declares. The header fully
determines every tensor shape before the payload is read, and save -> load
-> save round-trips byte-exactly.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .model import MarkerModel
from .renderer import NuisanceDistribution

MAGIC = b"NMRK1\n"
FORMAT_VERSION = 1


def _phi_to_header(phi):
    return {
        "affine_sigma": phi.affine_sigma,
        "color_delta": phi.color_delta,
        "contrast_min": phi.contrast_min,
        "blur_max": phi.blur_max,
        "blur_kernel": phi.blur_kernel,
        "noise_max": phi.noise_max,
        "canvas": phi.canvas,
        "backgrounds": phi.backgrounds,
    }


def _phi_from_header(d):
    return NuisanceDistribution(**d)


def save_bundle(model, path):
    entries = model.state_entries()
    header = {
        "format_version": FORMAT_VERSION,
        "n": model.n,
        "m": model.m,
        "c": model.c,
        "s": model.s,
        "synthesizer": {
            "variant": model.synth_variant,
            "channels": model.synth_channels,
            "stages": model.synth_stages,
        },
        "recognizer": {"variant": model.recog_variant},
        "phi": _phi_to_header(model.phi),
        "seed": model.seed,
        "metrics": model.metrics,
        "tensors": [{"name": name, "shape": list(arr.shape)} for name, arr in entries],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for _, arr in entries:
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def write_raw_bundle(tensors, path, extra_header=None):
    """Write named float32 tensors in the bundle container format.

    Used for auxiliary weight files (e.g. feature-bank filters named
    conv0.w, conv0.b, ...); full models go through save_bundle.
    """
    entries = list(tensors.items())
    header = dict(extra_header or {})
    header["format_version"] = FORMAT_VERSION
    header["tensors"] = [{"name": name, "shape": list(np.shape(arr))} for name, arr in entries]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for _, arr in entries:
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_raw_bundle(path):
    """Read (header, {name: float32 array}) without building a model."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model bundle (bad magic {magic!r})")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        tensors = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * 4)
            if len(raw) != count * 4:
                raise ValueError(f"{path}: truncated payload at tensor {spec['name']!r}")
            tensors[spec["name"]] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return header, tensors


def load_bundle(path):
    header, tensors = read_raw_bundle(path)
    if header["format_version"] != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {header['format_version']}")
    model = MarkerModel(
        n=header["n"], m=header["m"], c=header["c"], s=header["s"],
        synth_variant=header["synthesizer"]["variant"],
        recog_variant=header["recognizer"]["variant"],
        phi=_phi_from_header(header["phi"]),
        seed=header["seed"],
        synth_channels=header["synthesizer"]["channels"],
        synth_stages=header["synthesizer"]["stages"],
        metrics=header["metrics"],
    )
    for name, arr in model.state_entries():
        if name not in tensors:
            raise ValueError(f"{path}: bundle is missing tensor {name!r}")
        saved = tensors[name]
        if saved.shape != arr.shape:
            raise ValueError(
                f"{path}: tensor {name!r} has shape {saved.shape}, expected {arr.shape}"
            )
        arr[...] = saved
    return model
