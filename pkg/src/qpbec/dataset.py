"""Dataset cache: JSON manifests plus raw little-endian float64 arrays.

Every cached stage directory holds a manifest.json describing the producing
config (by hash), the stored arrays (name, shape, dtype, file) and
provenance.  A manifest whose config hash does not match the live config
forces a recompute; stale data is never reused silently.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__

FORMAT_VERSION = 1


def config_hash(payload: dict) -> str:
    """sha256 of the canonical JSON encoding of a config fragment."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def fmt17(value: float) -> str:
    """Fixed 17-significant-digit decimal rendering (round-trips float64)."""
    return f"{value:.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [cell if isinstance(cell, str) else fmt17(float(cell)) for cell in row]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


class DatasetWriter:
    """Accumulates arrays + metadata for one stage directory."""

    def __init__(self, directory: Path, config_payload: dict):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._hash = config_hash(config_payload)
        self._arrays: dict[str, dict] = {}
        self._meta: dict = {}

    def add_array(self, name: str, array: np.ndarray) -> None:
        arr = np.asarray(array)
        if np.iscomplexobj(arr):
            flat = np.empty(arr.shape + (2,), dtype="<f8")
            flat[..., 0] = arr.real
            flat[..., 1] = arr.imag
            dtype = "complex128-as-f8-pairs"
            raw = flat
        else:
            raw = arr.astype("<f8")
            dtype = "<f8"
        fname = f"{name}.bin"
        raw.tofile(self.directory / fname)
        self._arrays[name] = {"file": fname, "shape": list(arr.shape), "dtype": dtype}

    def add_meta(self, **kwargs) -> None:
        self._meta.update(kwargs)

    def finalize(self) -> dict:
        manifest = {
            "format_version": FORMAT_VERSION,
            "config_hash": self._hash,
            "arrays": self._arrays,
            "meta": self._meta,
            "provenance": {
                "code_version": __version__,
                "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            },
        }
        (self.directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        return manifest


class DatasetReader:
    def __init__(self, directory: Path):
        self.directory = Path(directory)
        manifest_path = self.directory / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no manifest in {directory}")
        self.manifest = json.loads(manifest_path.read_text())
        if self.manifest.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"unsupported dataset format {self.manifest.get('format_version')}"
            )

    def matches(self, config_payload: dict) -> bool:
        return self.manifest["config_hash"] == config_hash(config_payload)

    @property
    def meta(self) -> dict:
        return self.manifest["meta"]

    def array(self, name: str) -> np.ndarray:
        entry = self.manifest["arrays"][name]
        shape = tuple(entry["shape"])
        if entry["dtype"] == "complex128-as-f8-pairs":
            raw = np.fromfile(self.directory / entry["file"], dtype="<f8")
            raw = raw.reshape(shape + (2,))
            return raw[..., 0] + 1j * raw[..., 1]
        raw = np.fromfile(self.directory / entry["file"], dtype="<f8")
        return raw.reshape(shape)


def load_if_fresh(directory: Path, config_payload: dict) -> DatasetReader | None:
    """Reader for a cached stage, or None when absent/stale."""
    try:
        reader = DatasetReader(directory)
    except (FileNotFoundError, ValueError, json.JSONDecodeError):
        return None
    return reader if reader.matches(config_payload) else None
