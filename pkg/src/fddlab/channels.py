"""Seeded geometric multipath channel generation and dataset I/O.

Channels are sums of a few plane-wave paths with complex Gaussian gains and
azimuths drawn inside a configurable sector, which gives the angular sparsity
that makes few-bit feature feedback meaningful.  Datasets are stored in a
compact binary format (float32 on disk, float64 in memory) with a JSON
manifest sidecar carrying splits and metadata.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

MAGIC = b"MMC1"
FORMAT_VERSION = 1


class DatasetError(Exception):
    """Base class for dataset file problems."""


class BadMagicError(DatasetError):
    pass


class VersionMismatchError(DatasetError):
    pass


class TruncatedPayloadError(DatasetError):
    pass


@dataclass
class GeometryParams:
    """Knobs of the synthetic multipath geometry; the seed fully determines
    the generated samples."""
    m_antennas: int = 8
    min_paths: int = 3
    max_paths: int = 8
    sector_deg: float = 120.0      # azimuth drawn uniformly in +-sector/2
    sector_center_deg: float = 0.0
    layout: str = "ula"            # "ula" or "upa"
    upa_rows: int = 0              # rows x cols must equal m_antennas for upa
    seed: int = 0
    environment: int = 0

    def __post_init__(self):
        if self.min_paths < 1:
            raise ValueError("path count must be >= 1")
        if self.max_paths < self.min_paths:
            raise ValueError("max_paths < min_paths")
        if self.layout not in ("ula", "upa"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.layout == "upa":
            if self.upa_rows <= 0 or self.m_antennas % self.upa_rows != 0:
                raise ValueError("upa_rows must divide m_antennas")


@dataclass
class ChannelDataset:
    """Complex per-user channel vectors with split tags and radio metadata."""
    m_antennas: int
    samples: np.ndarray            # (count, M) complex128
    environment: int = 0
    splits: dict = field(default_factory=dict)   # name -> np.ndarray of indices
    noise_power: float = 0.1
    tx_power: float = 1.0
    seed: int = 0

    def split(self, name: str) -> np.ndarray:
        return self.samples[self.splits[name]]

    def validate(self) -> None:
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("non-finite channel entries")
        used = np.concatenate([np.asarray(v) for v in self.splits.values()]) \
            if self.splits else np.array([], dtype=int)
        if used.size and (used.size != np.unique(used).size):
            raise ValueError("splits overlap")
        if used.size and (used.min() < 0 or used.max() >= len(self.samples)):
            raise ValueError("split index out of range")


def steering_vector(layout: str, m_antennas: int, azimuth_rad: float,
                    elevation_rad: float = 0.0, upa_rows: int = 0) -> np.ndarray:
    """Half-wavelength array response; unit-modulus entries, ||a||^2 = M."""
    if layout == "ula":
        idx = np.arange(m_antennas)
        return np.exp(1j * np.pi * idx * np.sin(azimuth_rad))
    if layout == "upa":
        cols = m_antennas // upa_rows
        r = np.arange(upa_rows)[:, None]
        c = np.arange(cols)[None, :]
        phase = np.pi * (r * np.sin(elevation_rad)
                         + c * np.sin(azimuth_rad) * np.cos(elevation_rad))
        return np.exp(1j * phase).reshape(-1)
    raise ValueError(f"unknown layout {layout!r}")


def multipath_vector(params: GeometryParams, angles, gains,
                     elevations=None) -> np.ndarray:
    """h = sum_p gain_p * a(theta_p) for explicit path angles/gains."""
    angles = np.atleast_1d(angles)
    gains = np.atleast_1d(gains)
    if elevations is None:
        elevations = np.zeros_like(angles)
    h = np.zeros(params.m_antennas, dtype=np.complex128)
    for theta, el, g in zip(angles, elevations, gains):
        h += g * steering_vector(params.layout, params.m_antennas, theta, el,
                                 params.upa_rows)
    return h


def generate(params: GeometryParams, count: int,
             split_fractions: dict | None = None,
             noise_power: float = 0.1, tx_power: float = 1.0) -> ChannelDataset:
    """Draw ``count`` channels; the dataset is rescaled so the average
    per-sample ||h||^2 equals M exactly."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(np.random.PCG64(params.seed))
    half = np.deg2rad(params.sector_deg) / 2.0
    center = np.deg2rad(params.sector_center_deg)
    samples = np.empty((count, params.m_antennas), dtype=np.complex128)
    for i in range(count):
        n_paths = int(rng.integers(params.min_paths, params.max_paths + 1))
        angles = center + rng.uniform(-half, half, size=n_paths)
        if params.layout == "upa":
            elevations = rng.uniform(-np.pi / 12, np.pi / 12, size=n_paths)
        else:
            elevations = np.zeros(n_paths)
        scale = np.sqrt(0.5 / n_paths)
        gains = scale * (rng.standard_normal(n_paths)
                         + 1j * rng.standard_normal(n_paths))
        samples[i] = multipath_vector(params, angles, gains, elevations)

    mean_energy = float(np.mean(np.sum(np.abs(samples) ** 2, axis=1)))
    samples *= np.sqrt(params.m_antennas / mean_energy)

    if split_fractions is None:
        split_fractions = {"train": 0.7, "val": 0.1, "test": 0.2}
    perm = rng.permutation(count)
    splits = {}
    start = 0
    for name, frac in split_fractions.items():
        n = int(round(frac * count))
        splits[name] = np.sort(perm[start:start + n])
        start += n

    ds = ChannelDataset(params.m_antennas, samples, params.environment, splits,
                        noise_power, tx_power, params.seed)
    ds.validate()
    return ds


# ---------------------------------------------------------------------------
# file format: MAGIC | u32 version | u32 M | u32 count | count*M (re,im) f32
# plus "<path>.json" manifest with splits and metadata


def _manifest_path(path) -> Path:
    return Path(str(path) + ".json")


def save(dataset: ChannelDataset, path) -> None:
    path = Path(path)
    count, m = dataset.samples.shape
    payload = np.empty((count, m, 2), dtype="<f4")
    payload[:, :, 0] = dataset.samples.real
    payload[:, :, 1] = dataset.samples.imag
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, m, count))
        f.write(payload.tobytes())
    manifest = {
        "count": count,
        "m_antennas": m,
        "environment": dataset.environment,
        "noise_power": dataset.noise_power,
        "tx_power": dataset.tx_power,
        "seed": dataset.seed,
        "splits": {k: np.asarray(v).tolist() for k, v in dataset.splits.items()},
    }
    with open(_manifest_path(path), "w") as f:
        json.dump(manifest, f, sort_keys=True)


def load(path) -> ChannelDataset:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic")
    version, m, count = struct.unpack("<III", raw[4:16])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {FORMAT_VERSION}")
    expected = 16 + count * m * 8
    if len(raw) != expected:
        raise TruncatedPayloadError(f"{path}: payload {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw[16:], dtype="<f4").reshape(count, m, 2)
    samples = flat[:, :, 0].astype(np.float64) + 1j * flat[:, :, 1].astype(np.float64)

    mpath = _manifest_path(path)
    if not mpath.exists():
        raise TruncatedPayloadError(f"{mpath}: manifest sidecar missing")
    manifest = json.loads(mpath.read_text())
    if manifest["count"] != count or manifest["m_antennas"] != m:
        raise TruncatedPayloadError(
            f"{path}: manifest count/M {manifest['count']}/{manifest['m_antennas']} "
            f"does not match payload {count}/{m}")
    splits = {k: np.asarray(v, dtype=np.int64) for k, v in manifest["splits"].items()}
    ds = ChannelDataset(m, samples, manifest["environment"], splits,
                        manifest["noise_power"], manifest["tx_power"], manifest["seed"])
    ds.validate()
    return ds


def complex_awgn(rng: np.random.Generator, shape, noise_power: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise with E|n|^2 = noise_power."""
    scale = np.sqrt(noise_power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def geometry_from_dict(d: dict) -> GeometryParams:
    fields = {k: d[k] for k in asdict(GeometryParams()) if k in d}
    return GeometryParams(**fields)
