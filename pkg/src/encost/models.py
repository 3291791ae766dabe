"""Content factor, encoding-time and encoding-energy models."""

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import SCHEMA_VERSION, __version__
from .descriptors import BlockGridSpec, DescriptorSet
from .errors import ConfigurationError, DomainError, JoinError

SPATIAL_SOURCES = ("si", "vca", "var", "ultrafast", "none")
TEMPORAL_SOURCES = ("ti", "vca", "flow", "ultrafast", "none")
NORMALIZERS = ("ln", "identity")

# content source tag -> descriptor name in DescriptorSet
_SPATIAL_FIELD = {"si": "si", "vca": "vca_spatial", "var": "var"}
_TEMPORAL_FIELD = {"ti": "ti", "vca": "vca_temporal", "flow": "flow"}

DEFAULT_FLOOR = 1e-6
GOP_SECONDS = 5


@dataclass(frozen=True)
class TimeModelParams:
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 0.0
    xi: float = 0.0
    t0: float = 0.0

    NAMES = ("alpha", "beta", "gamma", "delta", "xi", "t0")

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_array()):
            raise DomainError(f"time model parameters must be finite: {self}")
        if self.t0 < 0:
            raise DomainError(f"offset time t0 must be >= 0, got {self.t0}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "TimeModelParams":
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class EnergyModelParams:
    e0: float
    p: float

    def __post_init__(self):
        if not self.p > 0:
            raise DomainError(f"energy slope must be positive, got {self.p}")


@dataclass(frozen=True)
class ContentFactorSpec:
    spatial_source: str = "none"
    temporal_source: str = "none"
    spatial_normalizer: str = "ln"
    temporal_normalizer: str = "identity"
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if self.spatial_source not in SPATIAL_SOURCES:
            raise ConfigurationError(f"unknown spatial source {self.spatial_source!r}")
        if self.temporal_source not in TEMPORAL_SOURCES:
            raise ConfigurationError(f"unknown temporal source {self.temporal_source!r}")
        if (self.spatial_source == "ultrafast") != (self.temporal_source == "ultrafast"):
            raise ConfigurationError("ultrafast complexity fills both roles and cannot be paired")
        for norm in (self.spatial_normalizer, self.temporal_normalizer):
            if norm not in NORMALIZERS:
                raise ConfigurationError(f"unknown normalizer {norm!r}")
        if not self.floor > 0:
            raise ConfigurationError("content factor floor must be positive")

    @property
    def is_blind(self) -> bool:
        return self.spatial_source == "none" and self.temporal_source == "none"

    @property
    def label(self) -> str:
        return f"{self.spatial_source}/{self.temporal_source}"

    def required_fields(self) -> list:
        if self.spatial_source == "ultrafast":
            return ["ultrafast"]
        out = []
        if self.spatial_source in _SPATIAL_FIELD:
            out.append(_SPATIAL_FIELD[self.spatial_source])
        if self.temporal_source in _TEMPORAL_FIELD:
            out.append(_TEMPORAL_FIELD[self.temporal_source])
        return out


@dataclass(frozen=True)
class EncodingRecord:
    sequence_id: str
    class_id: str
    width: int
    height: int
    n_frames: int
    preset: int
    crf: int
    time_s: float
    n_intra: Optional[int] = None
    fps_num: int = 30
    fps_den: int = 1
    energy_j: Optional[float] = None

    def __post_init__(self):
        if not self.time_s > 0:
            raise DomainError(f"{self.sequence_id}: time_s must be positive")
        if self.n_intra is not None and self.n_intra < 1:
            raise DomainError(f"{self.sequence_id}: n_intra must be >= 1")
        if self.energy_j is not None and not self.energy_j > 0:
            raise DomainError(f"{self.sequence_id}: energy_j must be positive when present")
        if self.width <= 0 or self.height <= 0 or self.n_frames <= 0:
            raise DomainError(f"{self.sequence_id}: geometry and frame count must be positive")

    @property
    def kilopixels(self) -> float:
        """Kilopixels per frame."""
        return self.width * self.height / 1000.0

    @property
    def time_kpix(self) -> float:
        return self.time_s / (self.kilopixels * self.n_frames)

    @property
    def intra_count(self) -> int:
        if self.n_intra is not None:
            return self.n_intra
        return default_intra_count(self.n_frames, self.fps_num / self.fps_den)


def default_intra_count(n_frames: int, frame_rate: float) -> int:
    """Keyframe count for a GOP of about five seconds."""
    gop = max(1, round(GOP_SECONDS * frame_rate))
    return max(1, math.ceil(n_frames / gop))


def _normalize(value: float, how: str) -> float:
    if how == "identity":
        return value
    return math.log(value) if value > 0 else -math.inf


def content_factor(d: Optional[DescriptorSet], spec: ContentFactorSpec) -> float:
    if spec.is_blind:
        return 1.0
    for name in spec.required_fields():
        if d is None or d.get(name) is None:
            seq = d.sequence_id if d is not None else "?"
            raise ConfigurationError(f"descriptor {name!r} missing for sequence {seq}")
    if spec.spatial_source == "ultrafast":
        return d.get("ultrafast")
    factor = 1.0
    if spec.spatial_source != "none":
        cs = d.get(_SPATIAL_FIELD[spec.spatial_source])
        factor *= max(spec.floor, _normalize(cs, spec.spatial_normalizer))
    if spec.temporal_source != "none":
        ct = d.get(_TEMPORAL_FIELD[spec.temporal_source])
        factor *= max(spec.floor, _normalize(ct, spec.temporal_normalizer))
    return factor


def predict_time_kpix(params: TimeModelParams, c, n_intra, crf, preset):
    """Encoding time per kilopixel; accepts scalars or equal-shape arrays."""
    c, n_intra, crf, preset = (np.asarray(v, dtype=np.float64) for v in (c, n_intra, crf, preset))
    if np.any(c <= 0) or np.any(crf <= 0):
        raise DomainError("content factor and CRF must be positive")
    if np.any(n_intra < 1) or np.any(preset <= 0):
        raise DomainError("n_intra must be >= 1 and preset positive")
    p = params
    out = (c ** p.xi * n_intra ** p.delta / crf * preset ** p.alpha
           * np.exp(p.beta * preset + p.gamma) + p.t0)
    return float(out) if out.ndim == 0 else out


def predict_energy(ep: EnergyModelParams, t_kpix, width, height, n_frames):
    t_kpix = np.asarray(t_kpix, dtype=np.float64)
    if np.any(t_kpix < 0):
        raise DomainError("time per kilopixel must be nonnegative")
    out = ep.e0 + ep.p * t_kpix * (np.asarray(width) * np.asarray(height) / 1000.0) * np.asarray(n_frames)
    return float(out) if np.ndim(out) == 0 else out


def predict_record(tp: TimeModelParams, ep: Optional[EnergyModelParams],
                   spec: ContentFactorSpec, d: Optional[DescriptorSet],
                   record: EncodingRecord) -> dict:
    if d is not None and d.sequence_id != record.sequence_id:
        raise JoinError(f"descriptor set {d.sequence_id!r} does not match record "
                        f"{record.sequence_id!r}", [record.sequence_id])
    c = content_factor(d, spec)
    t_kpix = predict_time_kpix(tp, c, record.intra_count, record.crf, record.preset)
    out = {"time_s": t_kpix * record.kilopixels * record.n_frames}
    if ep is not None:
        out["energy_j"] = predict_energy(ep, t_kpix, record.width, record.height, record.n_frames)
    return out


@dataclass
class CostModel:
    """A fitted model as persisted to disk."""

    time_params: TimeModelParams
    content_spec: ContentFactorSpec
    energy_params: Optional[EnergyModelParams] = None
    block_spec: BlockGridSpec = field(default_factory=BlockGridSpec)
    fit_metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "time_params": asdict(self.time_params),
            "energy_params": asdict(self.energy_params) if self.energy_params else None,
            "content_spec": asdict(self.content_spec),
            "block_spec": asdict(self.block_spec),
            "fit_metadata": self.fit_metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CostModel":
        ep = data.get("energy_params")
        return cls(time_params=TimeModelParams(**data["time_params"]),
                   content_spec=ContentFactorSpec(**data["content_spec"]),
                   energy_params=EnergyModelParams(**ep) if ep else None,
                   block_spec=BlockGridSpec(**data.get("block_spec", {})),
                   fit_metadata=data.get("fit_metadata", {}))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CostModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
