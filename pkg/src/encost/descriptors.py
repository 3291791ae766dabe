"""Spatial and temporal content-complexity descriptors.

Every descriptor is computed in a single streaming pass that holds at most
the current and the previous frame. Cross-frame reductions use
``math.fsum`` so results do not depend on frame order or on how per-frame
work was scheduled.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence

import cv2
import numpy as np
from scipy import fft

from . import SCHEMA_VERSION, __version__
from .errors import DegenerateInputError, DomainError, EmptyInputError

SPATIAL = ("si", "vca_spatial", "var")
TEMPORAL = ("ti", "vca_temporal", "flow")
ALL_DESCRIPTORS = SPATIAL + TEMPORAL

# descriptor name -> DescriptorSet attribute
FIELD_OF = {
    "si": "c_s_si",
    "vca_spatial": "c_s_vca",
    "var": "c_s_var",
    "ti": "c_t_ti",
    "vca_temporal": "c_t_vca",
    "flow": "c_t_flow",
    "ultrafast": "c_ultrafast",
}

VAR_BLOCK = 64

# Farneback: pyr_scale, levels, winsize, iterations, poly_n, poly_sigma, flags
FARNEBACK_PARAMS = (0.5, 3, 15, 3, 5, 1.1, 0)


@dataclass(frozen=True)
class BlockGridSpec:
    block_size_vca: int = 32
    block_size_var: int = VAR_BLOCK
    partial_block_policy: str = "drop"

    def __post_init__(self):
        if self.block_size_vca not in (16, 32, 64):
            raise DomainError(f"VCA block size must be 16, 32 or 64, got {self.block_size_vca}")
        if self.block_size_var != VAR_BLOCK:
            raise DomainError("variance block size is fixed at 64")
        if self.partial_block_policy != "drop":
            raise DomainError(f"unknown partial block policy {self.partial_block_policy!r}")


@dataclass
class DescriptorSet:
    sequence_id: str
    frame_count: int = 0
    width: int = 0
    height: int = 0
    c_s_si: Optional[float] = None
    c_s_vca: Optional[float] = None
    c_s_var: Optional[float] = None
    c_t_ti: Optional[float] = None
    c_t_vca: Optional[float] = None
    c_t_flow: Optional[float] = None
    c_ultrafast: Optional[float] = None
    block_spec: BlockGridSpec = field(default_factory=BlockGridSpec)
    frame_aggregate: str = "mean"

    def get(self, name: str) -> Optional[float]:
        return getattr(self, FIELD_OF[name])

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "sequence_id": self.sequence_id,
            "width": self.width,
            "height": self.height,
            "frame_count": self.frame_count,
            "block_size_vca": self.block_spec.block_size_vca,
            "block_size_var": self.block_spec.block_size_var,
            "partial_block_policy": self.block_spec.partial_block_policy,
            "frame_aggregate": self.frame_aggregate,
        }
        for name, attr in FIELD_OF.items():
            value = getattr(self, attr)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DescriptorSet":
        spec = BlockGridSpec(data.get("block_size_vca", 32),
                             data.get("block_size_var", VAR_BLOCK),
                             data.get("partial_block_policy", "drop"))
        kwargs = {attr: (float(data[name]) if name in data else None)
                  for name, attr in FIELD_OF.items()}
        return cls(sequence_id=str(data["sequence_id"]),
                   frame_count=int(data.get("frame_count", 0)),
                   width=int(data.get("width", 0)),
                   height=int(data.get("height", 0)),
                   block_spec=spec,
                   frame_aggregate=data.get("frame_aggregate", "mean"),
                   **kwargs)


def _plane(frame) -> np.ndarray:
    return np.asarray(getattr(frame, "samples", frame))


def sobel_magnitude(frame) -> np.ndarray:
    """Per-pixel Sobel gradient magnitude with edge-replicated borders."""
    x = _plane(frame).astype(np.float64)
    if x.ndim != 2 or x.shape[0] < 3 or x.shape[1] < 3:
        raise DegenerateInputError(f"Sobel needs a frame of at least 3x3, got {x.shape}")
    p = np.pad(x, 1, mode="edge")
    # rows: top/mid/bottom, columns: left/mid/right of the padded frame
    tl, tc, tr = p[:-2, :-2], p[:-2, 1:-1], p[:-2, 2:]
    ml, mr = p[1:-1, :-2], p[1:-1, 2:]
    bl, bc, br = p[2:, :-2], p[2:, 1:-1], p[2:, 2:]
    gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl)
    gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr)
    return np.sqrt(gx * gx + gy * gy)


def _rms(a: np.ndarray) -> float:
    return math.sqrt(float(np.mean(np.square(a, dtype=np.float64))))


def _texture_weights(w: int) -> np.ndarray:
    i = np.arange(w, dtype=np.float64)
    ij = np.outer(i, i) / (w * w)
    return np.exp(np.abs(ij ** 2 - 1.0))


def _block_grid(x: np.ndarray, w: int) -> np.ndarray:
    """Full w x w blocks of ``x`` in raster order, shape (C, w, w)."""
    nby, nbx = x.shape[0] // w, x.shape[1] // w
    if nby == 0 or nbx == 0:
        raise DegenerateInputError(f"frame {x.shape[1]}x{x.shape[0]} smaller than one {w}x{w} block")
    cropped = x[:nby * w, :nbx * w]
    return cropped.reshape(nby, w, nbx, w).swapaxes(1, 2).reshape(nby * nbx, w, w)


def block_textures(frame, spec: BlockGridSpec = BlockGridSpec()) -> np.ndarray:
    """DCT texture energy of every full block of ``frame``, raster order."""
    w = spec.block_size_vca
    blocks = _block_grid(_plane(frame).astype(np.float64), w)
    coeffs = fft.dctn(blocks, type=2, norm="ortho", axes=(1, 2))
    return np.einsum("kij,ij->k", np.abs(coeffs), _texture_weights(w))


def block_texture(frame, k: int, spec: BlockGridSpec = BlockGridSpec()) -> float:
    x = _plane(frame)
    w = spec.block_size_vca
    nbx = x.shape[1] // w
    count = (x.shape[0] // w) * nbx
    if not 0 <= k < count:
        raise IndexError(f"block index {k} outside 0..{count - 1}")
    by, bx = divmod(k, nbx)
    block = x[by * w:(by + 1) * w, bx * w:(bx + 1) * w].astype(np.float64)
    coeffs = fft.dctn(block, type=2, norm="ortho")
    return float(np.sum(np.abs(coeffs) * _texture_weights(w)))


def _block_variance_frame(x: np.ndarray) -> float:
    blocks = _block_grid(x.astype(np.float64), VAR_BLOCK)
    variances = blocks.reshape(len(blocks), -1).var(axis=1)
    return math.fsum(variances) / (len(blocks) * VAR_BLOCK ** 2)


def _as_uint8(x: np.ndarray) -> np.ndarray:
    if x.dtype == np.uint8:
        return np.ascontiguousarray(x)
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def flow_components(prev, cur) -> tuple:
    """Mean absolute horizontal and vertical Farneback displacement."""
    a, b = _as_uint8(_plane(prev)), _as_uint8(_plane(cur))
    if np.array_equal(a, b):
        return 0.0, 0.0
    flow = cv2.calcOpticalFlowFarneback(a, b, None, *FARNEBACK_PARAMS)
    return float(np.mean(np.abs(flow[..., 0]))), float(np.mean(np.abs(flow[..., 1])))


class DescriptorAccumulator:
    """Streaming computation of a selection of descriptors.

    Feed frames in presentation order with :meth:`push`, then call
    :meth:`finish`.
    """

    def __init__(self, which: Iterable[str] = ALL_DESCRIPTORS,
                 spec: BlockGridSpec = BlockGridSpec(), frame_aggregate: str = "mean"):
        self.which = tuple(which)
        unknown = set(self.which) - set(ALL_DESCRIPTORS)
        if unknown:
            raise DomainError(f"unknown descriptors: {', '.join(sorted(unknown))}")
        if frame_aggregate not in ("mean", "max"):
            raise DomainError(f"frame aggregate must be mean or max, got {frame_aggregate!r}")
        self.spec = spec
        self.frame_aggregate = frame_aggregate
        self.n_frames = 0
        self.shape = None
        self._prev = None
        self._prev_tex = None
        self._values: Dict[str, list] = {name: [] for name in self.which}

    def _run(self, name, fn, *args):
        try:
            return fn(*args)
        except DegenerateInputError as exc:
            raise type(exc)(f"{name}: {exc}") from exc

    def push(self, frame):
        x = _plane(frame)
        if self.shape is not None and x.shape != self.shape:
            raise DegenerateInputError(f"frame {self.n_frames} shape {x.shape} differs from {self.shape}")
        self.shape = x.shape
        vals = self._values
        w = self.spec.block_size_vca
        need_tex = "vca_spatial" in vals or "vca_temporal" in vals
        tex = self._run("vca", block_textures, x, self.spec) if need_tex else None

        if "si" in vals:
            vals["si"].append(_rms(self._run("si", sobel_magnitude, x)))
        if "vca_spatial" in vals:
            vals["vca_spatial"].append(math.fsum(tex) / (len(tex) * w * w))
        if "var" in vals:
            vals["var"].append(self._run("var", _block_variance_frame, x))

        prev = self._prev
        if prev is not None:
            if "ti" in vals:
                diff = x.astype(np.float64) - prev.astype(np.float64)
                vals["ti"].append(_rms(diff))
            if "vca_temporal" in vals:
                vals["vca_temporal"].append(
                    math.fsum(np.abs(tex - self._prev_tex)) / (len(tex) * w * w))
            if "flow" in vals:
                u, v = flow_components(prev, x)
                vals["flow"].append(abs(u + v))
        self._prev = x
        self._prev_tex = tex
        self.n_frames += 1

    def _reduce(self, name: str, values: Sequence[float]) -> float:
        if not values:
            return 0.0
        if name == "flow":
            # summed over pairs, normalised by the frame count
            return math.fsum(values) / self.n_frames
        if name in ("si", "ti") and self.frame_aggregate == "max":
            return max(values)
        return math.fsum(values) / len(values)

    def finish(self) -> Dict[str, float]:
        if self.n_frames == 0:
            raise EmptyInputError("stream contains no frames")
        return {name: self._reduce(name, vals) for name, vals in self._values.items()}


def _single(name, frames, spec=BlockGridSpec(), frame_aggregate="mean") -> float:
    acc = DescriptorAccumulator((name,), spec, frame_aggregate)
    for frame in frames:
        acc.push(frame)
    return acc.finish()[name]


def spatial_information(frames, frame_aggregate: str = "mean") -> float:
    return _single("si", frames, frame_aggregate=frame_aggregate)


def temporal_information(frames, frame_aggregate: str = "mean") -> float:
    return _single("ti", frames, frame_aggregate=frame_aggregate)


def vca_spatial(frames, spec: BlockGridSpec = BlockGridSpec()) -> float:
    return _single("vca_spatial", frames, spec)


def vca_temporal(frames, spec: BlockGridSpec = BlockGridSpec()) -> float:
    return _single("vca_temporal", frames, spec)


def block_variance(frames) -> float:
    return _single("var", frames)


def optical_flow_displacement(frames) -> float:
    return _single("flow", frames)


def ultrafast_complexity(t_preset13: float, width: int, height: int, n_frames: int) -> float:
    """Fastest-preset encode time converted to seconds per kilopixel."""
    if not t_preset13 > 0 or width <= 0 or height <= 0 or n_frames <= 0:
        raise DomainError("ultrafast complexity needs positive time, geometry and frame count")
    return t_preset13 * 1000.0 / (width * height * n_frames)


def analyze(frames, spec: BlockGridSpec = BlockGridSpec(),
            which: Iterable[str] = ALL_DESCRIPTORS, sequence_id: str = "",
            ultrafast_time: Optional[float] = None,
            frame_aggregate: str = "mean") -> DescriptorSet:
    """Compute the selected descriptors of one sequence in a single pass."""
    acc = DescriptorAccumulator(which, spec, frame_aggregate)
    for frame in frames:
        acc.push(frame)
    values = acc.finish()
    h, w = acc.shape
    out = DescriptorSet(sequence_id=sequence_id, frame_count=acc.n_frames, width=w, height=h,
                        block_spec=spec, frame_aggregate=frame_aggregate)
    for name, value in values.items():
        setattr(out, FIELD_OF[name], value)
    if ultrafast_time is not None:
        out.c_ultrafast = ultrafast_complexity(ultrafast_time, w, h, acc.n_frames)
    return out

