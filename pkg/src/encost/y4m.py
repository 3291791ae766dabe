"""Streaming YUV4MPEG2 reader exposing luma planes only.

Chroma planes are skipped on read and never stored. 10-bit sources are
reduced to 8 bit by a right shift of two so all descriptors see the same
sample scale.
"""

import io
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Optional, Union

import numpy as np

from .errors import FormatError, UnsupportedFormatError

SIGNATURE = b"YUV4MPEG2"
FRAME_TAG = b"FRAME"
MAX_HEADER_LEN = 4096

# C tag -> (bit depth, subsampling). Absent C means 420jpeg.
CHROMA_TAGS = {
    "420": (8, "4:2:0"),
    "420jpeg": (8, "4:2:0"),
    "420mpeg2": (8, "4:2:0"),
    "420p10": (10, "4:2:0"),
}


@dataclass(frozen=True)
class VideoHeader:
    width: int
    height: int
    fps_num: int
    fps_den: int
    bit_depth: int = 8
    chroma_subsampling: str = "4:2:0"
    chroma_tag: str = "420jpeg"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise FormatError(f"invalid frame size {self.width}x{self.height}")
        if self.fps_num <= 0 or self.fps_den <= 0:
            raise FormatError(f"invalid frame rate {self.fps_num}:{self.fps_den}")

    @property
    def frame_rate(self) -> Fraction:
        return Fraction(self.fps_num, self.fps_den)

    @property
    def bytes_per_sample(self) -> int:
        return 2 if self.bit_depth > 8 else 1

    @property
    def luma_bytes(self) -> int:
        return self.width * self.height * self.bytes_per_sample

    @property
    def chroma_bytes(self) -> int:
        cw = (self.width + 1) // 2
        ch = (self.height + 1) // 2
        return 2 * cw * ch * self.bytes_per_sample

    def to_line(self) -> bytes:
        return (f"YUV4MPEG2 W{self.width} H{self.height} F{self.fps_num}:{self.fps_den} "
                f"Ip A1:1 C{self.chroma_tag}\n").encode("ascii")


@dataclass(frozen=True)
class LumaFrame:
    """One 8-bit luma plane, shape (height, width), read-only."""

    samples: np.ndarray
    index: int

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]


def _read_line(src: BinaryIO, limit: int) -> bytes:
    buf = bytearray()
    while len(buf) < limit:
        ch = src.read(1)
        if not ch:
            return bytes(buf)
        buf += ch
        if ch == b"\n":
            return bytes(buf)
    raise FormatError("line exceeds maximum Y4M header length")


def parse_header(src: BinaryIO) -> VideoHeader:
    """Read the stream header line and leave ``src`` at the first FRAME marker."""
    line = _read_line(src, MAX_HEADER_LEN)
    if not line.endswith(b"\n"):
        raise FormatError("truncated Y4M header line")
    tokens = line[:-1].split(b" ")
    if tokens[0] != SIGNATURE:
        raise FormatError("missing YUV4MPEG2 signature")

    width = height = None
    fps = None
    tag = "420jpeg"
    for tok in tokens[1:]:
        if not tok:
            continue
        key, val = chr(tok[0]), tok[1:].decode("ascii", "replace")
        try:
            if key == "W":
                width = int(val)
            elif key == "H":
                height = int(val)
            elif key == "F":
                num, den = val.split(":")
                fps = (int(num), int(den))
            elif key == "C":
                tag = val
        except ValueError:
            raise FormatError(f"malformed header field {tok!r}") from None
    if width is None or height is None or fps is None:
        raise FormatError("Y4M header lacks one of W, H, F")
    if tag not in CHROMA_TAGS:
        raise UnsupportedFormatError(f"unsupported chroma tag C{tag}")
    depth, sub = CHROMA_TAGS[tag]
    return VideoHeader(width, height, fps[0], fps[1], depth, sub, tag)


def _read_exact(src: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = src.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def next_frame(stream: "FrameStream") -> Optional[LumaFrame]:
    """Return the next luma plane of ``stream`` or None at end of stream."""
    return stream.next_frame()


class FrameStream:
    """Single-pass iterator over the luma planes of a Y4M byte source."""

    def __init__(self, src: BinaryIO, close: bool = False):
        self._src = src
        self._close = close
        self.header = parse_header(src)
        self._next_index = 0
        self.frame_count: Optional[int] = None

    def next_frame(self) -> Optional[LumaFrame]:
        if self.frame_count is not None:
            return None
        idx = self._next_index
        marker = _read_line(self._src, MAX_HEADER_LEN)
        if not marker:
            self.frame_count = idx
            return None
        if not marker.startswith(FRAME_TAG) or not marker.endswith(b"\n"):
            raise FormatError(f"frame {idx}: missing FRAME marker")
        hdr = self.header
        luma = _read_exact(self._src, hdr.luma_bytes)
        if len(luma) < hdr.luma_bytes:
            raise FormatError(f"frame {idx}: luma plane truncated "
                              f"({len(luma)} of {hdr.luma_bytes} bytes)")
        chroma = _read_exact(self._src, hdr.chroma_bytes)
        if len(chroma) < hdr.chroma_bytes:
            raise FormatError(f"frame {idx}: chroma planes truncated")

        if hdr.bit_depth > 8:
            wide = np.frombuffer(luma, dtype="<u2").reshape(hdr.height, hdr.width)
            if int(wide.max()) >= 1 << hdr.bit_depth:
                raise FormatError(f"frame {idx}: sample exceeds {hdr.bit_depth}-bit range")
            plane = (wide >> (hdr.bit_depth - 8)).astype(np.uint8)
        else:
            plane = np.frombuffer(luma, dtype=np.uint8).reshape(hdr.height, hdr.width).copy()
        plane.setflags(write=False)
        self._next_index += 1
        return LumaFrame(plane, idx)

    def __iter__(self) -> Iterator[LumaFrame]:
        while True:
            frame = self.next_frame()
            if frame is None:
                return
            yield frame

    def close(self):
        if self._close:
            self._src.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_y4m(path: Union[str, Path]) -> FrameStream:
    """Open a Y4M file; ``"-"`` reads standard input."""
    if str(path) == "-":
        return FrameStream(sys.stdin.buffer)
    fh = open(path, "rb")
    try:
        return FrameStream(fh, close=True)
    except Exception:
        fh.close()
        raise


def from_bytes(data: bytes) -> FrameStream:
    return FrameStream(io.BytesIO(data))


def write_y4m(dst: Union[str, Path, BinaryIO], planes: Iterable[np.ndarray],
              fps: tuple = (30, 1), bit_depth: int = 8) -> int:
    """Write luma planes as a 4:2:0 Y4M stream with neutral chroma.

    Returns the number of frames written. Planes hold native-depth samples.
    """
    if isinstance(dst, (str, Path)):
        with open(dst, "wb") as fh:
            return write_y4m(fh, planes, fps, bit_depth)

    header = None
    n = 0
    dtype = np.dtype("<u2") if bit_depth > 8 else np.dtype(np.uint8)
    for plane in planes:
        plane = np.asarray(plane)
        if header is None:
            h, w = plane.shape
            tag = "420p10" if bit_depth == 10 else "420jpeg"
            header = VideoHeader(w, h, fps[0], fps[1], bit_depth, "4:2:0", tag)
            dst.write(header.to_line())
            chroma = np.full(header.chroma_bytes // dtype.itemsize,
                             1 << (bit_depth - 1), dtype=dtype).tobytes()
        dst.write(FRAME_TAG + b"\n")
        dst.write(plane.astype(dtype).tobytes())
        dst.write(chroma)
        n += 1
    return n
