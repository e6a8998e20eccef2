"""File formats: Middlebury .flo flows, binary PPM images, frame directories.

A video is a directory of ``frame_000001.ppm`` style files; flows ship as one
``.flo`` per frame pair. Both formats are little-endian and round-trip
bit-exactly.
"""
from __future__ import annotations

import os
import re

import numpy as np

from ..errors import ContractError, FlowFormatError, TruncatedFileError
from .types import FlowField, ImageBuffer

FLO_MAGIC = np.float32(202021.25)

_PPM_TOKEN = re.compile(rb"^\s*(?:#[^\n]*\n\s*)*(\S+)")


def write_flo(path, flow: FlowField) -> None:
    """Write a flow field in Middlebury .flo layout.

    Header is magic float 202021.25, int32 width, int32 height; payload is
    row-major interleaved (u, v) float32 pairs.
    """
    header = np.empty(1, dtype=[("magic", "<f4"), ("w", "<i4"), ("h", "<i4")])
    header["magic"] = FLO_MAGIC
    header["w"] = flow.width
    header["h"] = flow.height
    data = np.empty((flow.height, flow.width, 2), dtype="<f4")
    data[..., 0] = flow.u
    data[..., 1] = flow.v
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(data.tobytes())


def read_flo(path) -> FlowField:
    """Read a Middlebury .flo file, validating magic and payload length."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12:
        raise TruncatedFileError(f"{path}: .flo header needs 12 bytes, file has {len(raw)}")
    magic = np.frombuffer(raw, dtype="<f4", count=1)[0]
    if magic != FLO_MAGIC:
        raise FlowFormatError(f"{path}: bad .flo magic {magic!r}, expected 202021.25")
    w, h = (int(x) for x in np.frombuffer(raw, dtype="<i4", count=2, offset=4))
    if w < 1 or h < 1:
        raise FlowFormatError(f"{path}: non-positive dims {w}x{h}")
    need = 12 + 8 * w * h
    if len(raw) < need:
        raise TruncatedFileError(f"{path}: expected {need} bytes for {w}x{h} flow, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", count=2 * w * h, offset=12).reshape(h, w, 2)
    return FlowField(u=data[..., 0], v=data[..., 1])


def write_ppm(path, image: ImageBuffer) -> None:
    """Write an image as binary PPM (P6, maxval 255).

    Intensities map linearly from [0, 1] to 0..255 with round-to-nearest.
    Single-channel images are replicated to gray RGB.
    """
    data = image.data
    if image.channels == 1:
        data = np.repeat(data, 3, axis=2)
    payload = np.clip(np.rint(data.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (image.width, image.height))
        fh.write(payload.tobytes())


def _next_token(buf, pos):
    m = _PPM_TOKEN.match(buf[pos:])
    if not m:
        raise FlowFormatError("PPM header ended before all fields were read")
    return m.group(1), pos + m.end()


def read_ppm(path) -> ImageBuffer:
    """Read a binary PPM (P6, 8-bit) into a [0, 1] RGB image."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"P6"):
        raise FlowFormatError(f"{path}: not a binary PPM (missing P6 magic)")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _next_token(raw, pos)
        fields.append(tok)
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise FlowFormatError(f"{path}: non-numeric PPM header field") from exc
    if maxval != 255:
        raise FlowFormatError(f"{path}: only maxval 255 supported, got {maxval}")
    if w < 1 or h < 1:
        raise FlowFormatError(f"{path}: non-positive dims {w}x{h}")
    pos += 1  # single whitespace byte after maxval
    need = 3 * w * h
    if len(raw) - pos < need:
        raise TruncatedFileError(f"{path}: expected {need} payload bytes, got {len(raw) - pos}")
    data = np.frombuffer(raw, dtype=np.uint8, count=need, offset=pos).reshape(h, w, 3)
    return ImageBuffer(data.astype(np.float32) / 255.0)


def frame_name(index: int) -> str:
    return f"frame_{index:06d}.ppm"


def list_frames(directory) -> list:
    """Sorted paths of frame_*.ppm files in a directory; error if none."""
    if not os.path.isdir(directory):
        raise ContractError(f"{directory}: not a directory")
    names = sorted(n for n in os.listdir(directory) if re.fullmatch(r"frame_\d{6}\.ppm", n))
    if not names:
        raise ContractError(f"{directory}: no frame_NNNNNN.ppm files found")
    return [os.path.join(directory, n) for n in names]


def read_video(directory) -> list:
    """Read every frame in a directory; all frames must share dimensions."""
    frames = [read_ppm(p) for p in list_frames(directory)]
    dims = {(f.height, f.width) for f in frames}
    if len(dims) != 1:
        raise ContractError(f"{directory}: frame size mismatch across directory: {sorted(dims)}")
    return frames


def write_video(directory, frames, start_index: int = 1) -> list:
    """Write frames as frame_NNNNNN.ppm starting at start_index; returns paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, frame in enumerate(frames):
        p = os.path.join(directory, frame_name(start_index + i))
        write_ppm(p, frame)
        paths.append(p)
    return paths


def list_flo(directory) -> list:
    """Sorted paths of .flo files in a directory; error if none."""
    if not os.path.isdir(directory):
        raise ContractError(f"{directory}: not a directory")
    names = sorted(n for n in os.listdir(directory) if n.endswith(".flo"))
    if not names:
        raise ContractError(f"{directory}: no .flo files found")
    return [os.path.join(directory, n) for n in names]
