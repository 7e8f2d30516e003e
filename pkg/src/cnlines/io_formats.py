"""Bit-exact file formats: image stacks and rotation tables.

A stack file is a single JSON header line (magic "SYMSTACK1", image count,
side length, dtype, byte order) followed by the raw little-endian float32
payload, row-major within an image, image-major overall.  Rotations are
stored as CSV with 17 significant digits so they round-trip through text.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError

STACK_MAGIC = "SYMSTACK1"
ROTATION_HEADER = "index,r11,r12,r13,r21,r22,r23,r31,r32,r33"


def write_stack(path, images: np.ndarray) -> None:
    """Write an (m, N, N) stack of images."""
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 3 or images.shape[1] != images.shape[2]:
        raise FormatError(f"expected (m, N, N) stack, got shape {images.shape}")
    m, N, _ = images.shape
    header = {
        "magic": STACK_MAGIC,
        "m": int(m),
        "N": int(N),
        "dtype": "f32",
        "byteorder": "LE",
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("ascii"))
        fh.write(images.astype("<f4").tobytes())


def read_stack(path) -> np.ndarray:
    """Read a stack file back into an (m, N, N) float64 array."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read stack file {path}: {exc}") from exc
    newline = data.find(b"\n")
    if newline < 0:
        raise FormatError("missing header line")
    try:
        header = json.loads(data[:newline].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}") from exc
    if header.get("magic") != STACK_MAGIC:
        raise FormatError(f"bad magic: {header.get('magic')!r}")
    m, N = int(header["m"]), int(header["N"])
    payload = data[newline + 1 :]
    expected = m * N * N * 4
    if len(payload) != expected:
        raise FormatError(f"payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(m, N, N).astype(float)


def write_rotations(path, rotations: np.ndarray) -> None:
    """Write an (m, 3, 3) rotation stack as CSV."""
    rotations = np.asarray(rotations, dtype=float)
    if rotations.ndim != 3 or rotations.shape[1:] != (3, 3):
        raise FormatError(f"expected (m, 3, 3) rotations, got shape {rotations.shape}")
    lines = [ROTATION_HEADER]
    for idx, rot in enumerate(rotations):
        entries = ",".join(f"{v:.17g}" for v in rot.ravel())
        lines.append(f"{idx},{entries}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_rotations(path) -> np.ndarray:
    """Read a rotation CSV, checking orthonormality of every row."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read rotation file {path}: {exc}") from exc
    lines = text.strip().splitlines()
    if not lines or lines[0].strip() != ROTATION_HEADER:
        raise FormatError("missing or malformed rotation header row")
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 10:
            raise FormatError(f"expected 10 fields per row, got {len(parts)}")
        rot = np.array([float(v) for v in parts[1:]]).reshape(3, 3)
        if np.linalg.norm(rot @ rot.T - np.eye(3)) > 1e-6 or abs(np.linalg.det(rot) - 1) > 1e-6:
            raise FormatError(f"row {parts[0]} is not a rotation matrix")
        out.append(rot)
    if not out:
        raise FormatError("no rotations in file")
    return np.stack(out)
