"""File emission: flat float64 field dumps with text sidecars, 8-bit PGM
snapshots, and locale-free CSV.

Every format here is byte-reproducible: floats print through a fixed
17-significant-digit formatter, binary dumps are little-endian row-major,
and PGM pixels are rounded deterministically.
"""

from __future__ import annotations

import os

import numpy as np

from .fields import ComplexField, Grid, RealField


def format_float(x: float) -> str:
    """Locale-free decimal with 17 significant digits (round-trip exact)."""
    return f"{float(x):.17g}"


def write_csv(path, header: list[str], rows) -> None:
    """Comma-separated output; floats use the fixed formatter."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [format_float(c) if isinstance(c, (float, np.floating))
                     else str(c) for c in row]
            fh.write(",".join(cells) + "\n")


def _header_lines(grid: Grid, role: str, planes: str) -> str:
    lines = [
        f"dims = {grid.dims}",
        "points = " + " ".join(str(n) for n in grid.points),
        "extents = " + " ".join(format_float(e) for e in grid.extents),
        "origin = " + " ".join(format_float(o) for o in grid.origin),
        f"role = {role}",
        f"planes = {planes}",
        "dtype = float64-le",
        "order = row-major",
    ]
    return "\n".join(lines) + "\n"


def write_field(path, field, role: str) -> None:
    """Flat little-endian float64 dump plus a ``<path>.hdr`` text sidecar.

    Real fields store one plane; complex fields store the real plane
    followed by the imaginary plane.
    """
    if isinstance(field, ComplexField):
        data = np.concatenate([np.ascontiguousarray(field.values.real).ravel(),
                               np.ascontiguousarray(field.values.imag).ravel()])
        planes = "re,im"
    elif isinstance(field, RealField):
        data = np.ascontiguousarray(field.values).ravel()
        planes = "values"
    else:
        raise TypeError("write_field expects a RealField or ComplexField")
    with open(path, "wb") as fh:
        fh.write(data.astype("<f8").tobytes())
    with open(str(path) + ".hdr", "w", newline="\n") as fh:
        fh.write(_header_lines(field.grid, role, planes))


def read_field(path):
    """Inverse of write_field; returns a RealField or ComplexField."""
    with open(str(path) + ".hdr") as fh:
        meta = dict(line.strip().split(" = ", 1) for line in fh if " = " in line)
    points = tuple(int(v) for v in meta["points"].split())
    extents = tuple(float(v) for v in meta["extents"].split())
    origin = tuple(float(v) for v in meta["origin"].split())
    grid = Grid(points, extents, origin)
    raw = np.frombuffer(open(path, "rb").read(), dtype="<f8")
    size = int(np.prod(points))
    if meta["planes"] == "re,im":
        vals = raw[:size].reshape(points) + 1j * raw[size:].reshape(points)
        return ComplexField(grid, vals)
    return RealField(grid, raw.reshape(points))


def write_pgm(path, values: np.ndarray) -> None:
    """8-bit binary PGM of a 2D array normalized to its maximum.

    The array is indexed [ix, iy]; image rows run from high y to low y so
    the picture has +y pointing up and +x pointing right.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    peak = arr.max()
    scaled = arr / peak if peak > 0.0 else arr
    pixels = np.rint(np.clip(scaled, 0.0, 1.0) * 255.0).astype(np.uint8)
    image = pixels.T[::-1, :]  # rows = y descending, columns = x
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode())
        fh.write(image.tobytes())


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
