"""On-disk field format: a ``key = value`` text manifest beside a raw payload.

The payload holds IEEE-754 float64 little-endian values in row-major order
(for vector fields, the x component followed by the y component). The
manifest records the grid, the stagger tag, the payload name and its CRC-32.
"""

from __future__ import annotations

import zlib
from pathlib import Path
from typing import Union

import numpy as np

from .fields import LOCATIONS, NODE, XFACE, YFACE, Grid2, ScalarField, VectorField2

FORMAT = "stokeselast-field/1"
DTYPE = "f64le"
VECTOR_TAGS = {"mac": (XFACE, YFACE), "node": (NODE, NODE)}

Field = Union[ScalarField, VectorField2]


class FieldFileError(ValueError):
    """Malformed or inconsistent field file."""


class ChecksumError(FieldFileError):
    pass


class DimensionError(FieldFileError):
    pass


def _format_float(v: float) -> str:
    return repr(float(v))


def write_field(path, f: Field, name: str = "") -> Path:
    """Write ``f`` as ``<path>`` (manifest) plus ``<path>.f64`` (payload)."""
    path = Path(path)
    payload_path = path.with_name(path.name + ".f64")
    if isinstance(f, VectorField2):
        kind, tag = "vector", "mac" if f.staggered else "node"
        parts = [f.ux.values, f.uy.values]
    elif isinstance(f, ScalarField):
        kind, tag = "scalar", f.location
        parts = [f.values]
    else:
        raise TypeError(f"cannot write {type(f).__name__}")
    data = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in parts)
    g = f.grid
    manifest = {
        "format": FORMAT,
        "name": name or path.stem,
        "kind": kind,
        "stagger": tag,
        "nx": g.nx,
        "ny": g.ny,
        "hx": _format_float(g.hx),
        "hy": _format_float(g.hy),
        "origin_x": _format_float(g.origin[0]),
        "origin_y": _format_float(g.origin[1]),
        "dtype": DTYPE,
        "values": len(data) // 8,
        "payload": payload_path.name,
        "crc32": f"{zlib.crc32(data):08x}",
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    payload_path.write_bytes(data)
    path.write_text("".join(f"{k} = {v}\n" for k, v in manifest.items()), encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FieldFileError(f"{path}:{n}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def read_field(path) -> Field:
    """Read a field written by :func:`write_field`, verifying size and checksum."""
    path = Path(path)
    m = read_manifest(path)
    try:
        if m.get("format") != FORMAT:
            raise FieldFileError(f"unsupported format {m.get('format')!r}")
        if m.get("dtype") != DTYPE:
            raise FieldFileError(f"unsupported element type {m.get('dtype')!r}")
        grid = Grid2(int(m["nx"]), int(m["ny"]), float(m["hx"]), float(m["hy"]),
                     (float(m["origin_x"]), float(m["origin_y"])))
        kind, tag = m["kind"], m["stagger"]
        payload = path.with_name(m["payload"])
        expected_crc = int(m["crc32"], 16)
    except KeyError as exc:
        raise FieldFileError(f"manifest is missing {exc.args[0]!r}") from exc
    if kind == "vector":
        if tag not in VECTOR_TAGS:
            raise FieldFileError(f"unknown stagger tag {tag!r}")
        locs = VECTOR_TAGS[tag]
    elif kind == "scalar":
        if tag not in LOCATIONS:
            raise FieldFileError(f"unknown stagger tag {tag!r}")
        locs = (tag,)
    else:
        raise FieldFileError(f"unknown field kind {kind!r}")
    data = payload.read_bytes()
    sizes = [grid.size(loc) for loc in locs]
    if len(data) != 8 * sum(sizes):
        raise DimensionError(f"payload has {len(data)} bytes, manifest implies {8 * sum(sizes)}")
    if zlib.crc32(data) != expected_crc:
        raise ChecksumError(f"checksum mismatch in {payload}")
    flat = np.frombuffer(data, dtype="<f8").astype(np.float64)
    arrays, start = [], 0
    for loc, n in zip(locs, sizes):
        arrays.append(ScalarField(grid, loc, flat[start:start + n].reshape(grid.shape(loc))))
        start += n
    return arrays[0] if kind == "scalar" else VectorField2(*arrays)


def field_checksum(path) -> str:
    return read_manifest(path)["crc32"]
