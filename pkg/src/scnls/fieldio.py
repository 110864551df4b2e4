"""Binary snapshot format for wave fields.

Layout (all little-endian float64)::

    dim | N_1 .. N_dim | L_1 .. L_dim | eps | t | re_0 im_0 re_1 im_1 ...

Data follows the row-major grid order, so identical fields give identical bytes.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

from .spectral import Grid, WaveField

_F64 = np.dtype("<f8")


def field_to_bytes(u: WaveField) -> bytes:
    g = u.grid
    header = np.array([g.dim, *g.shape, *g.L, u.eps, u.t], dtype=_F64)
    body = np.empty(2 * g.size, dtype=_F64)
    flat = np.ascontiguousarray(u.data).reshape(-1)
    body[0::2] = flat.real
    body[1::2] = flat.imag
    return header.tobytes() + body.tobytes()


def field_from_bytes(buf: bytes) -> WaveField:
    arr = np.frombuffer(buf, dtype=_F64)
    dim = int(arr[0])
    if dim not in (1, 2):
        raise ValueError(f"corrupt header: dim={arr[0]}")
    n = tuple(int(v) for v in arr[1:1 + dim])
    L = tuple(float(v) for v in arr[1 + dim:1 + 2 * dim])
    eps, t = float(arr[1 + 2 * dim]), float(arr[2 + 2 * dim])
    body = arr[3 + 2 * dim:]
    size = int(np.prod(n))
    if body.size != 2 * size:
        raise ValueError(f"expected {2 * size} data values, found {body.size}")
    data = (body[0::2] + 1j * body[1::2]).reshape(n)
    return WaveField(Grid(dim, n, L), eps, data, t=t)


def write_field(path, u: WaveField, sidecar: dict = None):
    """Write ``u`` to ``path`` and optionally a JSON sidecar next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(field_to_bytes(u))
    if sidecar is not None:
        with io.open(path.with_suffix(".json"), "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return path


def read_field(path) -> WaveField:
    return field_from_bytes(Path(path).read_bytes())
