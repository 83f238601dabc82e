"""Binary field snapshots.

Layout (all little-endian)::

    b"MHDSNAP1"             8-byte magic
    int32 n, int32 N        dimension, points per axis
    float64 L, t, delta     period, time, magnetic diffusivity
    complex128[2n, N, ..]   u components then B components

Coefficient arrays are the Fourier-series coefficients of
:mod:`mhdlab.spectral`, written row-major with every axis in ascending
lattice order ``m = -N/2, ..., N/2 - 1``.
"""

import struct

import numpy as np

from .errors import SnapshotFormatError
from .spectral import Grid

MAGIC = b"MHDSNAP1"
_HEADER = struct.Struct("<iiddd")
_DTYPE = np.dtype("<c16")


def encode_snapshot(state):
    g = state.grid
    head = MAGIC + _HEADER.pack(g.n, g.N, g.L, state.t, state.delta)
    fields = np.concatenate([state.u, state.B], axis=0)
    body = np.fft.fftshift(fields, axes=g.axes).astype(_DTYPE)
    return head + np.ascontiguousarray(body).tobytes()


def decode_snapshot(data):
    """Parse bytes produced by :func:`encode_snapshot` into an ``MHDState``."""
    from .solver import MHDState

    if len(data) < len(MAGIC) + _HEADER.size or data[: len(MAGIC)] != MAGIC:
        raise SnapshotFormatError("missing MHDSNAP1 header")
    n, N, L, t, delta = _HEADER.unpack_from(data, len(MAGIC))
    try:
        grid = Grid(n, N, L)
    except ValueError as exc:
        raise SnapshotFormatError(f"bad header: {exc}") from None
    offset = len(MAGIC) + _HEADER.size
    count = 2 * n * N**n
    if len(data) - offset != count * _DTYPE.itemsize:
        raise SnapshotFormatError(
            f"expected {count * _DTYPE.itemsize} payload bytes, got {len(data) - offset}"
        )
    body = np.frombuffer(data, dtype=_DTYPE, count=count, offset=offset)
    body = body.reshape((2 * n,) + grid.shape).astype(np.complex128)
    body = np.fft.ifftshift(body, axes=grid.axes)
    return MHDState(t=t, u=body[:n].copy(), B=body[n:].copy(), delta=delta, grid=grid)


def write_snapshot(path, state):
    with open(path, "wb") as fh:
        fh.write(encode_snapshot(state))


def read_snapshot(path):
    with open(path, "rb") as fh:
        return decode_snapshot(fh.read())
