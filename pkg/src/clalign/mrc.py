"""Minimal MRC2014 reader/writer for cubic float32 maps.

Only the subset the aligner needs: little-endian, mode 2, nx = ny = nz.
Header words are numbered from 1 as in the format description.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

HEADER_BYTES = 1024


class MRCFormatError(ValueError):
    pass


def _header_words(raw: bytes) -> np.ndarray:
    return np.frombuffer(raw[:HEADER_BYTES], dtype="<i4")


def read_mrc(path):
    """Return ``(volume, voxel_size)``; the volume is indexed ``[x, y, z]``."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_BYTES:
        raise MRCFormatError(f"{path}: file shorter than the 1024-byte header")
    words = _header_words(raw)
    nx, ny, nz, mode = (int(w) for w in words[:4])
    for k, val in enumerate((nx, ny, nz), start=1):
        if val <= 0 or val > 4096:
            raise MRCFormatError(f"{path}: header word {k} (n{'xyz'[k - 1]}) has invalid value {val}")
    if not nx == ny == nz:
        raise MRCFormatError(f"{path}: header words 1-3 give non-cubic size {nx}x{ny}x{nz}")
    if mode != 2:
        raise MRCFormatError(f"{path}: header word 4 (mode) is {mode}; only mode 2 (float32) is supported")
    nsymbt = int(words[23])
    if nsymbt < 0:
        raise MRCFormatError(f"{path}: header word 24 (nsymbt) is negative")
    offset = HEADER_BYTES + nsymbt
    count = nx * ny * nz
    if len(raw) < offset + 4 * count:
        raise MRCFormatError(f"{path}: data block shorter than nx*ny*nz = {count} floats")
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    vol = data.reshape(nz, ny, nx).transpose(2, 1, 0).astype(np.float64)
    xlen = float(np.frombuffer(raw[40:44], dtype="<f4")[0])
    mx = int(words[7])
    voxel_size = xlen / mx if mx > 0 and xlen > 0 else None
    return vol, voxel_size


def write_mrc(path, volume, voxel_size: float | None = None) -> None:
    vol = np.asarray(volume)
    if vol.ndim != 3 or len(set(vol.shape)) != 1:
        raise ValueError("only cubic volumes can be written")
    n = vol.shape[0]
    data = np.ascontiguousarray(vol.transpose(2, 1, 0), dtype="<f4")
    ints = np.zeros(256, dtype="<i4")
    floats = ints.view("<f4")
    ints[0:3] = n                 # nx, ny, nz
    ints[3] = 2                   # mode
    ints[7:10] = n                # mx, my, mz
    floats[10:13] = n * (voxel_size or 1.0)
    floats[13:16] = 90.0
    ints[16:19] = (1, 2, 3)       # mapc, mapr, maps
    floats[19] = data.min()
    floats[20] = data.max()
    floats[21] = data.mean()
    ints[27] = 20140              # nversion
    header = bytearray(ints.tobytes())
    header[208:212] = b"MAP "
    header[212:216] = bytes([0x44, 0x44, 0, 0])
    floats_rms = np.float32(data.std())
    header[216:220] = floats_rms.tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(data.tobytes())
