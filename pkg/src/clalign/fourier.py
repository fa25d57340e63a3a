"""Centered FFTs, central-slice sampling of 3D spectra and polar image spectra.

Conventions: spatial coordinates are integers relative to the grid center
``n // 2``; frequencies are in radians per voxel, so the discrete-time
transform of a volume is ``F(w) = sum_r v(r) exp(-i w.r)`` and the lattice
frequencies are ``2 pi k / n`` with ``k`` centered the same way.

Off-lattice samples are computed with type-2 non-uniform FFTs (finufft).
"""

from __future__ import annotations

from dataclasses import dataclass

import finufft
import numpy as np
from scipy import fft

NUFFT_EPS = 1e-9


def fft3_centered(v) -> np.ndarray:
    """Unitary 3D DFT with the zero frequency at the center voxel."""
    return fft.fftshift(fft.fftn(fft.ifftshift(v), norm="ortho"))


def ifft3_centered(s) -> np.ndarray:
    return fft.fftshift(fft.ifftn(fft.ifftshift(s), norm="ortho"))


def lattice_frequencies(n: int) -> np.ndarray:
    return 2 * np.pi * (np.arange(n) - n // 2) / n


def dtft3(v, points) -> np.ndarray:
    """Evaluate ``sum_r v(r) exp(-i w.r)`` at the frequency points ``(..., 3)``."""
    v = np.asarray(v)
    pts = np.asarray(points, dtype=np.float64)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, 3)
    f = np.ascontiguousarray(v, dtype=np.complex128)
    out = finufft.nufft3d2(
        pts[:, 0].copy(), pts[:, 1].copy(), pts[:, 2].copy(), f,
        eps=NUFFT_EPS, isign=-1, modeord=0, nthreads=1,
    )
    return out.reshape(shape)


def dtft2(images, points) -> np.ndarray:
    """Evaluate ``sum_r P(r) exp(-i w.r)`` for one image ``(n, n)`` or a stack ``(m, n, n)``."""
    images = np.asarray(images)
    pts = np.asarray(points, dtype=np.float64)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, 2)
    f = np.ascontiguousarray(images, dtype=np.complex128)
    out = finufft.nufft2d2(
        pts[:, 0].copy(), pts[:, 1].copy(), f,
        eps=NUFFT_EPS, isign=-1, modeord=0, nthreads=1,
    )
    return out.reshape(images.shape[:-2] + shape)


def central_slice_points(R, n: int) -> np.ndarray:
    """Frequencies ``wx R[:, 0] + wy R[:, 1]`` on the centered n x n grid, shape (n, n, 3).

    ``n`` sets the frequency spacing ``2 pi / n``; asking for a larger grid than
    the volume samples the same band more finely.
    """
    R = np.asarray(R, dtype=np.float64)
    w = lattice_frequencies(n)
    return w[:, None, None] * R[:, 0] + w[None, :, None] * R[:, 1]


def volume_slices(v, rotations, size: int | None = None) -> np.ndarray:
    """Central slices of the (non-normalized) spectrum of ``v``, one per rotation.

    Returns a complex array of shape ``(len(rotations), size, size)``; ``size``
    defaults to the volume side.
    """
    v = np.asarray(v)
    n = v.shape[0] if size is None else size
    rotations = np.asarray(rotations, dtype=np.float64).reshape(-1, 3, 3)
    pts = np.stack([central_slice_points(R, n) for R in rotations])
    return dtft3(v, pts)


def sample_central_slice(s, R, n: int | None = None) -> np.ndarray:
    """Sample the centered unitary spectrum ``s`` on the plane spanned by R's first two columns."""
    s = np.asarray(s)
    if n is None:
        n = s.shape[0]
    if s.shape != (n, n, n):
        raise ValueError(f"spectrum shape {s.shape} does not match n={n}")
    v = ifft3_centered(s)
    return volume_slices(v, [R])[0] / n ** 1.5


def ifft2_centered(S) -> np.ndarray:
    """Inverse of the non-normalized centered 2D DFT over the last two axes."""
    axes = (-2, -1)
    return fft.fftshift(fft.ifftn(fft.ifftshift(S, axes=axes), axes=axes), axes=axes)


@dataclass(frozen=True)
class PolarSpectrum:
    """Image spectrum sampled on ``n_theta`` rays of ``n_r`` radii each.

    Ray ``k`` points at angle ``2 pi k / n_theta``; radial sample ``j`` sits at
    ``pi (j + 1) / n_r`` radians per pixel, so DC is never stored.
    """

    rays: np.ndarray

    @property
    def n_theta(self) -> int:
        return self.rays.shape[-2]

    @property
    def n_r(self) -> int:
        return self.rays.shape[-1]


def polar_radii(n_r: int) -> np.ndarray:
    return np.pi * np.arange(1, n_r + 1) / n_r


def polar_angles(n_theta: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n_theta) / n_theta


def polar_points(n_theta: int, n_r: int) -> np.ndarray:
    a = polar_angles(n_theta)
    xi = polar_radii(n_r)
    return np.stack(
        [np.cos(a)[:, None] * xi[None, :], np.sin(a)[:, None] * xi[None, :]], axis=-1
    )


def polar_ft(img, n_theta: int = 360, n_r: int | None = None) -> PolarSpectrum:
    """Polar Fourier transform of an image ``(n, n)`` or a stack ``(m, n, n)``."""
    img = np.asarray(img)
    if n_theta % 2:
        raise ValueError("n_theta must be even")
    if n_r is None:
        n_r = -(-img.shape[-1] // 2)
    return PolarSpectrum(dtft2(img, polar_points(n_theta, n_r)))
