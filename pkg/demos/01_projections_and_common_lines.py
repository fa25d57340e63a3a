"""Projections, central slices and common lines on a synthetic map.

Run with ``python3 demos/01_projections_and_common_lines.py``.  Prints a few
numbers; nothing is written to disk.
"""

# %% A random Gaussian-blob phantom stands in for a density map.
import numpy as np

from clalign.commonlines import commonline_indices, normalize_rays
from clalign.fourier import polar_ft
from clalign.phantom import random_phantom
from clalign.projector import project, random_rotations

n = 48
v = random_phantom(n, seed=3).render(n)
print(f"phantom: {n}^3 voxels, values in [{v.min():.3f}, {v.max():.3f}]")

# %% Projecting along z with the identity is just a sum over the last axis.
# `project` goes through the 2D spectrum, so this is a check on the whole
# Fourier pipeline rather than a tautology.
err = np.abs(project(v, np.eye(3)) - v.sum(axis=2)).max()
print(f"identity projection vs z-sum: max abs difference {err:.2e}")

# %% Two views of the same map share one line through the origin of their
# spectra.  Its direction in each image follows from the two rotations alone.
Ri, Rj = random_rotations(2, seed=7)
rays_i, rays_j = polar_ft(project(v, np.stack([Ri, Rj])), n_theta=360).rays
a, b, _ = commonline_indices(Ri, Rj, 360)
a, b = int(a[0, 0]), int(b[0, 0])
print(f"common line: ray {a} deg in view i, ray {b} deg in view j")

# %% Along the common line the two spectra agree; along unrelated lines they
# do not.  Correlations use L2-normalized rays.
fi, fj = normalize_rays(rays_i), normalize_rays(rays_j)
true = np.real(np.vdot(fi[a], fj[b]))
rng = np.random.default_rng(0)
ka, kb = rng.integers(0, 360, (2, 500))
rand = np.real(np.sum(np.conj(fi[ka]) * fj[kb], axis=1))
print(f"correlation on the common line {true:.4f}; random lines: "
      f"median {np.median(rand):.4f}, 95th percentile {np.percentile(rand, 95):.4f}")
