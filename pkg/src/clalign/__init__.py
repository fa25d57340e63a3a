"""Rigid alignment of 3D density maps through common lines of their projections.

The second map is projected at random orientations; each projection is
oriented against the first map by a common-line search over a fixed rotation
grid, the per-projection estimates are combined by synchronization over SO(3),
the translation comes from phase correlation and the result is polished by
BFGS on the real-space correlation.
"""

from .projector import CandidateSet, candidate_set, project, random_rotations
from .register import AlignmentResult, AlignParams, align_volumes, phase_correlation_shift, refine_bfgs
from .symmetry import SymmetryGroup, group_elements, parse_symmetry, rotation_errors
from .sync import SyncProblem, SyncResult, synchronize
from .volume import RigidTransform, apply_transform, correlation, downsample, reflect

__version__ = "0.1.0"

__all__ = [
    "AlignParams", "AlignmentResult", "CandidateSet", "RigidTransform", "SymmetryGroup",
    "SyncProblem", "SyncResult", "align_volumes", "apply_transform", "candidate_set",
    "correlation", "downsample", "group_elements", "parse_symmetry", "phase_correlation_shift",
    "project", "random_rotations", "refine_bfgs", "reflect", "rotation_errors", "synchronize",
]
