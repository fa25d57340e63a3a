"""Point-symmetry groups and rotation error metrics for benchmarking."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

MIN_ROTATION_DEG = 0.1


def axis_angle(axis, angle) -> np.ndarray:
    """Rotation by ``angle`` radians about ``axis`` (Rodrigues)."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


@dataclass(frozen=True)
class SymmetryGroup:
    kind: str
    order: int
    elements: np.ndarray

    @property
    def label(self) -> str:
        return f"{self.kind}{self.order}" if self.kind in "CD" else self.kind

    def __len__(self):
        return len(self.elements)


def close_group(generators, tol: float = 1e-9, max_size: int = 1000) -> np.ndarray:
    """Expand generators to the full finite group by repeated multiplication."""
    elements = [np.eye(3)]
    frontier = [np.eye(3)]
    gens = [np.asarray(g, dtype=np.float64) for g in generators]

    def known(M):
        return any(np.abs(M - E).max() < tol for E in elements)

    while frontier:
        new = []
        for A in frontier:
            for g in gens:
                M = g @ A
                if not known(M):
                    elements.append(M)
                    new.append(M)
                    if len(elements) > max_size:
                        raise ValueError("generators do not span a finite group")
        frontier = new
    return np.array(elements)


_GOLDEN = (1 + np.sqrt(5)) / 2


def _generators(kind: str, n: int):
    z2 = axis_angle([0, 0, 1], np.pi)
    c3 = axis_angle([1, 1, 1], 2 * np.pi / 3)
    if kind == "C":
        return [axis_angle([0, 0, 1], 2 * np.pi / n)]
    if kind == "D":
        return [axis_angle([0, 0, 1], 2 * np.pi / n), axis_angle([1, 0, 0], np.pi)]
    if kind == "T":
        return [z2, c3]
    if kind == "O":
        return [axis_angle([0, 0, 1], np.pi / 2), c3]
    if kind == "I":
        return [z2, c3, axis_angle([0, 1, _GOLDEN], 2 * np.pi / 5)]
    raise ValueError(f"unknown symmetry kind {kind!r}")


def group_elements(kind: str, n: int = 1) -> SymmetryGroup:
    """Elements of C_n, D_n, T, O or I in the standard orientation.

    C_n and D_n have their main axis along z (D_n adds a 2-fold about x); T,
    O and I keep 2-fold axes on the coordinate axes.  O is included for
    completeness of the point groups.
    """
    kind = kind.upper()
    if kind in ("C", "D"):
        if n < 1:
            raise ValueError("order must be >= 1")
        if kind == "C" and n == 1:
            return SymmetryGroup("C", 1, np.eye(3)[None])
    else:
        n = 1
    els = close_group(_generators(kind, n))
    return SymmetryGroup(kind, n, els)


def parse_symmetry(label: str) -> SymmetryGroup:
    """``"C1"``, ``"C4"``, ``"D7"``, ``"T"``, ``"O"`` or ``"I"``."""
    m = re.fullmatch(r"\s*([CcDd])(\d+)\s*|\s*([TtOoIi])\s*", label)
    if not m:
        raise ValueError(f"cannot parse symmetry label {label!r}")
    if m.group(1):
        return group_elements(m.group(1), int(m.group(2)))
    return group_elements(m.group(3))


def resolve_symmetry_element(O_est, O, G: SymmetryGroup) -> np.ndarray:
    """``argmin_g ||O_est - g O||_F`` over the group, first index on ties."""
    d = np.linalg.norm(np.asarray(O_est) - G.elements @ np.asarray(O), axis=(1, 2))
    return G.elements[int(np.argmin(d))]


def rotation_axis(O) -> np.ndarray:
    """Unit eigenvector of ``O`` for eigenvalue 1."""
    w, V = np.linalg.eig(np.asarray(O, dtype=np.float64))
    v = np.real(V[:, np.argmin(np.abs(w - 1))])
    return v / np.linalg.norm(v)


def rotation_angle(O, axis=None) -> float:
    """Angle (radians) turned by ``O`` about its axis, from ``arccos(u . O u)`` with ``u`` perpendicular."""
    O = np.asarray(O, dtype=np.float64)
    v = rotation_axis(O) if axis is None else axis
    e = np.eye(3)[np.argmin(np.abs(v))]
    u = np.cross(v, e)
    u /= np.linalg.norm(u)
    return float(np.arccos(np.clip(u @ O @ u, -1.0, 1.0)))


def geodesic_distance(A, B) -> float:
    """Angle (degrees) of ``A^T B``."""
    c = (np.trace(np.asarray(A).T @ np.asarray(B)) - 1) / 2
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def rotation_errors(O_est, O):
    """Axis error ``e1`` and angle error ``e2`` in degrees.

    The axes are sign-aligned before comparison, so ``e1`` lies in [0, 90].
    Raises ``ValueError`` if either rotation is within 0.1 degrees of the
    identity, where the axis is undefined.
    """
    for M in (O_est, O):
        if geodesic_distance(np.eye(3), M) < MIN_ROTATION_DEG:
            raise ValueError("rotation axis undefined for a (near-)identity rotation")
    v = rotation_axis(O)
    v2 = rotation_axis(O_est)
    if v @ v2 < 0:
        v2 = -v2
    e1 = np.degrees(np.arccos(np.clip(v @ v2, -1.0, 1.0)))
    e2 = np.degrees(abs(rotation_angle(O, v) - rotation_angle(O_est, v2)))
    return float(e1), float(e2)
