import math

import numpy as np
import pytest

from clalign.phantom import sphere
from clalign.projector import (
    DEFAULT_L, CandidateSet, candidate_set, load_candidates, project, random_rotations,
    save_candidates,
)
from clalign.volume import is_rotation
from oracles import line_integral_projection, smooth_volume


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_identity_projection_is_z_sum():
    v = np.random.default_rng(0).standard_normal((12, 12, 12))
    assert rel(project(v, np.eye(3)), v.sum(axis=2)) <= 1e-3


def test_centered_sphere_projects_the_same_everywhere():
    v = sphere(24, 6.0, smooth=1.5)
    ref = project(v, np.eye(3))
    for R in random_rotations(5, 1):
        assert rel(project(v, R), ref) <= 1e-3


def test_projection_matches_real_space_line_integrals():
    v = smooth_volume(16, 2)
    for R in random_rotations(3, 3):
        assert rel(project(v, R), line_integral_projection(v, R)) <= 0.02


def test_projection_of_sampled_gaussians_matches_closed_form():
    # a 3D Gaussian of width s projects to a 2D Gaussian of width s and mass factor sqrt(2 pi) s
    n = 16
    r = np.arange(n) - n // 2
    X = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1)
    rng = np.random.default_rng(5)
    mus, sig, amp = rng.uniform(-3, 3, (6, 3)), rng.uniform(1.3, 2.2, 6), rng.uniform(0.5, 1, 6)
    v = sum(a * np.exp(-np.sum((X - m) ** 2, -1) / (2 * s * s)) for a, m, s in zip(amp, mus, sig))
    x2 = X[:, :, 0, :2]
    for R in random_rotations(4, 6):
        P = sum(a * np.sqrt(2 * np.pi) * s * np.exp(-np.sum((x2 - (R.T @ m)[:2]) ** 2, -1)
                                                    / (2 * s * s))
                for a, m, s in zip(amp, mus, sig))
        assert rel(project(v, R), P) <= 0.01


def test_project_is_linear():
    rng = np.random.default_rng(4)
    a, b = rng.standard_normal((2, 10, 10, 10))
    R = random_rotations(1, 5)[0]
    lhs = project(2.5 * a - 1.5 * b, R)
    rhs = 2.5 * project(a, R) - 1.5 * project(b, R)
    assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(rhs).max()


def test_project_stack_matches_single_calls():
    v = smooth_volume(12, 6)
    Rs = random_rotations(3, 7)
    stack = project(v, Rs)
    for k in range(3):
        np.testing.assert_allclose(stack[k], project(v, Rs[k]), atol=1e-12)


def test_random_rotations_are_valid_and_deterministic():
    a = random_rotations(50, 123)
    assert all(is_rotation(R) for R in a)
    np.testing.assert_array_equal(a, random_rotations(50, 123))
    assert not np.array_equal(a, random_rotations(50, 124))


def test_random_rotations_haar_statistic():
    R = random_rotations(10_000, 9)
    # a uniformly distributed unit vector has E|z| = 1/2
    assert abs(np.mean(np.abs(R[:, 2, 2])) - 0.5) <= 0.02


def _count_oracle(L):
    """Closed-form node count of the hyperspherical grid.

    tau_i = (i + 1/2) 2pi/L for i < ceil(L/4 - 3/4); per tau,
    theta_j = (j + 1/2) 2pi/(L sin tau) for j < ceil(L sin(tau)/2 - 1); per
    (tau, theta), ceil(L sin(tau) sin(theta) - 1) phi values.
    """
    total = 0
    for i in range(max(0, math.ceil(L / 4 - 0.75))):
        s_tau = math.sin((i + 0.5) * 2 * math.pi / L)
        for j in range(max(0, math.ceil(L * s_tau / 2 - 1))):
            theta = (j + 0.5) * 2 * math.pi / (L * s_tau)
            total += max(0, math.ceil(L * s_tau * math.sin(theta) - 1))
    return total


@pytest.mark.parametrize("L", [8, 12, 20, 33])
def test_candidate_count_matches_closed_form(L):
    S = candidate_set(L)
    assert len(S) == _count_oracle(L)
    assert all(is_rotation(R) for R in S.rotations)


def test_candidates_are_distinct():
    S = candidate_set(20)
    R = S.rotations.reshape(len(S), 9)
    d = np.linalg.norm(R[:, None] - R[None], axis=-1)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1e-9


def test_default_grid_has_15236_rotations(cands):
    assert DEFAULT_L == 75
    assert len(cands) == 15236
    hits = [L for L in range(40, 120) if len(candidate_set(L)) == 15236]
    assert hits == [75]


def test_candidate_cache_roundtrip(tmp_path):
    S = candidate_set(16)
    path = tmp_path / "s.bin"
    save_candidates(S, path)
    raw = path.read_bytes()
    assert len(raw) == 16 + 9 * 8 * len(S)
    T = load_candidates(path)
    assert T.L == 16
    np.testing.assert_array_equal(T.rotations, S.rotations)
    (tmp_path / "bad.bin").write_bytes(b"nope" * 8)
    with pytest.raises(ValueError):
        load_candidates(tmp_path / "bad.bin")
