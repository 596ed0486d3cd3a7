"""Core linear-algebra layer: MZI blocks, mesh programs, decomposition."""

import json
import math

import numpy as np
import pytest

from photonn.errors import SchemaError
from photonn.mesh import (
    MeshProgram,
    MziPhases,
    clements_decompose,
    clements_layout,
    fidelity,
    haar_random_unitary,
    mesh_reconstruct,
    mzi_unitary,
    normalized_fidelity,
    program_from_phases,
)

# Mean of |Tr U| for Haar-random U: the trace is complex-normal to very high
# accuracy for n >= 2, giving E|Tr| = sqrt(pi)/2 and Var|Tr| = 1 - pi/4.
HAAR_TRACE_ABS_MEAN = math.sqrt(math.pi) / 2.0
HAAR_TRACE_ABS_STD = math.sqrt(1.0 - math.pi / 4.0)


def test_cross_state_block():
    u = mzi_unitary(MziPhases(0.0, 0.0))
    np.testing.assert_allclose(u, 1j * np.array([[0, 1], [1, 0]]), atol=1e-15)
    assert abs(u[0, 1]) ** 2 == pytest.approx(1.0)


def test_bar_state_block():
    u = mzi_unitary(MziPhases(math.pi, 0.0))
    # bar-port transmission sin^2(pi/2) = 1
    assert abs(u[0, 0]) ** 2 == pytest.approx(1.0)
    assert abs(u[1, 1]) ** 2 == pytest.approx(1.0)
    assert abs(u[0, 1]) == pytest.approx(0.0, abs=1e-15)


def test_block_unitarity_random_phases():
    rng = np.random.default_rng(7)
    for _ in range(200):
        u = mzi_unitary(MziPhases(rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi)))
        np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-12)


def test_internal_phase_sets_split_ratio():
    for t1 in np.linspace(0, 2 * math.pi, 17):
        u = mzi_unitary(MziPhases(t1, 0.3))
        # light entering the top port: cross power cos^2, bar power sin^2
        assert abs(u[1, 0]) ** 2 == pytest.approx(math.cos(t1 / 2) ** 2, abs=1e-12)
        assert abs(u[0, 0]) ** 2 == pytest.approx(math.sin(t1 / 2) ** 2, abs=1e-12)


def test_phases_wrap_to_principal_interval():
    p = MziPhases(-0.5, 7.0)
    assert 0.0 <= p.theta1 < 2 * math.pi
    assert 0.0 <= p.theta2 < 2 * math.pi
    assert p.theta1 == pytest.approx(2 * math.pi - 0.5)
    with pytest.raises(ValueError):
        MziPhases(float("nan"), 0.0)


def test_layout_shapes():
    assert clements_layout(2) == ((0, 0),)
    assert clements_layout(3) == ((0, 0), (1, 1), (2, 0))
    layout6 = clements_layout(6)
    assert len(layout6) == 15
    per_column = [sum(1 for c, _ in layout6 if c == col) for col in range(6)]
    assert per_column == [3, 2, 3, 2, 3, 2]
    for n in range(1, 12):
        assert len(clements_layout(n)) == n * (n - 1) // 2


def test_haar_reproducible_and_unitary():
    a = haar_random_unitary(6, seed=42)
    b = haar_random_unitary(6, seed=42)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a.conj().T @ a, np.eye(6), atol=1e-12)
    with pytest.raises(ValueError):
        haar_random_unitary(0)


def test_haar_n1_is_unit_modulus_scalar():
    u = haar_random_unitary(1, seed=3)
    assert u.shape == (1, 1)
    assert abs(u[0, 0]) == pytest.approx(1.0, abs=1e-12)


def test_haar_trace_statistics():
    rng = np.random.default_rng(2024)
    n_samples = 10_000
    vals = np.empty(n_samples)
    for i in range(n_samples):
        vals[i] = abs(np.trace(haar_random_unitary(6, rng)))
    se = HAAR_TRACE_ABS_STD / math.sqrt(n_samples)
    assert abs(vals.mean() - HAAR_TRACE_ABS_MEAN) < 3 * se


def test_fidelity_identity_and_global_phase():
    u = haar_random_unitary(6, seed=1)
    assert fidelity(u, u) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(u, np.exp(0.7j) * u) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(np.exp(-1.2j) * u, u) == pytest.approx(1.0, abs=1e-12)


def test_fidelity_dimension_mismatch():
    with pytest.raises(ValueError):
        fidelity(np.eye(3), np.eye(4))


def test_fidelity_independent_haar_statistics():
    # Tr(U^dag V) for independent Haar pairs is again a Haar-trace statistic
    rng = np.random.default_rng(5)
    n_samples = 10_000
    vals = np.empty(n_samples)
    for i in range(n_samples):
        u = haar_random_unitary(6, rng)
        v = haar_random_unitary(6, rng)
        vals[i] = fidelity(u, v)
    se = (HAAR_TRACE_ABS_STD / 6.0) / math.sqrt(n_samples)
    assert abs(vals.mean() - HAAR_TRACE_ABS_MEAN / 6.0) < 3 * se


def test_normalized_fidelity_ignores_uniform_loss():
    u = haar_random_unitary(6, seed=9)
    assert normalized_fidelity(u, 0.37 * u) == pytest.approx(1.0, abs=1e-12)
    assert normalized_fidelity(u, u) == pytest.approx(fidelity(u, u), abs=1e-12)
    with pytest.raises(ValueError):
        normalized_fidelity(u, np.zeros((6, 6)))


def test_reconstruct_single_block_matches_unitary():
    phases = MziPhases(1.1, 2.2)
    screen = (0.4, 5.0)
    prog = program_from_phases(2, [phases.theta1], [phases.theta2], screen)
    got = mesh_reconstruct(prog)
    want = mzi_unitary(phases) @ np.diag(np.exp(1j * np.array(screen)))
    np.testing.assert_allclose(got, want, atol=1e-14)


def test_reconstruct_all_bar_mesh_is_diagonal():
    n = 6
    n_blocks = n * (n - 1) // 2
    prog = program_from_phases(
        n, [math.pi] * n_blocks, [0.0] * n_blocks, [0.0] * n
    )
    u = mesh_reconstruct(prog)
    offdiag = u - np.diag(np.diagonal(u))
    np.testing.assert_allclose(offdiag, 0, atol=1e-12)
    np.testing.assert_allclose(np.abs(np.diagonal(u)), 1.0, atol=1e-12)


def test_reconstruct_is_unitary_and_conserves_power():
    rng = np.random.default_rng(11)
    for n in (2, 3, 6, 9):
        n_blocks = n * (n - 1) // 2
        prog = program_from_phases(
            n,
            rng.uniform(0, 2 * math.pi, n_blocks),
            rng.uniform(0, 2 * math.pi, n_blocks),
            rng.uniform(0, 2 * math.pi, n),
        )
        u = mesh_reconstruct(prog)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(n), atol=1e-12)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        assert np.linalg.norm(u @ x) == pytest.approx(np.linalg.norm(x), abs=1e-12)


def test_malformed_layout_rejected():
    prog = program_from_phases(3, [0.1, 0.2, 0.3], [0.0, 0.0, 0.0], [0.0] * 3)
    bad = list(prog.mzis)
    bad[0], bad[1] = bad[1], bad[0]
    with pytest.raises(ValueError, match="layout"):
        MeshProgram(3, tuple(bad), prog.input_phases)
    with pytest.raises(ValueError, match="screen"):
        MeshProgram(3, prog.mzis, (0.0, 0.0))


def test_decompose_identity():
    prog = clements_decompose(np.eye(2))
    assert fidelity(np.eye(2), mesh_reconstruct(prog)) > 1 - 1e-10


def test_decompose_swap_uses_cross_state():
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    prog = clements_decompose(swap)
    assert prog.mzis[0].phases.theta1 == pytest.approx(0.0, abs=1e-12)
    assert fidelity(swap, mesh_reconstruct(prog)) > 1 - 1e-10


def test_decompose_symmetric_coupler():
    # the matrix that an output-side screen could not represent
    u = np.array([[1j, 1.0], [1.0, 1j]], dtype=complex) / math.sqrt(2)
    prog = clements_decompose(u)
    np.testing.assert_allclose(mesh_reconstruct(prog), u, atol=1e-12)


def test_decompose_round_trip_seed42():
    u = haar_random_unitary(6, seed=42)
    prog = clements_decompose(u)
    assert fidelity(u, mesh_reconstruct(prog)) > 1 - 1e-10


def test_decompose_round_trip_exact_not_just_global_phase():
    # the input screen absorbs everything: reconstruction is entrywise exact
    for seed in range(5):
        u = haar_random_unitary(6, seed=seed)
        np.testing.assert_allclose(
            mesh_reconstruct(clements_decompose(u)), u, atol=1e-10
        )


def test_decompose_round_trip_many_sizes():
    rng = np.random.default_rng(123)
    for n in range(2, 11):
        for _ in range(20):
            u = haar_random_unitary(n, rng)
            prog = clements_decompose(u)
            assert fidelity(u, mesh_reconstruct(prog)) > 1 - 1e-10


def test_decompose_theta1_range():
    # nulling angles always land in [0, pi]; external phases in [0, 2 pi)
    u = haar_random_unitary(8, seed=77)
    prog = clements_decompose(u)
    for p in prog.mzis:
        assert 0.0 <= p.phases.theta1 <= math.pi + 1e-12


def test_decompose_rejects_non_unitary():
    bad = np.eye(4, dtype=complex)
    bad[0, 0] = 1.5
    with pytest.raises(ValueError, match="not unitary"):
        clements_decompose(bad)
    with pytest.raises(ValueError):
        clements_decompose(np.ones((3, 4)))
    with pytest.raises(ValueError):
        clements_decompose(np.eye(1))


def test_decompose_permutation_matrices():
    # exercises the degenerate both-entries-zero branches
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = 6
        perm = np.eye(n)[rng.permutation(n)]
        prog = clements_decompose(perm)
        assert fidelity(perm, mesh_reconstruct(prog)) > 1 - 1e-10


def test_program_json_round_trip_bit_exact():
    u = haar_random_unitary(6, seed=8)
    prog = clements_decompose(u)
    text = prog.to_json()
    back = MeshProgram.from_json(text)
    assert back == prog
    assert back.to_json() == text
    doc = json.loads(text)
    assert doc["schema"] == "mesh-program/1"


def test_program_json_schema_guard():
    u = haar_random_unitary(2, seed=8)
    doc = json.loads(clements_decompose(u).to_json())
    doc["schema"] = "something-else/9"
    with pytest.raises(SchemaError):
        MeshProgram.from_json(json.dumps(doc))
