"""Seeded generators: determinism and structural validity."""

import numpy as np
import pytest

from ensembleq.densmat import DensityMatrix
from ensembleq.rand import (
    random_commuting_states,
    random_density_matrix,
    random_hermitian,
    random_kraus,
    random_probabilities,
    random_pure_state,
    random_unitary,
    rng_from,
)
from ensembleq.recovery import Channel


def test_same_seed_same_draws():
    assert np.array_equal(random_hermitian(4, seed=9), random_hermitian(4, seed=9))
    assert np.array_equal(
        random_density_matrix(3, seed=9), random_density_matrix(3, seed=9)
    )
    a = random_kraus(2, 2, 3, seed=9)
    b = random_kraus(2, 2, 3, seed=9)
    for ka, kb in zip(a, b):
        assert np.array_equal(ka, kb)


def test_different_seeds_differ():
    assert not np.array_equal(random_hermitian(4, seed=1), random_hermitian(4, seed=2))


def test_rng_passthrough_advances_stream():
    rng = rng_from(7)
    first = random_hermitian(2, rng)
    second = random_hermitian(2, rng)
    assert not np.array_equal(first, second)
    assert rng_from(rng) is rng


def test_random_hermitian_is_hermitian():
    m = random_hermitian(5, seed=3)
    assert np.allclose(m, m.conj().T)


def test_random_unitary_is_unitary():
    for d in (2, 3, 4):
        u = random_unitary(d, seed=11)
        assert np.allclose(u @ u.conj().T, np.eye(d), atol=1e-10)


def test_random_density_matrix_is_valid_state():
    for trial in range(5):
        rho = random_density_matrix(4, seed=20 + trial)
        DensityMatrix(rho)  # raises if not Hermitian/PSD/trace-one


def test_random_density_matrix_rank_control():
    rho = random_density_matrix(4, seed=6, rank=2)
    evals = np.linalg.eigvalsh(rho)
    assert np.sum(evals > 1e-10) == 2


def test_random_pure_state_is_normalized():
    vec = random_pure_state(3, seed=13)
    assert vec.shape == (3,)
    assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)
    rho = np.outer(vec, vec.conj())
    assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-10)


def test_random_probabilities_normalized():
    p = random_probabilities(5, seed=17)
    assert p.shape == (5,)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_random_commuting_states_commute():
    states = random_commuting_states(3, 3, seed=23)
    assert len(states) == 3
    for s in states:
        DensityMatrix(s)
    for i in range(3):
        for j in range(i + 1, 3):
            comm = states[i] @ states[j] - states[j] @ states[i]
            assert np.linalg.norm(comm) <= 1e-10


def test_random_kraus_trace_preserving():
    for din, dout, nk in ((2, 2, 1), (2, 3, 2), (3, 2, 4)):
        ops = random_kraus(din, dout, nk, seed=29)
        total = sum(k.conj().T @ k for k in ops)
        assert np.allclose(total, np.eye(din), atol=1e-10)
        Channel(ops)  # full CPTP validation


def test_random_kraus_rejects_impossible_shape():
    # fewer total output dimensions than inputs cannot preserve trace
    with pytest.raises(ValueError):
        random_kraus(3, 2, 1, seed=2)
