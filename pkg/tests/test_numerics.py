import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from unitary_synth.numerics import (
    closest_unitary,
    dagger,
    derive_seed,
    format_umat,
    frobenius_distance,
    haar_random_unitary,
    is_unitary,
    kron_all,
    make_rng,
    matmul,
    n_qubits_of,
    parse_umat,
    read_umat,
    spectral_error,
    unitarity_defect,
    write_umat,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]), dtype=complex)
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def test_matmul_identity_and_involution(rng):
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.array_equal(matmul(np.eye(4), m), m)
    assert np.allclose(matmul(X, X), np.eye(2))


def test_matmul_matches_triple_loop(rng):
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    b = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    assert np.abs(matmul(a, b) - naive_matmul(a, b)).max() <= 1e-13


def test_matmul_shape_mismatch():
    with pytest.raises(ValueError):
        matmul(np.eye(2), np.eye(4))


def test_dagger(rng):
    assert np.array_equal(dagger(np.eye(3)), np.eye(3))
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.array_equal(dagger(dagger(m)), m)
    u = haar_random_unitary(3, rng)
    assert np.abs(dagger(u) @ u - np.eye(8)).max() <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_haar_is_unitary(n, rng):
    u = haar_random_unitary(n, rng)
    assert u.shape == (2**n, 2**n)
    assert unitarity_defect(u) <= 1e-12


def test_haar_seeded_repeatable():
    a = haar_random_unitary(2, make_rng(42))
    b = haar_random_unitary(2, make_rng(42))
    assert np.array_equal(a, b)


def test_haar_first_moment():
    # E|U_00|^2 = 1/2 for a Haar 2x2 unitary
    rng = make_rng(7)
    vals = [abs(haar_random_unitary(1, rng)[0, 0]) ** 2 for _ in range(10_000)]
    assert abs(np.mean(vals) - 0.5) <= 0.02


def test_haar_range_errors(rng):
    for n in (0, 7):
        with pytest.raises(ValueError):
            haar_random_unitary(n, rng)


def test_derive_seed_distinct():
    seeds = {derive_seed(5, k) for k in range(100)}
    assert len(seeds) == 100
    assert derive_seed(5, 3) == derive_seed(5, 3)


def test_frobenius_distance(rng):
    u = haar_random_unitary(2, rng)
    assert frobenius_distance(u, u) <= 1e-15
    assert frobenius_distance(u, np.exp(0.3j) * u) <= 1e-15
    assert frobenius_distance(np.eye(2), X) == pytest.approx(1.0)


def brute_spectral(u, v, grid=20000):
    phases = np.exp(2j * np.pi * np.arange(grid) / grid)
    return min(scipy.linalg.svdvals(u - p * v)[0] for p in phases)


def test_spectral_error_phase_invariance(rng):
    u = haar_random_unitary(3, rng)
    assert spectral_error(u, u) <= 1e-13
    assert spectral_error(u, np.exp(0.7j) * u) <= 1e-12


def test_spectral_error_zero_trace_case():
    # Tr(Z) = 0: the distance is minimized over the phase, min |I - e^{ia} Z|_2 = sqrt(2)
    assert spectral_error(np.eye(2), Z) == pytest.approx(np.sqrt(2), abs=1e-12)
    assert spectral_error(np.eye(2), Z) == pytest.approx(brute_spectral(np.eye(2), Z), abs=1e-6)


def test_spectral_error_matches_trace_phase_oracle(rng):
    for _ in range(20):
        u = haar_random_unitary(2, rng)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        v = scipy.linalg.expm(1e-2j * (h + h.conj().T)) @ u * np.exp(1.1j)
        t = np.trace(u.conj().T @ v)
        oracle = scipy.linalg.svdvals(u - np.exp(-1j * np.angle(t)) * v)[0]
        assert spectral_error(u, v) == pytest.approx(oracle, abs=1e-13)
        # the trace phase can only be worse than the best phase
        assert spectral_error(u, v) >= brute_spectral(u, v) - 1e-6


def test_spectral_error_shape_checks():
    with pytest.raises(ValueError):
        spectral_error(np.eye(2), np.eye(4))
    with pytest.raises(ValueError):
        spectral_error(np.ones((2, 3)), np.ones((2, 3)))


def test_closest_unitary_matches_polar(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    ref, _ = scipy.linalg.polar(a)
    assert np.abs(closest_unitary(a) - ref).max() <= 1e-12
    assert is_unitary(closest_unitary(a))


def test_umat_roundtrip(tmp_path, rng):
    u = haar_random_unitary(3, rng)
    path = tmp_path / "u.umat"
    write_umat(path, u)
    assert np.array_equal(read_umat(path), u)
    assert format_umat(parse_umat(format_umat(u))) == format_umat(u)


@pytest.mark.parametrize(
    "text",
    ["", "2", "2 2\n1,0 0,0 0,0", "2 2\n1,0 0,0 0,0 x,1", "0 0\n", "2 2\n1 0 0 1"],
)
def test_umat_malformed(text):
    with pytest.raises(ValueError):
        parse_umat(text)


def test_n_qubits_of():
    assert n_qubits_of(np.eye(8)) == 3
    with pytest.raises(ValueError):
        n_qubits_of(np.eye(6))


def test_kron_all_order():
    out = kron_all([X, np.eye(2)])
    assert np.array_equal(out, np.kron(X, np.eye(2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=1, max_value=4))
def test_haar_unitary_property(seed, n):
    assert unitarity_defect(haar_random_unitary(n, make_rng(seed))) <= 1e-12
