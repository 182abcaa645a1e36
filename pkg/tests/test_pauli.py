import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rgdtomo import pauli
from conftest import rel_err

labels = st.integers(1, 4).flatmap(lambda k: st.text(alphabet="IXYZ", min_size=k, max_size=k))


def test_single_qubit_matrices():
    assert np.allclose(pauli.kron_dense("Z"), np.diag([1, -1]))
    assert np.allclose(pauli.kron_dense("Y"), [[0, -1j], [1j, 0]])
    for s in "IXYZ":
        assert np.allclose(pauli.compile_label(s).dense(), pauli.PAULI_MATRICES[s])


def test_qubit_one_is_most_significant():
    # X on qubit 1 flips the top bit: |00> -> |10> (index 2)
    v = np.zeros(4, complex)
    v[0] = 1
    out = pauli.apply(pauli.compile_label("XI"), v)
    assert out[2] == 1


@settings(max_examples=60, deadline=None)
@given(labels)
def test_compiled_matches_kron(label):
    p = pauli.compile_label(label)
    assert rel_err(p.dense(), pauli.kron_dense(label)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(labels, st.integers(0, 2**32 - 1))
def test_apply_matches_dense(label, seed):
    rng = np.random.default_rng(seed)
    d = 2 ** len(label)
    V = rng.standard_normal((d, 3)) + 1j * rng.standard_normal((d, 3))
    p = pauli.compile_label(label)
    assert rel_err(pauli.apply(p, V), pauli.kron_dense(label) @ V) < 1e-12
    assert rel_err(pauli.apply(p, V[:, 0]), pauli.kron_dense(label) @ V[:, 0]) < 1e-12


@settings(max_examples=40, deadline=None)
@given(labels)
def test_involutory_and_hermitian(label):
    P = pauli.compile_label(label).dense()
    assert np.allclose(P @ P, np.eye(P.shape[0]))
    assert np.allclose(P, P.conj().T)
    expected_trace = P.shape[0] if set(label) == {"I"} else 0
    assert abs(np.trace(P) - expected_trace) < 1e-12


def test_single_qubit_product_table():
    X, Y, Z = (pauli.kron_dense(s) for s in "XYZ")
    assert np.allclose(X @ Y, 1j * Z)
    assert np.allclose(Y @ Z, 1j * X)
    assert np.allclose(Z @ X, 1j * Y)


@pytest.mark.parametrize("label", ["XZ", "YY", "ZIY", "XXX"])
def test_expectation_matches_trace(label, rng):
    d = 2 ** len(label)
    G = rng.standard_normal((d, 2)) + 1j * rng.standard_normal((d, 2))
    U, _ = np.linalg.qr(G)
    lam = np.array([0.7, 0.3])
    rho = (U * lam) @ U.conj().T
    want = np.trace(pauli.kron_dense(label) @ rho).real
    assert abs(pauli.expectation(pauli.compile_label(label), U, lam) - want) < 1e-12


def test_enumerate_all_is_lexicographic():
    words = pauli.enumerate_all(2)
    assert words == ["".join(t) for t in itertools.product("IXYZ", repeat=2)]
    assert len(pauli.enumerate_all(3)) == 64


def test_enumerate_cap():
    with pytest.raises(ValueError):
        pauli.enumerate_all(9)


@pytest.mark.parametrize("bad", ["", "XA", "xz", 3])
def test_invalid_labels(bad):
    with pytest.raises((ValueError, TypeError)):
        pauli.compile_label(bad)
