"""Pauli observables as signed permutations of the computational basis.

A k-qubit Pauli word ``P_1 ... P_k`` acts on basis vectors as

    W |j> = phi(j) |j XOR flip_mask>,    phi(j) in {1, i, -1, -i}

so it never has to be materialised as a dense ``2^k x 2^k`` matrix. Qubit 1
of the word is the most significant bit of the basis index, which matches
the Kronecker ordering ``P_1 (x) ... (x) P_k``. The sign convention is the
standard one, ``Z|0> = +|0>``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

SYMBOLS = "IXYZ"
ENUMERATION_CAP = 8

# powers of i indexed by exponent mod 4
_I_POWERS = np.array([1, 1j, -1, -1j], dtype=np.complex128)

PAULI_MATRICES = {
    "I": np.array([[1, 0], [0, 1]], dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def validate_label(label: str) -> str:
    """Return ``label`` if it is a non-empty word over ``IXYZ``, else raise ValueError."""
    if not isinstance(label, str):
        raise TypeError(f"Pauli label must be a string, got {type(label).__name__}")
    if len(label) == 0:
        raise ValueError("Pauli label must act on at least one qubit")
    bad = set(label) - set(SYMBOLS)
    if bad:
        raise ValueError(f"invalid Pauli symbol(s) {sorted(bad)} in {label!r}")
    return label


@dataclass(frozen=True)
class CompiledPauli:
    """Signed-permutation form of a Pauli word.

    Attributes
    ----------
    label : str
        The word over ``IXYZ``.
    flip_mask : int
        Bits set where the symbol is X or Y.
    sign_mask : int
        Bits set where the symbol is Y or Z; ``(-1)^popcount(j & sign_mask)``
        is the sign part of the phase.
    num_y : int
        Number of Y symbols; contributes a global ``i^num_y``.
    """

    label: str
    flip_mask: int
    sign_mask: int
    num_y: int

    @property
    def k(self) -> int:
        return len(self.label)

    @property
    def dim(self) -> int:
        return 1 << len(self.label)

    def phase_exponents(self, j: np.ndarray | int) -> np.ndarray:
        """Exponent ``e`` (mod 4) with ``phi(j) = i**e``."""
        j = np.asarray(j, dtype=np.int64)
        parity = np.bitwise_count(j & self.sign_mask).astype(np.int64) & 1
        return (self.num_y + 2 * parity) & 3

    def phases(self, j: np.ndarray | int | None = None) -> np.ndarray:
        if j is None:
            j = np.arange(self.dim, dtype=np.int64)
        return _I_POWERS[self.phase_exponents(j)]

    def dense(self) -> np.ndarray:
        """Dense matrix built from the permutation form (not from kron)."""
        d = self.dim
        cols = np.arange(d, dtype=np.int64)
        mat = np.zeros((d, d), dtype=np.complex128)
        mat[cols ^ self.flip_mask, cols] = self.phases(cols)
        return mat


def compile_label(label: str) -> CompiledPauli:
    """Compile a Pauli word such as ``"XZIY"`` to its signed-permutation form."""
    validate_label(label)
    k = len(label)
    flip = sign = 0
    for q, sym in enumerate(label):
        bit = 1 << (k - 1 - q)
        if sym in "XY":
            flip |= bit
        if sym in "YZ":
            sign |= bit
    return CompiledPauli(label=label, flip_mask=flip, sign_mask=sign, num_y=label.count("Y"))


def _as_compiled(p: CompiledPauli | str) -> CompiledPauli:
    return p if isinstance(p, CompiledPauli) else compile_label(p)


def apply(p: CompiledPauli | str, v: np.ndarray) -> np.ndarray:
    """Return ``W v`` in O(d). ``v`` may be a vector or a ``d x n`` block of columns."""
    p = _as_compiled(p)
    v = np.asarray(v)
    if v.shape[0] != p.dim:
        raise ValueError(f"vector length {v.shape[0]} does not match Pauli dimension {p.dim}")
    rows = np.arange(p.dim, dtype=np.int64)
    src = rows ^ p.flip_mask
    # (W v)[a] = phi(a ^ mask) v[a ^ mask]
    ph = p.phases(src)
    if v.ndim == 1:
        return ph * v[src]
    return ph[:, None] * v[src]


def expectation(p: CompiledPauli | str, U: np.ndarray, lambdas: np.ndarray) -> float:
    """``Tr(W X)`` for ``X = U diag(lambdas) U^dagger`` in O(d r).

    The imaginary part of the accumulated sum must vanish (Hermitian input);
    anything above 1e-10 raises ValueError.
    """
    p = _as_compiled(p)
    U = np.asarray(U)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    if U.shape[0] != p.dim:
        raise ValueError(f"factor has {U.shape[0]} rows, Pauli dimension is {p.dim}")
    if U.shape[1] != lambdas.shape[0]:
        raise ValueError("number of columns in U must equal number of eigenvalues")
    WU = apply(p, U)
    val = np.sum(lambdas * np.einsum("ij,ij->j", U.conj(), WU))
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}; input not Hermitian")
    return float(val.real)


def kron_dense(label: str) -> np.ndarray:
    """Dense matrix by explicit Kronecker product; the brute-force reference."""
    validate_label(label)
    return reduce(np.kron, [PAULI_MATRICES[s] for s in label])


def enumerate_all(k: int, cap: int = ENUMERATION_CAP) -> list[str]:
    """All ``4**k`` words in lexicographic order over ``I < X < Y < Z``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > cap:
        raise ValueError(f"refusing to enumerate 4**{k} Pauli words (cap is k <= {cap})")
    return ["".join(w) for w in itertools.product(SYMBOLS, repeat=k)]
