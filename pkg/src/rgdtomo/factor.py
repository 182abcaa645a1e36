"""Hermitian low-rank factors ``X = U diag(lambdas) U^dagger``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RankRFactor:
    """Hermitian iterate in eigen-form.

    ``U`` is ``d x r`` with orthonormal columns and ``lambdas`` holds ``r``
    signed reals sorted by decreasing magnitude. Singular values are
    ``abs(lambdas)``.
    """

    U: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=np.complex128)
        if self.U.ndim == 1:
            self.U = self.U[:, None]
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64).reshape(-1)
        if self.U.shape[1] != self.lambdas.shape[0]:
            raise ValueError(
                f"U has {self.U.shape[1]} columns but {self.lambdas.shape[0]} eigenvalues given"
            )

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.lambdas))

    @property
    def width(self) -> int:
        return self.U.shape[1]

    def dense(self) -> np.ndarray:
        M = (self.U * self.lambdas) @ self.U.conj().T
        return 0.5 * (M + M.conj().T)

    def frobenius_norm(self) -> float:
        # exact when U is orthonormal
        return float(np.linalg.norm(self.lambdas))

    def trace(self) -> float:
        return float(np.sum(self.lambdas))

    def orthonormality_error(self) -> float:
        G = self.U.conj().T @ self.U
        return float(np.max(np.abs(G - np.eye(self.width)), initial=0.0))

    @classmethod
    def zeros(cls, d: int, r: int) -> RankRFactor:
        return cls(np.eye(d, r, dtype=np.complex128), np.zeros(r))

    @classmethod
    def from_dense(cls, M: np.ndarray, r: int) -> RankRFactor:
        from .rgd import hard_threshold

        return hard_threshold(M, r)


def lowrank_frobenius(L: np.ndarray, M: np.ndarray) -> float:
    """``||L M L^dagger||_F`` via a thin QR of ``L`` (no d x d product).

    Accurate for differences of nearly equal matrices because the small core
    ``R M R^dagger`` is formed directly rather than through expanded squares.
    """
    if L.shape[1] == 0:
        return 0.0
    _, R = np.linalg.qr(L)
    return float(np.linalg.norm(R @ M @ R.conj().T))


def difference_core(a: RankRFactor, b: RankRFactor) -> tuple[np.ndarray, np.ndarray]:
    """Stacked factorization of ``a - b`` as ``L diag(s) L^dagger``."""
    L = np.hstack([a.U, b.U])
    M = np.diag(np.concatenate([a.lambdas, -b.lambdas]))
    return L, M


def frobenius_distance(a: RankRFactor, b: RankRFactor) -> float:
    L, M = difference_core(a, b)
    return lowrank_frobenius(L, M)


def difference_eigenvalues(a: RankRFactor, b: RankRFactor) -> np.ndarray:
    """Eigenvalues of ``a - b`` (rank <= r_a + r_b) from a small eigenproblem."""
    L, M = difference_core(a, b)
    _, R = np.linalg.qr(L)
    core = R @ M @ R.conj().T
    return np.linalg.eigvalsh(0.5 * (core + core.conj().T))
