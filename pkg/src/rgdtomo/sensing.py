"""Pauli sensing map ``A`` and its adjoint.

``(A X)_i = sqrt(d/m) Tr(S_i X)`` for ``m`` sampled Pauli words ``S_i``, and
``A^dagger(y) = sqrt(d/m) sum_i y_i S_i``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pauli
from .factor import RankRFactor

# Paulis processed per block; bounds the (block x d) temporaries
CHUNK = 2048

# real / imaginary part of i**n, n mod 4
_RE_IPOW = np.array([1.0, 0.0, -1.0, 0.0])
_IM_IPOW = np.array([0.0, 1.0, 0.0, -1.0])


@dataclass(frozen=True)
class SensingEnsemble:
    """Ordered list of ``m`` Pauli words on ``k`` qubits (duplicates allowed)."""

    labels: tuple[str, ...]
    k: int
    seed: int | None = None
    replace: bool = True
    flip_masks: np.ndarray = field(init=False, repr=False, compare=False)
    sign_masks: np.ndarray = field(init=False, repr=False, compare=False)
    num_y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(labels) == 0:
            raise ValueError("ensemble needs at least one Pauli (m >= 1)")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        compiled = []
        for lab in labels:
            pauli.validate_label(lab)
            if len(lab) != self.k:
                raise ValueError(f"label {lab!r} has length {len(lab)}, expected k={self.k}")
            compiled.append(pauli.compile_label(lab))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "flip_masks", np.array([c.flip_mask for c in compiled], dtype=np.int64))
        object.__setattr__(self, "sign_masks", np.array([c.sign_mask for c in compiled], dtype=np.int64))
        object.__setattr__(self, "num_y", np.array([c.num_y for c in compiled], dtype=np.int64))

    @property
    def m(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return 1 << self.k

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.dim / self.m))

    def to_record(self) -> dict:
        return {"k": self.k, "m": self.m, "seed": self.seed, "replace": self.replace,
                "labels": list(self.labels)}

    @classmethod
    def from_record(cls, rec: dict) -> SensingEnsemble:
        labels = tuple(rec["labels"])
        if "m" in rec and rec["m"] != len(labels):
            raise ValueError(f"record says m={rec['m']} but lists {len(labels)} labels")
        return cls(labels=labels, k=int(rec["k"]), seed=rec.get("seed"),
                   replace=bool(rec.get("replace", True)))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON record; identifies the ensemble in outputs."""
        blob = json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_record(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> SensingEnsemble:
        return cls.from_record(json.loads(Path(path).read_text()))


def index_to_label(index: int, k: int) -> str:
    """Base-4 digits of ``index`` (most significant first) as a word; matches enumerate_all order."""
    digits = []
    for _ in range(k):
        digits.append(pauli.SYMBOLS[index & 3])
        index >>= 2
    return "".join(reversed(digits))


def sample_ensemble(k: int, m: int, seed: int | None = None, replace: bool = True) -> SensingEnsemble:
    """Draw ``m`` words i.i.d. uniformly from all ``4**k`` (identity included).

    With ``replace=False`` the words are distinct, which needs ``m <= 4**k``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    total = 4**k
    rng = np.random.default_rng(seed)
    if replace:
        idx = rng.integers(0, total, size=m)
    else:
        if m > total:
            raise ValueError(f"cannot draw {m} distinct words from {total}")
        idx = rng.choice(total, size=m, replace=False)
    labels = tuple(index_to_label(int(i), k) for i in idx)
    return SensingEnsemble(labels=labels, k=k, seed=seed, replace=replace)


def complete_ensemble(k: int) -> SensingEnsemble:
    """Every Pauli word exactly once, in lexicographic order."""
    return SensingEnsemble(labels=tuple(pauli.enumerate_all(k)), k=k, seed=None, replace=False)


def _signs(idx: np.ndarray, sign_masks: np.ndarray) -> np.ndarray:
    """``(-1)^popcount(b & z)`` for each (Pauli, basis index) pair, as float."""
    parity = np.bitwise_count(idx[None, :] & sign_masks[:, None]) & 1
    return 1.0 - 2.0 * parity


def _forward_lowrank(e: SensingEnsemble, L: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``A(L M L^dagger)`` without forming the d x d matrix.

    ``Tr(W X) = sum_b phi(b) X[b, b ^ mask]``; the cross terms
    ``X[b, b ^ x]`` are computed once per distinct flip mask ``x``.
    """
    d = e.dim
    if L.shape[0] != d:
        raise ValueError(f"operand has dimension {L.shape[0]}, ensemble acts on d={d}")
    idx = np.arange(d, dtype=np.int64)
    LM = L @ M
    uniq, inverse = np.unique(e.flip_masks, return_inverse=True)
    # cross[u, b] = (L M L^dagger)[b, b ^ uniq[u]]
    cross = np.einsum("bc,ubc->ub", LM, L.conj()[idx[None, :] ^ uniq[:, None]])
    return _contract_cross(e, cross, inverse)


def _forward_dense(e: SensingEnsemble, X: np.ndarray) -> np.ndarray:
    d = e.dim
    if X.shape != (d, d):
        raise ValueError(f"matrix has shape {X.shape}, ensemble acts on d={d}")
    idx = np.arange(d, dtype=np.int64)
    uniq, inverse = np.unique(e.flip_masks, return_inverse=True)
    cross = X[idx[None, :], idx[None, :] ^ uniq[:, None]]
    return _contract_cross(e, cross, inverse)


def _contract_cross(e: SensingEnsemble, cross: np.ndarray, inverse: np.ndarray) -> np.ndarray:
    idx = np.arange(e.dim, dtype=np.int64)
    out = np.empty(e.m, dtype=np.float64)
    for start in range(0, e.m, CHUNK):
        sl = slice(start, start + CHUNK)
        s = _signs(idx, e.sign_masks[sl])
        signed = np.einsum("nb,nb->n", s, cross[inverse[sl]])
        ny = e.num_y[sl] & 3
        # multiply by i**num_y and keep the real part
        out[sl] = _RE_IPOW[ny] * signed.real - _IM_IPOW[ny] * signed.imag
    return e.scale * out


def forward(e: SensingEnsemble, X) -> np.ndarray:
    """Apply the sensing map to a factored Hermitian (anything with ``U`` and
    ``lambdas``) or to a dense ``d x d`` Hermitian matrix."""
    if hasattr(X, "U") and hasattr(X, "lambdas"):
        return _forward_lowrank(e, np.asarray(X.U), np.diag(np.asarray(X.lambdas, dtype=np.float64)))
    if hasattr(X, "lowrank"):
        L, M = X.lowrank()
        return _forward_lowrank(e, L, M)
    return _forward_dense(e, np.asarray(X))


def adjoint(e: SensingEnsemble, y: np.ndarray) -> np.ndarray:
    """``sqrt(d/m) sum_i y_i S_i`` as a dense Hermitian matrix.

    Each Pauli contributes its ``d`` signed entries to the row of its flip mask;
    entries are accumulated in ensemble order. Every term is ``+-y_i`` times a
    unit real or imaginary number, so ``M[a, b]`` and ``M[b, a]`` are built from
    exactly conjugate summands and the result is Hermitian to the last bit.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != e.m:
        raise ValueError(f"y has length {y.shape[0]}, ensemble has m={e.m}")
    d = e.dim
    idx = np.arange(d, dtype=np.int64)
    acc_re = np.zeros((d, d))
    acc_im = np.zeros((d, d))
    for start in range(0, e.m, CHUNK):
        sl = slice(start, start + CHUNK)
        s = _signs(idx, e.sign_masks[sl])
        ny = e.num_y[sl] & 3
        rows = e.flip_masks[sl]
        np.add.at(acc_re, rows, (y[sl] * _RE_IPOW[ny])[:, None] * s)
        np.add.at(acc_im, rows, (y[sl] * _IM_IPOW[ny])[:, None] * s)
    # acc[x, b] is the coefficient of |b ^ x><b|
    out = np.zeros((d, d), dtype=np.complex128)
    out[idx[None, :] ^ idx[:, None], idx[None, :]] = acc_re + 1j * acc_im
    return e.scale * out


def objective(e: SensingEnsemble, y: np.ndarray, X) -> float:
    """``0.5 * ||y - A(X)||^2``."""
    r = np.asarray(y) - forward(e, X)
    return 0.5 * float(r @ r)


@dataclass
class RipProbeResult:
    delta_hat: float
    samples: np.ndarray
    rank: int


def random_lowrank_hermitian(d: int, r: int, rng: np.random.Generator) -> RankRFactor:
    """Random rank-``r`` Hermitian with unit Frobenius norm."""
    G = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    U, _ = np.linalg.qr(G)
    lam = rng.standard_normal(r)
    lam /= np.linalg.norm(lam)
    order = np.argsort(-np.abs(lam), kind="stable")
    return RankRFactor(U[:, order], lam[order])


def rip_probe(e: SensingEnsemble, r: int, trials: int, seed: int | None = None) -> RipProbeResult:
    """Empirical lower bound on the restricted isometry constant at rank ``r``.

    Samples random unit-Frobenius rank-``r`` Hermitian matrices and reports
    ``max |‖A X‖^2 - 1|`` together with every ratio ``‖A X‖^2``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 1 <= r <= e.dim:
        raise ValueError(f"rank must be in [1, {e.dim}]")
    rng = np.random.default_rng(seed)
    samples = np.empty(trials)
    for t in range(trials):
        X = random_lowrank_hermitian(e.dim, r, rng)
        v = forward(e, X)
        samples[t] = float(v @ v)
    return RipProbeResult(delta_hat=float(np.max(np.abs(samples - 1.0))), samples=samples, rank=r)


def full_rank_isometry_constant(e: SensingEnsemble) -> float:
    """Exact isometry constant of ``A`` over all Hermitian matrices.

    ``A^dagger A`` is diagonal in the Pauli basis with eigenvalue
    ``d^2 n_j / m`` for a word drawn ``n_j`` times, so the constant is
    ``max_j |d^2 n_j / m - 1|``. It bounds the restricted constant at every rank.
    Enumerates all ``4**k`` words, so only usable for small ``k``.
    """
    total = 4**e.k
    if e.k > pauli.ENUMERATION_CAP:
        raise ValueError("ensemble too large for exact isometry constant")
    # word index from masks: digit per qubit I=0, X=1, Y=2, Z=3
    counts = np.zeros(total, dtype=np.int64)
    for lab in e.labels:
        counts[int("".join(str(pauli.SYMBOLS.index(s)) for s in lab), 4)] += 1
    eig = e.dim**2 * counts / e.m
    return float(np.max(np.abs(eig - 1.0)))
