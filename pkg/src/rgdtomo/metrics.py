"""Error metrics between a reconstruction and the true state."""
from __future__ import annotations

import numpy as np

from .factor import RankRFactor, difference_eigenvalues
from .simulator import DensityState


def _as_factor(X) -> RankRFactor:
    if isinstance(X, RankRFactor):
        return X
    if hasattr(X, "U") and hasattr(X, "lambdas"):
        return RankRFactor(X.U, X.lambdas)
    M = np.asarray(X)
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    return RankRFactor(V, w)


def fidelity(a: RankRFactor, b: RankRFactor) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))^2`` of two PSD low-rank operators,
    computed inside the span of both column spaces."""
    Q, _ = np.linalg.qr(np.hstack([a.U, b.U]))
    A = Q.conj().T @ a.dense() @ Q
    B = Q.conj().T @ b.dense() @ Q
    w, V = np.linalg.eigh(0.5 * (A + A.conj().T))
    sqA = (V * np.sqrt(_drop_roundoff(w))) @ V.conj().T
    inner = sqA @ B @ sqA
    ev = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(_drop_roundoff(ev))) ** 2)


def _drop_roundoff(w: np.ndarray) -> np.ndarray:
    # sqrt turns 1e-18 noise into 1e-9, so zero anything at round-off level
    tol = 64 * np.finfo(float).eps * max(float(np.max(np.abs(w), initial=0.0)), 1.0)
    return np.where(w > tol, w, 0.0)


def metrics(estimate, truth) -> dict:
    """Frobenius / nuclear errors, trace deviation, smallest eigenvalue and
    (for PSD estimates) fidelity."""
    est = _as_factor(estimate)
    tru = _as_factor(truth)
    if est.dim != tru.dim:
        raise ValueError(f"dimension mismatch: {est.dim} vs {tru.dim}")
    ev = difference_eigenvalues(est, tru)
    frob = float(np.sqrt(np.sum(ev**2)))
    min_eig = float(np.min(est.lambdas))
    if est.width < est.dim:
        min_eig = min(min_eig, 0.0)
    out = {
        "frob_err": frob,
        "frob_err_sq": frob**2,
        "nuclear_err": float(np.sum(np.abs(ev))),
        "trace_dev": abs(est.trace() - 1.0),
        "min_eig": min_eig,
        "fidelity": None,
    }
    if np.min(est.lambdas) >= -1e-12 and est.trace() > 0:
        out["fidelity"] = fidelity(est, tru)
    return out


def psd_normalize(estimate, k: int | None = None) -> DensityState:
    """Clip negative eigenvalues to zero and rescale to unit trace."""
    est = _as_factor(estimate)
    lam = np.clip(est.lambdas, 0.0, None)
    total = lam.sum()
    if total <= 0:
        raise ValueError("no positive eigenvalues left after clipping")
    keep = np.flatnonzero(lam > 0)
    order = keep[np.argsort(-lam[keep], kind="stable")]
    if k is None:
        k = int(round(np.log2(est.dim)))
    if 1 << k != est.dim:
        raise ValueError(f"dimension {est.dim} is not 2**{k}")
    lam_n = lam[order] / total
    # the constructor checks unit trace to 1e-12; absorb the last rounding bit
    lam_n[0] += 1.0 - lam_n.sum()
    return DensityState(est.U[:, order], lam_n, kind="estimate", k=k)
