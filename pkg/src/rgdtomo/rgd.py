"""Riemannian gradient descent on Hermitian matrices of rank at most r.

Each iteration

1. ``G = A^dagger(y - A(X))``
2. projects ``G`` onto the tangent space at ``X = U diag(lam) U^dagger``,
3. picks the exact line-search step ``alpha = ||P_T G||_F^2 / ||A P_T G||^2``,
4. retracts ``X + alpha P_T G`` (rank <= 2r) back to rank r.

The retraction only touches a ``2r x 2r`` core, never a dense ``d x d``
eigendecomposition.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import sensing
from .factor import RankRFactor, frobenius_distance
from .sensing import SensingEnsemble

log = logging.getLogger(__name__)


def _top_by_magnitude(w: np.ndarray, r: int) -> np.ndarray:
    # stable sort keeps solver order on ties
    return np.argsort(-np.abs(w), kind="stable")[:r]


def hard_threshold(M: np.ndarray, r: int) -> RankRFactor:
    """Best rank-``r`` approximation of a Hermitian matrix.

    Keeps the ``r`` eigenpairs of largest ``|lambda|`` (the top singular
    values), ordered by decreasing magnitude.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if r < 1 or r > M.shape[0]:
        raise ValueError(f"rank must be in [1, {M.shape[0]}], got {r}")
    asym = float(np.max(np.abs(M - M.conj().T), initial=0.0))
    if asym > 1e-8:
        raise ValueError(f"matrix is not Hermitian (max asymmetry {asym:.3e})")
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    keep = _top_by_magnitude(w, r)
    return RankRFactor(V[:, keep], w[keep])


@dataclass
class TangentElement:
    """``U C U^dagger + Z U^dagger + U Z^dagger`` with ``U^dagger Z = 0``.

    ``C`` is the ``r x r`` Hermitian block inside the column space and ``Z``
    the ``d x r`` block orthogonal to it.
    """

    U: np.ndarray
    C: np.ndarray
    Z: np.ndarray

    def lowrank(self) -> tuple[np.ndarray, np.ndarray]:
        """``(L, M)`` with the element equal to ``L M L^dagger``, ``L = [U | Z]``."""
        r = self.U.shape[1]
        L = np.hstack([self.U, self.Z])
        M = np.zeros((2 * r, 2 * r), dtype=np.complex128)
        M[:r, :r] = self.C
        M[:r, r:] = np.eye(r)
        M[r:, :r] = np.eye(r)
        return L, M

    def dense(self) -> np.ndarray:
        L, M = self.lowrank()
        D = L @ M @ L.conj().T
        return 0.5 * (D + D.conj().T)

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.linalg.norm(self.C) ** 2 + 2.0 * np.linalg.norm(self.Z) ** 2))


def tangent_project(X: RankRFactor, G: np.ndarray) -> TangentElement:
    """``P_U G + G P_U - P_U G P_U`` for Hermitian ``G``, in block form."""
    U = X.U
    if G.shape != (U.shape[0], U.shape[0]):
        raise ValueError(f"gradient has shape {G.shape}, iterate has dimension {U.shape[0]}")
    GU = G @ U
    C = U.conj().T @ GU
    C = 0.5 * (C + C.conj().T)
    Z = GU - U @ C
    return TangentElement(U=U, C=C, Z=Z)


def residual_gradient(y: np.ndarray, ensemble: SensingEnsemble, X) -> np.ndarray:
    """``A^dagger(y - A(X))``, the negative gradient of ``0.5 ||y - A(X)||^2``."""
    return sensing.adjoint(ensemble, np.asarray(y) - sensing.forward(ensemble, X))


def step_size(ensemble: SensingEnsemble, PtG: TangentElement) -> float | None:
    """Exact line-search step along ``PtG``; ``None`` for a zero direction."""
    num = PtG.frobenius_norm() ** 2
    if num == 0.0:
        return None
    AP = sensing.forward(ensemble, PtG)
    den = float(AP @ AP)
    if den == 0.0:
        return None
    return num / den


def _orthonormal_complement_basis(U: np.ndarray, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal ``Q`` orthogonal to ``U`` with ``Z = Q R``.

    Two thin QRs: one of ``Z``, one after re-orthogonalising against ``U``
    (guards against drift and against a rank-deficient ``Z``).
    """
    Q1, _ = np.linalg.qr(Z)
    Q1 = Q1 - U @ (U.conj().T @ Q1)
    Q, _ = np.linalg.qr(Q1)
    R = Q.conj().T @ Z
    return Q, R


def retract(X: RankRFactor, PtG: TangentElement, alpha: float, r: int) -> RankRFactor:
    """``H_r(X + alpha PtG)`` through a ``2r x 2r`` core eigenproblem.

    With ``Z = Q R`` and ``Q`` orthogonal to ``U``,
    ``X + alpha PtG = [U Q] K [U Q]^dagger`` where
    ``K = [[diag(lam) + alpha C, alpha R^dagger], [alpha R, 0]]``.
    """
    U = X.U
    w_ = X.width
    if alpha == 0.0:
        return RankRFactor(U.copy(), X.lambdas.copy())
    Q, R = _orthonormal_complement_basis(U, PtG.Z)
    K = np.zeros((2 * w_, 2 * w_), dtype=np.complex128)
    K[:w_, :w_] = np.diag(X.lambdas) + alpha * PtG.C
    K[:w_, w_:] = alpha * R.conj().T
    K[w_:, :w_] = alpha * R
    w, V = np.linalg.eigh(0.5 * (K + K.conj().T))
    keep = _top_by_magnitude(w, r)
    basis = np.hstack([U, Q])
    Unew = basis @ V[:, keep]
    # one re-orthonormalisation per step keeps U^dagger U = I to rounding
    Unew, _ = np.linalg.qr(Unew)
    return RankRFactor(Unew, w[keep])


def init(y: np.ndarray, ensemble: SensingEnsemble, r: int) -> RankRFactor:
    """``H_r(A^dagger(y))``."""
    return hard_threshold(sensing.adjoint(ensemble, y), r)


@dataclass
class SolverOptions:
    r: int = 1
    max_iters: int = 300
    stop_tol: float = 1e-7
    objective_floor: float = 1e-14
    record_truth_error: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be > 0")
        if self.r < 1:
            raise ValueError("rank r must be >= 1")


@dataclass
class SolverTrace:
    """Per-iterate record. Row ``k`` describes ``X_k``; ``step_size[k]`` is the
    step that produced it (NaN for the initial point)."""

    objective: list[float] = field(default_factory=list)
    step_size: list[float] = field(default_factory=list)
    frob_err_sq: list[float] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)
    stop_reason: str = ""
    flags: list[str] = field(default_factory=list)
    label: str = "RGD"

    def __len__(self) -> int:
        return len(self.objective)

    def append(self, objective: float, step: float, err_sq: float | None, wall_ms: float) -> None:
        self.objective.append(float(objective))
        self.step_size.append(float(step))
        if err_sq is not None:
            self.frob_err_sq.append(float(err_sq))
        self.wall_ms.append(float(wall_ms))

    def first_below(self, err_sq: float) -> int | None:
        """First iterate index with ``||X_k - rho||_F^2 <= err_sq``."""
        for i, e in enumerate(self.frob_err_sq):
            if e <= err_sq:
                return i
        return None


@dataclass
class SolveResult:
    estimate: RankRFactor
    trace: SolverTrace
    iterations: int


def solve(y: np.ndarray, ensemble: SensingEnsemble, opts: SolverOptions | None = None,
          truth=None, x0: RankRFactor | None = None) -> SolveResult:
    """Run RGD from ``H_r(A^dagger(y))`` until a stopping rule fires.

    Stops when the relative iterate change drops below ``stop_tol``, when the
    objective falls under ``objective_floor``, when the projected gradient
    vanishes, or after ``max_iters`` iterations. ``truth`` (anything with
    ``U``/``lambdas``) enables the ``frob_err_sq`` column.
    """
    opts = opts or SolverOptions()
    y = np.asarray(y, dtype=np.float64)
    truth_f = None
    if truth is not None and opts.record_truth_error:
        truth_f = truth if isinstance(truth, RankRFactor) else RankRFactor(truth.U, truth.lambdas)

    def err_sq(X):
        return None if truth_f is None else frobenius_distance(X, truth_f) ** 2

    trace = SolverTrace()
    t0 = time.perf_counter()
    X = init(y, ensemble, opts.r) if x0 is None else x0
    resid = y - sensing.forward(ensemble, X)
    obj = 0.5 * float(resid @ resid)
    trace.append(obj, np.nan, err_sq(X), 1e3 * (time.perf_counter() - t0))

    it = 0
    while True:
        if obj < opts.objective_floor:
            trace.stop_reason = "objective_floor"
            break
        if it >= opts.max_iters:
            trace.stop_reason = "max_iters"
            break
        G = sensing.adjoint(ensemble, resid)
        PtG = tangent_project(X, G)
        alpha = step_size(ensemble, PtG)
        if alpha is None:
            trace.stop_reason = "zero_gradient"
            break
        Xn = retract(X, PtG, alpha, opts.r)
        if np.count_nonzero(np.abs(Xn.lambdas) > 0) < opts.r:
            trace.flags.append(f"rank_collapse@{it + 1}")
        it += 1
        change = frobenius_distance(Xn, X)
        base = X.frobenius_norm()
        X = Xn
        resid = y - sensing.forward(ensemble, X)
        obj = 0.5 * float(resid @ resid)
        trace.append(obj, alpha, err_sq(X), 1e3 * (time.perf_counter() - t0))
        if base > 0 and change / base < opts.stop_tol:
            trace.stop_reason = "stop_tol"
            break
    log.debug("RGD stopped after %d iterations (%s), f=%.3e", it, trace.stop_reason, obj)
    return SolveResult(estimate=X, trace=trace, iterations=it)
