"""Factored gradient baselines over ``rho = A A^dagger``.

The momentum variant is the heavy-ball two-sequence form

    Z_k     = A_k + mu (A_k - A_{k-1})
    A_{k+1} = Proj(Z_k - eta grad f(Z_k))

with ``Proj`` the projection onto the Frobenius ball ``||A||_F <= 1``. It is
a stand-in for MiFGD used for comparisons, not a port of a reference code.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import sensing
from .factor import RankRFactor, lowrank_frobenius
from .rgd import SolverTrace
from .sensing import SensingEnsemble

MU_GRID = (1 / 8, 1 / 4, 1 / 3, 1 / 2, 3 / 4)
DIVERGENCE_FACTOR = 10.0


@dataclass
class FactorIterate:
    A: np.ndarray
    prev_A: np.ndarray
    eta: float
    mu: float = 0.0


def project_ball(A: np.ndarray) -> np.ndarray:
    """Frobenius-ball projection: rescale if ``||A||_F > 1``."""
    n = np.linalg.norm(A)
    return A / n if n > 1.0 else A


def objective(y: np.ndarray, ensemble: SensingEnsemble, A: np.ndarray) -> float:
    r = y - sensing._forward_lowrank(ensemble, A, np.eye(A.shape[1]))
    return 0.5 * float(r @ r)


def factor_gradient(y: np.ndarray, ensemble: SensingEnsemble, A: np.ndarray) -> np.ndarray:
    """Real gradient of ``f(A) = 0.5 ||y - A(A A^dagger)||^2`` w.r.t. complex ``A``.

    ``df = Re Tr(grad^dagger dA)`` with ``grad = -2 A^dagger(y - A(A A^dagger)) A``.
    """
    resid = y - sensing._forward_lowrank(ensemble, A, np.eye(A.shape[1]))
    return -2.0 * (sensing.adjoint(ensemble, resid) @ A)


def fgd_step(it: FactorIterate, y: np.ndarray, ensemble: SensingEnsemble) -> FactorIterate:
    """One projected gradient step ``A <- Proj(A - eta grad f(A))`` (no momentum)."""
    A_new = project_ball(it.A - it.eta * factor_gradient(y, ensemble, it.A))
    return FactorIterate(A=A_new, prev_A=it.A, eta=it.eta, mu=it.mu)


def momentum_step(it: FactorIterate, y: np.ndarray, ensemble: SensingEnsemble) -> FactorIterate:
    Z = it.A + it.mu * (it.A - it.prev_A)
    A_new = project_ball(Z - it.eta * factor_gradient(y, ensemble, Z))
    return FactorIterate(A=A_new, prev_A=it.A, eta=it.eta, mu=it.mu)


def factor_from_rank_r(X: RankRFactor) -> np.ndarray:
    """``A`` with ``A A^dagger`` the PSD part of ``X`` (negative eigenvalues dropped)."""
    return X.U * np.sqrt(np.clip(X.lambdas, 0.0, None))[None, :]


def to_rank_r(A: np.ndarray) -> RankRFactor:
    W, s, _ = np.linalg.svd(A, full_matrices=False)
    return RankRFactor(W, s**2)


def _err_sq(A: np.ndarray, truth: RankRFactor) -> float:
    L = np.hstack([A, truth.U])
    M = np.diag(np.concatenate([np.ones(A.shape[1]), -truth.lambdas]))
    return lowrank_frobenius(L, M) ** 2


@dataclass
class BaselineResult:
    estimate: RankRFactor
    trace: SolverTrace
    iterations: int
    diverged: bool


def mifgd_solve(y: np.ndarray, ensemble: SensingEnsemble, r: int, eta: float, mu: float,
                iters: int, truth=None, A0: np.ndarray | None = None,
                x0: RankRFactor | None = None) -> BaselineResult:
    """Heavy-ball projected factored gradient descent for ``iters`` iterations.

    Starts from ``A0`` if given, else from the PSD factor of ``x0`` (default
    ``H_r(A^dagger(y))``), unprojected so that the starting point matches
    RGD's; the ball projection applies from the first update on. Stops early and
    flags divergence if the objective exceeds ten times its initial value.
    """
    if not 0.0 <= mu < 1.0:
        raise ValueError("momentum mu must lie in [0, 1)")
    if eta <= 0:
        raise ValueError("step size eta must be positive")
    if iters < 0:
        raise ValueError("iters must be >= 0")
    y = np.asarray(y, dtype=np.float64)
    if A0 is None:
        from .rgd import init

        A0 = factor_from_rank_r(x0 if x0 is not None else init(y, ensemble, r))
    A0 = np.asarray(A0, dtype=np.complex128)
    truth_f = None if truth is None else RankRFactor(truth.U, truth.lambdas)

    trace = SolverTrace(label=f"MIFGD(heavy-ball) mu={mu:g} eta={eta:g}")
    t0 = time.perf_counter()
    it = FactorIterate(A=A0, prev_A=A0, eta=eta, mu=mu)
    f0 = objective(y, ensemble, A0)
    trace.append(f0, np.nan, None if truth_f is None else _err_sq(A0, truth_f),
                 1e3 * (time.perf_counter() - t0))
    diverged = False
    done = 0
    for k in range(iters):
        it = momentum_step(it, y, ensemble)
        done = k + 1
        f = objective(y, ensemble, it.A)
        trace.append(f, eta, None if truth_f is None else _err_sq(it.A, truth_f),
                     1e3 * (time.perf_counter() - t0))
        if not np.isfinite(f) or f > DIVERGENCE_FACTOR * max(f0, np.finfo(float).tiny):
            diverged = True
            trace.flags.append(f"diverged@{done}")
            break
    trace.stop_reason = "diverged" if diverged else "max_iters"
    return BaselineResult(estimate=to_rank_r(it.A), trace=trace, iterations=done, diverged=diverged)
