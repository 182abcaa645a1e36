"""Convergence-bound calculators for RGD tomography.

All inputs (RIP constants, noise level) are supplied by the caller; nothing
here assumes known restricted isometry constants for Pauli ensembles.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field


@dataclass
class BoundInputs:
    """Quantities entering the contraction recursion.

    ``sigma_1`` / ``sigma_r`` are the largest / smallest nonzero eigenvalues of
    the true state, ``lam`` bounds ``||A^dagger(z)||``, and ``rho_frob`` /
    ``x0_err`` are ``||rho||_F`` and ``||X_0 - rho||_F``.
    """

    r: int
    sigma_1: float
    sigma_r: float
    lam: float
    delta_2r: float
    delta_3r: float
    rho_frob: float = 1.0
    x0_err: float = 0.0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if not (self.sigma_r > 0 and self.sigma_1 >= self.sigma_r):
            raise ValueError("need sigma_1 >= sigma_r > 0")
        for name in ("delta_2r", "delta_3r"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if self.lam < 0:
            raise ValueError("noise level lam must be >= 0")

    @property
    def kappa(self) -> float:
        return self.sigma_1 / self.sigma_r

    @property
    def theta(self) -> float:
        return (4 * self.delta_2r + 2 * self.delta_3r) / (1 - self.delta_2r)

    @property
    def eta(self) -> float:
        return 4 * self.delta_2r * math.sqrt(self.r) * self.kappa

    @property
    def phi(self) -> float:
        return 4 * math.sqrt(2 * self.r) * self.lam / self.sigma_r

    @property
    def omega(self) -> float:
        return 2 * math.sqrt(2 * self.r) * self.lam / (1 - self.delta_2r)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(kappa=self.kappa, theta=self.theta, eta=self.eta, phi=self.phi, omega=self.omega)
        return d


def case_inputs(phi: float, r: int = 1, kappa: float = 1.0, sigma_r: float = 1.0) -> BoundInputs:
    """Inputs at the edge of the two worked regimes.

    ``phi = 1/5`` pairs with ``delta_3r = 1/(80 kappa sqrt r)`` and
    ``phi = 1/10`` with ``delta_3r = 1/(20 kappa sqrt r)``; ``delta_2r`` is set
    equal to ``delta_3r`` (its largest admissible value).
    """
    factors = {0.2: 80.0, 0.1: 20.0}
    key = round(phi, 12)
    if key not in factors:
        raise ValueError("worked regimes exist for phi = 1/5 and phi = 1/10 only")
    delta = 1.0 / (factors[key] * kappa * math.sqrt(r))
    lam = phi * sigma_r / (4 * math.sqrt(2 * r))
    return BoundInputs(r=r, sigma_1=kappa * sigma_r, sigma_r=sigma_r, lam=lam,
                       delta_2r=delta, delta_3r=delta)


@dataclass
class GammaRecursion:
    gammas: list[float]
    mus: list[float] = field(default_factory=list)  # mus[j] is mu_{j+1}
    gamma_bar: float | None = None


def gamma_recursion(inputs: BoundInputs, steps: int) -> GammaRecursion:
    """Per-step contraction factors ``gamma_0 .. gamma_{steps-1}``.

    ``gamma_0 = theta + eta + phi`` and for ``k >= 1``
    ``gamma_k = theta + (eta + phi) gamma_0 ... gamma_{k-1} + phi/(1 - delta_2r) mu_k``
    with ``mu_1 = 1``, ``mu_{k+1} = 1 + gamma_k mu_k``. ``gamma_bar`` is the
    largest computed factor when it is below one.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    th, et, ph = inputs.theta, inputs.eta, inputs.phi
    noise_w = ph / (1 - inputs.delta_2r)
    gammas = [th + et + ph]
    mus: list[float] = []
    prod = gammas[0]
    mu = 1.0
    for _ in range(1, steps):
        mus.append(mu)
        g = th + (et + ph) * prod + noise_w * mu
        gammas.append(g)
        prod *= g
        mu = 1.0 + g * mu
    top = max(gammas)
    return GammaRecursion(gammas=gammas, mus=mus, gamma_bar=top if top < 1 else None)


def a_certificate(inputs: BoundInputs, gammas: list[float], k: int, gamma_bar: float) -> float:
    """``A_k = theta + (eta+phi) gamma_0..gamma_{k-1} + phi/(1-delta_3r) / (1-gamma_bar)``.

    ``A_k < gamma_bar`` (with ``gamma_0..gamma_{k-1} < gamma_bar``) certifies
    that every later factor also stays below ``gamma_bar``.
    """
    if not 0 <= gamma_bar < 1:
        raise ValueError("gamma_bar must lie in [0, 1)")
    if k > len(gammas):
        raise ValueError(f"need gamma_0..gamma_{k - 1}, only {len(gammas)} given")
    prod = math.prod(gammas[:k])
    return (inputs.theta + (inputs.eta + inputs.phi) * prod
            + inputs.phi / (1 - inputs.delta_3r) / (1 - gamma_bar))


def certify_gamma_bar(inputs: BoundInputs, gamma_bar: float, max_k: int = 50) -> int | None:
    """Smallest ``k`` with ``gamma_0..gamma_{k-1} < gamma_bar`` and ``A_k < gamma_bar``."""
    rec = gamma_recursion(inputs, max_k)
    for k in range(1, max_k):
        if max(rec.gammas[:k]) >= gamma_bar:
            return None
        if a_certificate(inputs, rec.gammas, k, gamma_bar) < gamma_bar:
            return k
    return None


def noise_floor(inputs: BoundInputs, gamma_bar: float) -> float:
    """Asymptotic term ``2 sqrt(2r) lam / ((1 - delta_3r)(1 - gamma_bar))``."""
    if not 0 <= gamma_bar < 1:
        raise ValueError("gamma_bar must lie in [0, 1)")
    return 2 * math.sqrt(2 * inputs.r) * inputs.lam / ((1 - inputs.delta_3r) * (1 - gamma_bar))


def error_bound_series(inputs: BoundInputs, gamma_bar: float, k: int) -> float:
    """``||X_0 - rho||_F gamma_bar^k + noise_floor``: bound on ``||X_k - rho||_F``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return inputs.x0_err * gamma_bar**k + noise_floor(inputs, gamma_bar)


def init_error_bound(inputs: BoundInputs) -> float:
    """Bound ``2 delta_2r ||rho||_F + 2 sqrt(2r) lam`` on ``||H_r(A^dagger y) - rho||_F``."""
    return 2 * inputs.delta_2r * inputs.rho_frob + 2 * math.sqrt(2 * inputs.r) * inputs.lam


def step_size_bounds(delta_2r: float) -> tuple[float, float]:
    """Range ``[1/(1+delta), 1/(1-delta)]`` of the exact line-search step."""
    if not 0 <= delta_2r < 1:
        raise ValueError("delta must lie in [0, 1)")
    return 1.0 / (1.0 + delta_2r), 1.0 / (1.0 - delta_2r)


def iteration_estimate(inputs: BoundInputs, gamma_bar: float, C0: float = 1.0, C1: float = 4.0,
                       C2: float = 8.0, eps: float | None = None) -> float:
    """Iterations to reach the noise-limited accuracy (real-valued; caller rounds up).

    Noisy case (``lam > 0``)::

        (ln(2 C0 ||rho||_F / (r kappa lam) + 2 sqrt 2) - ln(C2 - C1)) / ln(1/gamma_bar)

    Noiseless case (``lam = 0``) needs a relative accuracy ``eps``::

        ln(C0 / (sqrt(r) kappa eps)) / ln(1/gamma_bar)
    """
    if not 0 < gamma_bar < 1:
        raise ValueError("gamma_bar must lie in (0, 1)")
    rate = math.log(1.0 / gamma_bar)
    if inputs.lam == 0:
        if eps is None or eps <= 0:
            raise ValueError("noiseless estimate needs eps > 0")
        if C0 <= 0:
            raise ValueError("C0 must be positive")
        return math.log(C0 / (math.sqrt(inputs.r) * inputs.kappa * eps)) / rate
    if not C2 > C1:
        raise ValueError("need C2 > C1")
    if C0 <= 0:
        raise ValueError("C0 must be positive")
    head = 2 * C0 * inputs.rho_frob / (inputs.r * inputs.kappa * inputs.lam) + 2 * math.sqrt(2)
    return (math.log(head) - math.log(C2 - C1)) / rate
