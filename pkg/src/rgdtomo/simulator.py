"""Ground-truth states, shot-noise measurement simulation and counts decoding."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import pauli
from .factor import RankRFactor
from .sensing import SensingEnsemble, forward

STATE_KINDS = ("hadamard", "ghz", "random_kappa")
CONVENTIONS = ("std", "flipped")


@dataclass
class DensityState:
    """Rank-``r`` density matrix ``U diag(lambdas) U^dagger`` with positive
    eigenvalues in decreasing order summing to one."""

    U: np.ndarray
    lambdas: np.ndarray
    kind: str
    k: int
    kappa: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=np.complex128)
        if self.U.ndim == 1:
            self.U = self.U[:, None]
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if self.U.shape != (1 << self.k, self.lambdas.shape[0]):
            raise ValueError("state factor shape inconsistent with k and number of eigenvalues")
        if np.any(self.lambdas <= 0):
            raise ValueError("density state eigenvalues must be positive")
        if abs(self.lambdas.sum() - 1.0) > 1e-12:
            raise ValueError(f"eigenvalues sum to {self.lambdas.sum()!r}, expected 1")

    @property
    def dim(self) -> int:
        return 1 << self.k

    @property
    def rank(self) -> int:
        return self.lambdas.shape[0]

    @property
    def condition_number(self) -> float:
        return float(self.lambdas[0] / self.lambdas[-1])

    def factor(self) -> RankRFactor:
        return RankRFactor(self.U, self.lambdas)

    def dense(self) -> np.ndarray:
        return self.factor().dense()

    def expectation(self, label: str | pauli.CompiledPauli) -> float:
        return pauli.expectation(label, self.U, self.lambdas)

    def to_record(self) -> dict:
        return {"kind": self.kind, "k": self.k, "r": self.rank, "kappa": self.kappa, "seed": self.seed}


def make_state(kind: str, k: int, r: int = 1, kappa: float = 1.0, seed: int | None = None) -> DensityState:
    """Build a ground-truth state.

    ``hadamard`` is ``|+>^k``, ``ghz`` is ``(|0..0> + |1..1>)/sqrt(2)``. The
    ``random_kappa`` state has eigenvalues geometrically spaced from ``s`` down
    to ``s/kappa`` (normalised to unit trace) and Haar-like eigenvectors from a
    QR of a complex Gaussian draw.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    d = 1 << k
    if kind == "hadamard":
        U = np.full(d, 1.0 / math.sqrt(d), dtype=np.complex128)
        return DensityState(U, np.array([1.0]), kind, k)
    if kind == "ghz":
        U = np.zeros(d, dtype=np.complex128)
        U[0] = U[-1] = 1.0 / math.sqrt(2.0)
        return DensityState(U, np.array([1.0]), kind, k)
    if kind != "random_kappa":
        raise ValueError(f"unknown state kind {kind!r}; choose from {STATE_KINDS}")
    if r < 1 or r > d:
        raise ValueError(f"rank must be in [1, {d}], got {r}")
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if r == 1 and kappa != 1:
        raise ValueError("a rank-1 state has kappa = 1")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    U, _ = np.linalg.qr(G)
    if r == 1:
        lam = np.array([1.0])
    else:
        lam = kappa ** (-np.arange(r) / (r - 1))
        lam = lam / lam.sum()
    return DensityState(U, lam, kind, k, kappa=float(kappa), seed=seed)


def state_from_record(rec: Mapping) -> DensityState:
    return make_state(rec["kind"], int(rec["k"]), r=int(rec.get("r", 1)),
                      kappa=float(rec.get("kappa", 1.0)), seed=rec.get("seed"))


def _plus_probability(state: DensityState, label) -> float:
    t = state.expectation(label)
    if abs(t) > 1 + 1e-9:
        raise ValueError(f"|Tr(S rho)| = {abs(t):.6g} exceeds 1; state is not a density matrix")
    return min(max(0.5 * (1.0 + t), 0.0), 1.0)


def measure_pauli(state: DensityState, label, l: int, rng: np.random.Generator) -> float:
    """Frequency average of ``l`` two-outcome (+1/-1) measurements of ``label``.

    ``P(+1) = (1 + Tr(S rho)) / 2``; the count of +1 outcomes is binomial, which
    is the sum of the ``l`` Bernoulli shots.
    """
    if l < 1:
        raise ValueError("number of shots l must be >= 1")
    p = _plus_probability(state, label)
    plus = rng.binomial(l, p)
    return (2.0 * plus - l) / l


def measure_outcomes(state: DensityState, label, l: int, rng: np.random.Generator) -> np.ndarray:
    """Individual +1/-1 shot outcomes (same law as :func:`measure_pauli`)."""
    if l < 1:
        raise ValueError("number of shots l must be >= 1")
    p = _plus_probability(state, label)
    return np.where(rng.random(l) < p, 1, -1).astype(np.int64)


def index_rng(seed: int, i: int) -> np.random.Generator:
    """Generator for Pauli index ``i``; independent of processing order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(i)]))


@dataclass
class MeasurementVector:
    """Scaled measurement vector ``y`` with provenance."""

    y: np.ndarray
    ensemble: SensingEnsemble
    shots: int | None
    exact: bool
    seed: int | None = None
    state: dict | None = None
    meta: dict = field(default_factory=dict)

    @property
    def frequencies(self) -> np.ndarray:
        return self.y / self.ensemble.scale

    def to_record(self) -> dict:
        return {
            "ensemble": self.ensemble.to_record(),
            "ensemble_sha256": self.ensemble.digest(),
            "y": [float(v) for v in self.y],
            "shots": self.shots,
            "exact": self.exact,
            "seed": self.seed,
            "state": self.state,
            "meta": self.meta,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> MeasurementVector:
        ens = SensingEnsemble.from_record(rec["ensemble"])
        y = np.asarray(rec["y"], dtype=np.float64)
        if y.shape != (ens.m,):
            raise ValueError(f"dataset has {y.shape[0]} values for m={ens.m} Paulis")
        return cls(y=y, ensemble=ens, shots=rec.get("shots"), exact=bool(rec.get("exact", False)),
                   seed=rec.get("seed"), state=rec.get("state"), meta=dict(rec.get("meta") or {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_record(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> MeasurementVector:
        return cls.from_record(json.loads(Path(path).read_text()))


def build_measurement(state: DensityState, ensemble: SensingEnsemble, l: int | None = None,
                      exact: bool = False, seed: int | None = None) -> MeasurementVector:
    """Measurement vector for ``state``: exact ``A(rho)`` or shot-sampled.

    Sampled mode draws Pauli ``i`` from its own stream seeded by ``(seed, i)``,
    so each ``y_i`` depends only on the seed, the label and ``l``.
    """
    if ensemble.k != state.k:
        raise ValueError(f"ensemble acts on k={ensemble.k} qubits, state has k={state.k}")
    if exact:
        y = forward(ensemble, state.factor())
        return MeasurementVector(y=y, ensemble=ensemble, shots=None, exact=True, seed=seed,
                                 state=state.to_record())
    if l is None:
        raise ValueError("either exact=True or a shot count l is required")
    if seed is None:
        raise ValueError("sampled measurements need an integer seed for reproducibility")
    f = np.empty(ensemble.m)
    for i, lab in enumerate(ensemble.labels):
        f[i] = measure_pauli(state, lab, l, index_rng(seed, i))
    return MeasurementVector(y=ensemble.scale * f, ensemble=ensemble, shots=int(l), exact=False,
                             seed=seed, state=state.to_record())


def decode_counts(counts: Mapping[str, int], label: str, convention: str = "std") -> float:
    """Estimate ``Tr(S rho)`` from bitstring counts measured in the basis of ``label``.

    Each outcome contributes ``(-1)^chi`` where ``chi`` counts the non-identity
    positions whose bit is 1 (``std``: bit 0 is the +1 eigenvalue). The
    ``flipped`` convention maps bit 1 to +1 instead, i.e. counts the zeros.
    """
    pauli.validate_label(label)
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    active = [q for q, s in enumerate(label) if s != "I"]
    total = 0
    acc = 0
    for bits, n in counts.items():
        if len(bits) != len(label) or set(bits) - {"0", "1"}:
            raise ValueError(f"malformed bitstring {bits!r} for label {label!r}")
        n = int(n)
        if n < 0:
            raise ValueError("counts must be non-negative")
        flips = sum(1 for q in active if bits[q] == ("1" if convention == "std" else "0"))
        acc += n if flips % 2 == 0 else -n
        total += n
    if total == 0:
        raise ValueError("counts are empty (total shots = 0)")
    return acc / total


def outcomes_to_counts(outcomes: np.ndarray, label: str, convention: str = "std") -> dict[str, int]:
    """Bitstring counts whose decoded parity reproduces each +1/-1 outcome.

    A -1 outcome sets the bit of the first non-identity qubit to its odd value.
    """
    pauli.validate_label(label)
    k = len(label)
    active = [q for q, s in enumerate(label) if s != "I"]
    even_bit, odd_bit = ("0", "1") if convention == "std" else ("1", "0")
    plus = "".join(even_bit if q in active else "0" for q in range(k))
    counts: dict[str, int] = {}
    n_plus = int(np.sum(np.asarray(outcomes) == 1))
    n_minus = len(outcomes) - n_plus
    if n_plus:
        counts[plus] = n_plus
    if n_minus:
        if not active:
            raise ValueError("identity word cannot produce a -1 outcome")
        q0 = active[0]
        minus = plus[:q0] + odd_bit + plus[q0 + 1:]
        counts[minus] = n_minus
    return counts


def load_counts_file(path: str | Path) -> MeasurementVector:
    """Turn a counts file into a measurement vector.

    Schema: ``{"k": int, "shots": int, "convention": "std"|"flipped",
    "measurements": [{"label": str, "counts": {bitstring: int}}]}``.
    """
    rec = json.loads(Path(path).read_text())
    return counts_record_to_measurement(rec)


def counts_record_to_measurement(rec: Mapping) -> MeasurementVector:
    try:
        k = int(rec["k"])
        meas = rec["measurements"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"counts record missing field: {exc}") from exc
    convention = rec.get("convention", "std")
    if not meas:
        raise ValueError("counts record has no measurements")
    labels = tuple(m_["label"] for m_ in meas)
    ens = SensingEnsemble(labels=labels, k=k, seed=None)
    f = np.array([decode_counts(m_["counts"], m_["label"], convention) for m_ in meas])
    shots = rec.get("shots")
    return MeasurementVector(y=ens.scale * f, ensemble=ens, shots=shots, exact=False, seed=None,
                             meta={"source": "counts", "convention": convention})


def noise_bound_lambda(d: int, m: int, l: int, C: float) -> float:
    """Spectral noise level ``sqrt(C d (d+1) ln d / (m l))``.

    With ``m l = C d (d+1) ln d / lambda^2`` total shots, ``||A^dagger(z)|| <= lambda``
    fails with probability at most ``d^(1-C)``.
    """
    if min(d, m, l, C) <= 0:
        raise ValueError("d, m, l and C must be positive")
    return math.sqrt(C * d * (d + 1) * math.log(d) / (m * l))


def shots_for_lambda(d: int, m: int, lam: float, C: float) -> int:
    """Smallest integer ``l`` with ``noise_bound_lambda(d, m, l, C) <= lam``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return int(math.ceil(C * d * (d + 1) * math.log(d) / (m * lam**2)))
