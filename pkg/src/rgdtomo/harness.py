"""Experiment orchestration, configuration and persistence.

Config files are flat ``key = value`` text (``#`` starts a comment)::

    state = hadamard        # hadamard | ghz | random_kappa
    k = 6
    m = 819
    shots = 8192            # or "exact"
    exact_reference = true  # also run RGD on exact data
    eta = 0.01
    mu_list = 0.125, 0.25, 0.3333333333333333, 0.5, 0.75
    seed = 0

See :class:`ExperimentConfig` for every key.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, baselines, bounds, rgd, sensing, simulator
from .metrics import metrics

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "RGDTOMO_OUTPUT_ROOT"


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


@dataclass
class ExperimentConfig:
    state: str = "hadamard"
    k: int = 6
    r: int = 1
    kappa: float = 1.0
    state_seed: int | None = None
    m: int = 819
    shots: int | None = 8192  # None means exact expectations
    exact_reference: bool = False
    replace: bool = True
    rank: int | None = None  # solver rank; defaults to r
    max_iters: int = 300
    stop_tol: float = 1e-7
    objective_floor: float = 1e-14
    eta: float = 0.01
    mu_list: tuple[float, ...] = baselines.MU_GRID
    baseline_iters: int = 300
    rip_trials: int = 20
    noise_C: float = 2.0
    output_dir: str | None = None
    name: str | None = None
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.state not in simulator.STATE_KINDS:
            raise ConfigError(f"state must be one of {simulator.STATE_KINDS}, got {self.state!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 1 <= self.m <= 4**self.k:
            raise ConfigError(f"m must lie in [1, 4**k = {4**self.k}], got {self.m}")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be >= 1 or 'exact'")
        if self.r < 1 or self.r > 2**self.k:
            raise ConfigError("r out of range")
        if self.kappa < 1:
            raise ConfigError("kappa must be >= 1")
        if self.solver_rank < 1:
            raise ConfigError("rank must be >= 1")
        if self.max_iters < 1 or self.stop_tol <= 0:
            raise ConfigError("max_iters must be >= 1 and stop_tol > 0")
        if self.eta <= 0 or any(not 0 <= mu < 1 for mu in self.mu_list):
            raise ConfigError("eta must be > 0 and every mu in [0, 1)")
        if self.baseline_iters < 0 or self.rip_trials < 0:
            raise ConfigError("baseline_iters and rip_trials must be >= 0")

    @property
    def solver_rank(self) -> int:
        return self.rank if self.rank is not None else self.r

    def derived_seeds(self) -> dict:
        """Ensemble, shot and state seeds spawned from the global seed."""
        ens_seed, shot_seed, state_seed, probe_seed = (
            int(s) for s in np.random.SeedSequence(self.seed).generate_state(4))
        return {
            "global": self.seed,
            "ensemble": ens_seed,
            "shots": shot_seed,
            "state": self.state_seed if self.state_seed is not None else state_seed,
            "rip_probe": probe_seed,
        }

    def run_name(self) -> str:
        if self.name:
            return self.name
        data = "exact" if self.shots is None else f"l{self.shots}"
        return f"{self.state}{self.k}_m{self.m}_{data}_seed{self.seed}"

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                if f.name == "shots":
                    lines.append("shots = exact")
                continue
            if isinstance(v, (tuple, list)):
                v = ", ".join(repr(float(x)) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _parse_value(name: str, raw: str):
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    if name not in fields:
        raise ConfigError(f"unknown config key {name!r}")
    raw = raw.strip()
    try:
        if name == "shots":
            return None if raw.lower() == "exact" else int(raw)
        if name == "mu_list":
            return tuple(float(_fraction(x)) for x in raw.split(",") if x.strip())
        if name in ("state", "output_dir", "name"):
            return raw
        if name in ("exact_reference", "replace"):
            return _BOOL[raw.lower()]
        if name in ("kappa", "stop_tol", "objective_floor", "eta", "noise_C"):
            return float(raw)
        if name in ("state_seed", "rank") and raw.lower() in ("none", ""):
            return None
        return int(raw)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def _fraction(s: str) -> float:
    s = s.strip()
    if "/" in s:
        num, den = s.split("/", 1)
        return float(num) / float(den)
    return float(s)


def parse_config_text(text: str, **overrides) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = key.strip()
        values[key] = _parse_value(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), **overrides)


def _fmt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_trace_csv(trace: rgd.SolverTrace, path: str | Path, include_timing: bool = True) -> None:
    """Columns ``iter, objective, step_size[, frob_err_sq][, wall_ms]`` with a header row."""
    has_err = len(trace.frob_err_sq) == len(trace.objective) and len(trace.objective) > 0
    header = ["iter", "objective", "step_size"]
    if has_err:
        header.append("frob_err_sq")
    if include_timing:
        header.append("wall_ms")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(trace.objective)):
            row = [str(i), _fmt(trace.objective[i]), _fmt(trace.step_size[i])]
            if has_err:
                row.append(_fmt(trace.frob_err_sq[i]))
            if include_timing:
                row.append(f"{trace.wall_ms[i]:.3f}")
            w.writerow(row)


def read_trace_csv(path: str | Path) -> dict[str, list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = rows[0].keys() if rows else []
    return {c: [float(r[c]) if r[c] != "" else math.nan for r in rows] for c in cols}


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n")


def _bound_report(cfg: ExperimentConfig, state: simulator.DensityState, ens: sensing.SensingEnsemble,
                  data: simulator.MeasurementVector, x0, seeds: dict) -> dict:
    """Plug measured quantities into the bound calculators."""
    d = state.dim
    r = cfg.solver_rank
    z = data.y - sensing.forward(ens, state.factor())
    noise_spec = float(np.max(np.abs(np.linalg.eigvalsh(sensing.adjoint(ens, z)))))
    report = {"noise_spectral_norm": noise_spec}
    if cfg.shots is not None:
        report["lambda_formula"] = simulator.noise_bound_lambda(d, cfg.m, cfg.shots, cfg.noise_C)
        report["lambda_formula_C"] = cfg.noise_C
    if cfg.rip_trials:
        probe_seed = seeds["rip_probe"]
        d2 = sensing.rip_probe(ens, min(2 * r, d), cfg.rip_trials, seed=probe_seed).delta_hat
        d3 = sensing.rip_probe(ens, min(3 * r, d), cfg.rip_trials, seed=probe_seed + 1).delta_hat
        report.update(delta_hat_2r=d2, delta_hat_3r=d3)
        if d2 < 1 and d3 < 1:
            lam = state.lambdas
            inputs = bounds.BoundInputs(
                r=state.rank, sigma_1=float(lam[0]), sigma_r=float(lam[-1]), lam=noise_spec,
                delta_2r=min(d2, d3), delta_3r=max(d2, d3),
                rho_frob=float(np.linalg.norm(lam)), x0_err=metrics(x0, state)["frob_err"])
            rec = bounds.gamma_recursion(inputs, 10)
            report["bound_inputs"] = inputs.to_dict()
            report["init_error_bound"] = bounds.init_error_bound(inputs)
            report["gammas"] = rec.gammas
            report["gamma_bar"] = rec.gamma_bar
            if rec.gamma_bar is not None:
                report["error_bound_asymptote"] = bounds.noise_floor(inputs, rec.gamma_bar)
    return report


def run_experiment(cfg: ExperimentConfig, out_root: str | Path | None = None) -> Path:
    """Run one tomography experiment and write its artifacts.

    Layout::

        <dir>/config.txt, ensemble.json, dataset.json, rgd_trace.csv,
        exact_rgd_trace.csv (if requested), baselines/mu_<mu>/trace.csv,
        summary.json

    Trace CSVs omit the wall-clock column so reruns are byte-identical;
    timings go to ``summary.json``.
    """
    cfg.validate()
    root = Path(cfg.output_dir) if cfg.output_dir else Path(out_root or default_output_root())
    outdir = root / cfg.run_name()
    outdir.mkdir(parents=True, exist_ok=True)
    seeds = cfg.derived_seeds()
    timings: dict[str, float] = {}

    state = simulator.make_state(cfg.state, cfg.k, r=cfg.r, kappa=cfg.kappa, seed=seeds["state"])
    ens = sensing.sample_ensemble(cfg.k, cfg.m, seed=seeds["ensemble"], replace=cfg.replace)
    t = time.perf_counter()
    if cfg.shots is None:
        data = simulator.build_measurement(state, ens, exact=True, seed=seeds["shots"])
    else:
        data = simulator.build_measurement(state, ens, l=cfg.shots, seed=seeds["shots"])
    timings["simulate_s"] = time.perf_counter() - t

    (outdir / "config.txt").write_text(cfg.to_text())
    ens.save(outdir / "ensemble.json")
    data.save(outdir / "dataset.json")

    opts = rgd.SolverOptions(r=cfg.solver_rank, max_iters=cfg.max_iters, stop_tol=cfg.stop_tol,
                             objective_floor=cfg.objective_floor)
    x0 = rgd.init(data.y, ens, cfg.solver_rank)
    runs = {}

    t = time.perf_counter()
    res = rgd.solve(data.y, ens, opts, truth=state, x0=x0)
    timings["rgd_s"] = time.perf_counter() - t
    write_trace_csv(res.trace, outdir / "rgd_trace.csv", include_timing=False)
    runs["RGD"] = {"iterations": res.iterations, "stop_reason": res.trace.stop_reason,
                   "flags": res.trace.flags, "metrics": metrics(res.estimate, state),
                   "trace": "rgd_trace.csv"}

    if cfg.exact_reference and cfg.shots is not None:
        exact = simulator.build_measurement(state, ens, exact=True)
        t = time.perf_counter()
        res_e = rgd.solve(exact.y, ens, opts, truth=state)
        timings["exact_rgd_s"] = time.perf_counter() - t
        write_trace_csv(res_e.trace, outdir / "exact_rgd_trace.csv", include_timing=False)
        runs["ExactRGD"] = {"iterations": res_e.iterations, "stop_reason": res_e.trace.stop_reason,
                            "flags": res_e.trace.flags, "metrics": metrics(res_e.estimate, state),
                            "trace": "exact_rgd_trace.csv"}

    diverged = []
    for mu in cfg.mu_list:
        sub = outdir / "baselines" / f"mu_{mu:.6g}"
        sub.mkdir(parents=True, exist_ok=True)
        t = time.perf_counter()
        b = baselines.mifgd_solve(data.y, ens, cfg.solver_rank, cfg.eta, mu, cfg.baseline_iters,
                                  truth=state, x0=x0)
        timings[f"mifgd_mu_{mu:.6g}_s"] = time.perf_counter() - t
        write_trace_csv(b.trace, sub / "trace.csv", include_timing=False)
        runs[f"MIFGD mu={mu:.6g}"] = {"iterations": b.iterations, "diverged": b.diverged,
                                     "flags": b.trace.flags, "mu": mu, "eta": cfg.eta,
                                     "update_rule": "heavy-ball projected factored gradient",
                                     "metrics": metrics(b.estimate, state),
                                     "trace": str(Path("baselines") / f"mu_{mu:.6g}" / "trace.csv")}
        if b.diverged:
            diverged.append(mu)

    summary = {
        "config": dataclasses.asdict(cfg),
        "seeds": seeds,
        "ensemble_sha256": ens.digest(),
        "state": state.to_record(),
        "runs": runs,
        "bounds": _bound_report(cfg, state, ens, data, x0, seeds),
        "timings": timings,
        "versions": {"rgdtomo": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
    }
    write_json(summary, outdir / "summary.json")
    log.info("wrote %s", outdir)
    if diverged:
        raise NumericalFailure(f"baseline diverged for mu in {diverged}; artifacts in {outdir}")
    return outdir


BENCH_RUNS = (
    ("hadamard", 6, 819),
    ("ghz", 6, 1638),
    ("hadamard", 8, 13107),
    ("ghz", 8, 26214),
)


def bench_configs(seed: int = 0, qubits: tuple[int, ...] = (6, 8), baseline_iters: int = 300,
                  shots: int = 8192) -> list[ExperimentConfig]:
    """The four Hadamard/GHZ runs (6 and 8 qubits) with ExactRGD references."""
    return [ExperimentConfig(state=s, k=k, m=m, shots=shots, exact_reference=True,
                             baseline_iters=baseline_iters, seed=seed)
            for s, k, m in BENCH_RUNS if k in qubits]
