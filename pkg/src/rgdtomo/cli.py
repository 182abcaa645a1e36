"""Command-line entry point ``rgdtomo``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure
(flagged divergence), 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import baselines, bounds, harness, rgd, sensing, simulator
from .harness import ConfigError, NumericalFailure
from .metrics import metrics

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def _truth(data: simulator.MeasurementVector):
    return simulator.state_from_record(data.state) if data.state else None


def cmd_simulate(args) -> int:
    cfg = _config(args)
    seeds = cfg.derived_seeds()
    state = simulator.make_state(cfg.state, cfg.k, r=cfg.r, kappa=cfg.kappa, seed=seeds["state"])
    ens = sensing.sample_ensemble(cfg.k, cfg.m, seed=seeds["ensemble"], replace=cfg.replace)
    if cfg.shots is None:
        data = simulator.build_measurement(state, ens, exact=True, seed=seeds["shots"])
    else:
        data = simulator.build_measurement(state, ens, l=cfg.shots, seed=seeds["shots"])
    data.meta["seeds"] = seeds
    data.save(args.out)
    print(f"wrote {args.out} (m={ens.m}, sha256={ens.digest()[:12]})")
    return EXIT_OK


def cmd_solve(args) -> int:
    data = simulator.MeasurementVector.load(args.dataset)
    truth = _truth(data)
    opts = rgd.SolverOptions(r=args.rank, max_iters=args.max_iters, stop_tol=args.stop_tol)
    res = rgd.solve(data.y, data.ensemble, opts, truth=truth)
    harness.write_trace_csv(res.trace, args.out, include_timing=not args.no_timing)
    line = f"iterations={res.iterations} stop={res.trace.stop_reason}"
    if truth is not None:
        line += f" frob_err_sq={metrics(res.estimate, truth)['frob_err_sq']:.3e}"
    print(line)
    return EXIT_OK


def cmd_baseline(args) -> int:
    data = simulator.MeasurementVector.load(args.dataset)
    truth = _truth(data)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    x0 = rgd.init(data.y, data.ensemble, args.rank)
    failed = []
    for mu in args.mu:
        b = baselines.mifgd_solve(data.y, data.ensemble, args.rank, args.eta, mu, args.iters,
                                  truth=truth, x0=x0)
        sub = outdir / f"mu_{mu:.6g}"
        sub.mkdir(exist_ok=True)
        harness.write_trace_csv(b.trace, sub / "trace.csv", include_timing=not args.no_timing)
        print(f"mu={mu:.6g} iterations={b.iterations} diverged={b.diverged}")
        if b.diverged:
            failed.append(mu)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_bound(args) -> int:
    inputs = bounds.BoundInputs(r=args.r, sigma_1=args.sigma_1, sigma_r=args.sigma_r, lam=args.lam,
                                delta_2r=args.delta_2r, delta_3r=args.delta_3r,
                                rho_frob=args.rho_frob, x0_err=args.x0_err)
    rec = bounds.gamma_recursion(inputs, args.steps)
    out = {"inputs": inputs.to_dict(), "gammas": rec.gammas, "mus": rec.mus,
           "gamma_bar": rec.gamma_bar}
    gbar = args.gamma_bar if args.gamma_bar is not None else rec.gamma_bar
    if gbar is not None:
        out["series"] = [bounds.error_bound_series(inputs, gbar, k) for k in range(args.steps)]
        out["asymptote"] = bounds.noise_floor(inputs, gbar)
        if inputs.lam > 0 or args.eps:
            out["iteration_estimate"] = bounds.iteration_estimate(
                inputs, gbar, args.C0, args.C1, args.C2, eps=args.eps)
    print(json.dumps(out, indent=1))
    return EXIT_OK


def cmd_rip_probe(args) -> int:
    if args.ensemble:
        ens = sensing.SensingEnsemble.load(args.ensemble)
    else:
        if args.k is None or args.m is None:
            raise ConfigError("give --ensemble or both -k and -m")
        ens = sensing.sample_ensemble(args.k, args.m, seed=args.seed)
    res = sensing.rip_probe(ens, args.rank, args.trials, seed=args.seed)
    print(json.dumps({"rank": res.rank, "delta_hat": res.delta_hat, "trials": len(res.samples),
                      "ensemble_sha256": ens.digest()}))
    return EXIT_OK


def cmd_bench(args) -> int:
    qubits = (6,) if args.quick else (6, 8)
    iters = 100 if args.quick else args.baseline_iters
    root = Path(args.out) if args.out else harness.default_output_root()
    status = EXIT_OK
    for cfg in harness.bench_configs(seed=args.seed, qubits=qubits, baseline_iters=iters):
        try:
            d = harness.run_experiment(cfg, out_root=root)
        except NumericalFailure as exc:
            print(f"warning: {exc}", file=sys.stderr)
            status = EXIT_NUMERICAL
            continue
        summary = json.loads((d / "summary.json").read_text())
        err = summary["runs"]["RGD"]["metrics"]["frob_err_sq"]
        print(f"{d.name}: RGD iterations={summary['runs']['RGD']['iterations']} "
              f"frob_err_sq={err:.3e}")
    return status


def cmd_run(args) -> int:
    cfg = _config(args)
    d = harness.run_experiment(cfg)
    print(d)
    return EXIT_OK


def cmd_decode(args) -> int:
    data = simulator.load_counts_file(args.counts)
    if args.convention:
        rec = json.loads(Path(args.counts).read_text())
        rec["convention"] = args.convention
        data = simulator.counts_record_to_measurement(rec)
    data.save(args.out)
    print(f"wrote {args.out} (m={data.ensemble.m})")
    return EXIT_OK


def _config(args) -> harness.ExperimentConfig:
    if args.config:
        return harness.load_config(args.config, seed=args.seed)
    cfg = harness.ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rgdtomo", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="state + ensemble -> dataset JSON")
    s.add_argument("config", nargs="?")
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--out", default="dataset.json")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("run", help="full experiment from a config file")
    s.add_argument("config")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("solve", help="dataset -> RGD trace CSV")
    s.add_argument("dataset")
    s.add_argument("-r", "--rank", type=int, default=1)
    s.add_argument("--max-iters", type=int, default=300)
    s.add_argument("--stop-tol", type=float, default=1e-7)
    s.add_argument("--no-timing", action="store_true")
    s.add_argument("-o", "--out", default="rgd_trace.csv")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("baseline", help="dataset -> MIFGD trace CSVs")
    s.add_argument("dataset")
    s.add_argument("-r", "--rank", type=int, default=1)
    s.add_argument("--eta", type=float, default=0.01)
    s.add_argument("--mu", type=float, nargs="+", default=list(baselines.MU_GRID))
    s.add_argument("--iters", type=int, default=300)
    s.add_argument("--no-timing", action="store_true")
    s.add_argument("-o", "--out", default="baselines")
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("bound", help="contraction recursion and error series")
    s.add_argument("--r", type=int, default=1)
    s.add_argument("--sigma-1", type=float, default=1.0)
    s.add_argument("--sigma-r", type=float, default=1.0)
    s.add_argument("--lam", type=float, required=True)
    s.add_argument("--delta-2r", type=float, required=True)
    s.add_argument("--delta-3r", type=float, required=True)
    s.add_argument("--rho-frob", type=float, default=1.0)
    s.add_argument("--x0-err", type=float, default=0.0)
    s.add_argument("--steps", type=int, default=10)
    s.add_argument("--gamma-bar", type=float)
    s.add_argument("--eps", type=float)
    s.add_argument("--C0", type=float, default=1.0)
    s.add_argument("--C1", type=float, default=4.0)
    s.add_argument("--C2", type=float, default=8.0)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("rip-probe", help="empirical restricted isometry constant")
    s.add_argument("--ensemble")
    s.add_argument("-k", type=int)
    s.add_argument("-m", type=int)
    s.add_argument("-r", "--rank", type=int, default=1)
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_rip_probe)

    s = sub.add_parser("bench", help="Hadamard/GHZ benchmark on 6 and 8 qubits")
    s.add_argument("--quick", action="store_true", help="6 qubits only, 100 baseline iterations")
    s.add_argument("--baseline-iters", type=int, default=300)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("decode", help="counts file -> dataset JSON")
    s.add_argument("counts")
    s.add_argument("--convention", choices=simulator.CONVENTIONS)
    s.add_argument("-o", "--out", default="dataset.json")
    s.set_defaults(func=cmd_decode)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
