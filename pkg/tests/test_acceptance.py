"""Acceptance criteria 1-8.

Run with ``pytest tests/test_acceptance.py -v`` (a PASS/FAIL line per
criterion is printed in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import functools
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402

from rgdtomo import baselines, bounds, pauli, rgd, sensing, simulator  # noqa: E402
from rgdtomo.factor import RankRFactor  # noqa: E402
from rgdtomo.metrics import metrics  # noqa: E402

SEEDS = range(5)
SHOTS = 8192


def ensemble_seed(s: int) -> int:
    return 1000 + s


def shot_seed(s: int) -> int:
    return 2000 + s


def _rel(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(np.asarray(a) - b) / (nb if nb > 0 else 1.0))


def _report(n: int, ok: bool, text: str) -> tuple[bool, str]:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"
    ACCEPTANCE_LINES[str(n)] = line
    print(line)
    return ok, line


def _dense_adjoint(e, y):
    return math.sqrt(e.dim / e.m) * sum(v * pauli.kron_dense(l) for v, l in zip(y, e.labels))


def _dense_ht(M, r):
    w, V = np.linalg.eigh(M)
    idx = np.argsort(-np.abs(w), kind="stable")[:r]
    return (V[:, idx] * w[idx]) @ V[:, idx].conj().T


@functools.cache
def check_1() -> tuple[bool, str]:
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = {"pauli_action": 0.0, "expectation": 0.0, "forward": 0.0, "adjoint": 0.0,
             "tangent": 0.0, "retract": 0.0}
    for k in (1, 2, 3):
        d = 2**k
        for label in pauli.enumerate_all(k):
            P = pauli.kron_dense(label)
            c = pauli.compile_label(label)
            V = rng.standard_normal((d, 2)) + 1j * rng.standard_normal((d, 2))
            worst["pauli_action"] = max(worst["pauli_action"], _rel(pauli.apply(c, V), P @ V))
            U, _ = np.linalg.qr(rng.standard_normal((d, 2)) + 1j * rng.standard_normal((d, 2)))
            lam = np.array([0.6, 0.4])
            want = np.trace(P @ ((U * lam) @ U.conj().T)).real
            got = pauli.expectation(c, U, lam)
            worst["expectation"] = max(worst["expectation"], abs(got - want) / max(abs(want), 1.0))
        for m in (5, 4**k, 3 * 4**k):
            e = sensing.sample_ensemble(k, m, seed=10 * k + m)
            G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            X = 0.5 * (G + G.conj().T)
            fwd = np.array([math.sqrt(d / m) * np.trace(pauli.kron_dense(l) @ X).real for l in e.labels])
            worst["forward"] = max(worst["forward"], _rel(sensing.forward(e, X), fwd))
            y = rng.standard_normal(m)
            worst["adjoint"] = max(worst["adjoint"], _rel(sensing.adjoint(e, y), _dense_adjoint(e, y)))
            for r in range(1, min(d, 3) + 1):
                F = sensing.random_lowrank_hermitian(d, r, rng)
                Pu = F.U @ F.U.conj().T
                T = rgd.tangent_project(F, X)
                worst["tangent"] = max(worst["tangent"], _rel(T.dense(), Pu @ X + X @ Pu - Pu @ X @ Pu))
                alpha = float(rng.uniform(0.1, 1.5))
                Xn = rgd.retract(F, T, alpha, r)
                worst["retract"] = max(worst["retract"],
                                       _rel(Xn.dense(), _dense_ht(F.dense() + alpha * T.dense(), r)))
    runtime = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-10 and runtime < 10
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    return _report(1, ok, f"oracle equivalence k<=3, max rel err {detail} (tol 1e-10); {runtime:.2f}s (<10s)")


@functools.cache
def check_2() -> tuple[bool, str]:
    e = sensing.complete_ensemble(2)
    rng = np.random.default_rng(2)
    # A^dagger A on every Pauli basis element and on random Hermitian matrices
    ata = 0.0
    for l in pauli.enumerate_all(2):
        P = pauli.kron_dense(l)
        ata = max(ata, float(np.max(np.abs(sensing.adjoint(e, sensing.forward(e, P)) - P))))
    norm_dev = 0.0
    alpha_dev = 0.0
    for _ in range(20):
        G = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        X = 0.5 * (G + G.conj().T)
        ata = max(ata, float(np.max(np.abs(sensing.adjoint(e, sensing.forward(e, X)) - X))))
        norm_dev = max(norm_dev, abs(np.linalg.norm(sensing.forward(e, X)) - np.linalg.norm(X)))
        F = sensing.random_lowrank_hermitian(4, 1, rng)
        a = rgd.step_size(e, rgd.tangent_project(F, X))
        alpha_dev = max(alpha_dev, abs(a - 1.0))
    ok = ata <= 1e-12 and norm_dev <= 1e-12 and alpha_dev <= 1e-12
    return _report(2, ok, f"complete basis k=2: |A*A X - X|max={ata:.1e}, "
                          f"| ||AX|| - ||X||_F |={norm_dev:.1e}, |alpha-1|={alpha_dev:.1e} (tol 1e-12)")


@functools.cache
def check_3() -> tuple[bool, str]:
    t0 = time.perf_counter()
    state = simulator.make_state("hadamard", 6)
    e = sensing.sample_ensemble(6, 819, seed=ensemble_seed(0))
    y = simulator.build_measurement(state, e, exact=True).y
    res = rgd.solve(y, e, rgd.SolverOptions(r=1, max_iters=50), truth=state)
    runtime = time.perf_counter() - t0
    err = np.array(res.trace.frob_err_sq)
    hit = res.trace.first_below(1e-8)
    floor = 1e-13
    idx = [i for i in range(2, min(11, len(err))) if err[i] > floor]
    if len(idx) >= 2:
        window = f"iterations {idx[0]}-{idx[-1]}"
    else:
        # the error reached round-off before iteration 2; fit the realized decay instead
        stop = next((i for i, v in enumerate(err) if v <= floor), len(err) - 1)
        idx = list(range(0, stop + 1))
        window = f"iterations 0-{stop} (error at round-off {err[stop]:.1e} by iteration {stop}, window 2-10 empty)"
    slope = float(np.polyfit(idx, np.log(np.maximum(err[idx], 1e-300)), 1)[0]) if len(idx) >= 2 else math.nan
    ok = hit is not None and hit <= 50 and slope <= math.log(0.7) and runtime < 30
    return _report(3, ok, f"Hadamard(6) m=819 exact: err^2<1e-8 at iteration {hit} (<=50); "
                          f"slope {slope:.3g} over {window} (<= log0.7={math.log(0.7):.3f}); "
                          f"{runtime:.2f}s (<30s)")


def _noisy_run(kind: str, k: int, m: int, s: int):
    state = simulator.make_state(kind, k)
    e = sensing.sample_ensemble(k, m, seed=ensemble_seed(s))
    data = simulator.build_measurement(state, e, l=SHOTS, seed=shot_seed(s))
    return state, e, data


@functools.cache
def check_4() -> tuple[bool, str]:
    t0 = time.perf_counter()
    errs = []
    for s in SEEDS:
        state, e, data = _noisy_run("ghz", 6, 1638, s)
        res = rgd.solve(data.y, e, rgd.SolverOptions(r=1), truth=state)
        errs.append(metrics(res.estimate, state)["frob_err_sq"])
    med = float(np.median(errs))
    runtime = time.perf_counter() - t0
    smoke = []
    for kind, m in (("hadamard", 13107), ("ghz", 26214)):
        state, e, data = _noisy_run(kind, 8, m, 0)
        res = rgd.solve(data.y, e, rgd.SolverOptions(r=1), truth=state)
        smoke.append(f"{kind}(8) m={m}: {res.iterations} it, err^2={res.trace.frob_err_sq[-1]:.1e}")
    ok = 0.005 <= med <= 0.06 and runtime < 300
    return _report(4, ok, f"GHZ(6) m=1638 l=8192, 5 seeds: median terminal ||X-rho||_F^2={med:.2e} "
                          f"(band [0.005, 0.06]; unsquared ||X-rho||_F={math.sqrt(med):.3f}); "
                          f"{runtime:.1f}s (<300s); smoke completed: " + "; ".join(smoke))


@functools.cache
def check_5() -> tuple[bool, str]:
    t0 = time.perf_counter()
    target = 0.05
    failures = []
    rows = []
    for s in SEEDS:
        state, e, data = _noisy_run("hadamard", 6, 819, s)
        x0 = rgd.init(data.y, e, 1)
        rgd_hit = rgd.solve(data.y, e, rgd.SolverOptions(r=1), truth=state, x0=x0).trace.first_below(target)
        mif = {}
        for mu in baselines.MU_GRID:
            b = baselines.mifgd_solve(data.y, e, 1, 0.01, mu, 400, truth=state, x0=x0)
            mif[mu] = b.trace.first_below(target)
        rows.append(f"seed {s}: RGD {rgd_hit} vs MIFGD {[mif[mu] for mu in baselines.MU_GRID]}")
        for mu, h in mif.items():
            if rgd_hit is None or (h is not None and h <= rgd_hit):
                failures.append((s, mu))
    runtime = time.perf_counter() - t0
    ok = not failures
    return _report(5, ok, f"iterations to ||X-rho||_F^2<=0.05, Hadamard(6) m=819 l=8192 eta=0.01, "
                          f"mu in {{1/8,1/4,1/3,1/2,3/4}}; " + "; ".join(rows)
                   + f"; RGD strictly faster in {25 - len(failures)}/25 pairs; {runtime:.1f}s")


@functools.cache
def check_6() -> tuple[bool, str]:
    a_ref = [0.3259, 0.3599, 0.3807, 0.3945]
    b_ref = [0.6157, 0.6057, 0.5967, 0.5887, 0.5817, 0.5757]
    ia = bounds.case_inputs(0.2)
    ga = bounds.gamma_recursion(ia, 4).gammas
    gb = bounds.gamma_recursion(bounds.case_inputs(0.1), 6).gammas
    a4 = bounds.a_certificate(ia, ga, 4, 0.45)
    dev = max(max(abs(x - y) for x, y in zip(ga, a_ref)), max(abs(x - y) for x, y in zip(gb, b_ref)))
    ok = dev <= 5e-4 and abs(a4 - 0.4486) <= 5e-4
    fmt = lambda g: ", ".join(f"{x:.4f}" for x in g)  # noqa: E731
    return _report(6, ok, f"gamma (phi=1/5) [{fmt(ga)}], gamma (phi=1/10) [{fmt(gb)}], max dev {dev:.1e}; "
                          f"A_4={a4:.4f} (0.4486 +- 5e-4)")


@functools.cache
def check_7() -> tuple[bool, str]:
    t0 = time.perf_counter()
    k, m, C, lam = 4, 256, 2.0, 0.3
    d = 2**k
    l = simulator.shots_for_lambda(d, m, lam, C)
    state = simulator.make_state("random_kappa", k, r=2, kappa=2.0, seed=7)
    exceed = 0
    norms = []
    trials = 50
    for t in range(trials):
        e = sensing.sample_ensemble(k, m, seed=3000 + t)
        data = simulator.build_measurement(state, e, l=l, seed=4000 + t)
        z = data.y - sensing.forward(e, state.factor())
        nrm = float(np.max(np.abs(np.linalg.eigvalsh(sensing.adjoint(e, z)))))
        norms.append(nrm)
        exceed += nrm > lam
    runtime = time.perf_counter() - t0
    rate = exceed / trials
    ok = rate <= 0.10 and runtime < 60
    return _report(7, ok, f"k=4 m=256 C=2 lambda=0.3 -> l={l}; exceedance {exceed}/{trials}={rate:.0%} (<=10%), "
                          f"max ||A*(z)||={max(norms):.3f}; {runtime:.1f}s (<60s)")


@functools.cache
def check_8() -> tuple[bool, str]:
    # step-size bound invariant with the exact isometry constant of small ensembles
    rng = np.random.default_rng(8)
    checked = violations = 0
    for k in (1, 2):
        for seed in range(40):
            e = sensing.sample_ensemble(k, 8 * 4**k, seed=seed)
            delta = sensing.full_rank_isometry_constant(e)
            if delta >= 1:
                continue
            lo, hi = bounds.step_size_bounds(delta)
            d = 2**k
            for _ in range(5):
                X = sensing.random_lowrank_hermitian(d, 1, rng)
                G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
                a = rgd.step_size(e, rgd.tangent_project(X, 0.5 * (G + G.conj().T)))
                checked += 1
                violations += not (lo - 1e-12 <= a <= hi + 1e-12)
    subs = {n: f()[0] for n, f in ((2, check_2), (3, check_3), (6, check_6))}
    ok = violations == 0 and checked > 0 and all(subs.values())
    return _report(8, ok, f"certified rate covered by substitutes: step-size bound "
                          f"{checked - violations}/{checked} within [1/(1+d),1/(1-d)]; "
                          f"criteria 2/3/6 {['FAIL', 'PASS'][subs[2]]}/{['FAIL', 'PASS'][subs[3]]}/"
                          f"{['FAIL', 'PASS'][subs[6]]}")


def test_criterion_1_oracle_equivalence():
    ok, line = check_1()
    assert ok, line


def test_criterion_2_complete_basis():
    ok, line = check_2()
    assert ok, line


def test_criterion_3_noiseless_convergence():
    ok, line = check_3()
    assert ok, line


def test_criterion_4_shot_noise_floor():
    ok, line = check_4()
    assert ok, line


def test_criterion_5_baseline_ordering():
    ok, line = check_5()
    assert ok, line


def test_criterion_6_bound_values():
    ok, line = check_6()
    assert ok, line


def test_criterion_7_noise_bound_monte_carlo():
    ok, line = check_7()
    assert ok, line


def test_criterion_8_property_substitutes():
    ok, line = check_8()
    assert ok, line


if __name__ == "__main__":
    results = [f()[0] for f in (check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8)]
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
