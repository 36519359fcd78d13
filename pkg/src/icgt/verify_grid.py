"""The ``check`` subcommand: run the numerical verification suite over a
grid of graphs and parameters, print one line per check, and write a CSV of
the measured norms/residuals."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .algorithms import AlgParams, icgt_step, init_state, RunTrace
from .channels import prob_quant
from .config import ExperimentConfig
from .graphs import build_topology, metropolis_weights
from .objectives import GradientOracle, random_quadratic
from .rng import substream
from .verification import (averaging_noise_mc, error_propagator, matrix_power_brute,
                           operator_norm, power_difference_max_norm, propagator_power,
                           recursion_residual, verify_contraction,
                           windowed_recursion_check)


def _grid_mixings(level: str):
    combos = []
    if level == "small":
        specs = [("ring", 5), ("star", 5), ("complete", 5)]
    else:
        specs = [(kind, n) for kind in ("ring", "star", "complete", "erdos_renyi")
                 for n in (3, 5, 8, 10)]
    for kind, n in specs:
        top = build_topology(kind, n, er_prob=0.5, seed=11)
        combos.append((f"{kind}-{n}", metropolis_weights(top)))
    return combos


def run_check_grid(level: str, out_dir: Path) -> bool:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = ["check,case,value,threshold,pass"]
    all_ok = True

    def report(check: str, case: str, value: float, threshold: float, ok: bool):
        nonlocal all_ok
        all_ok = all_ok and ok
        rows.append(f"{check},{case},{value!r},{threshold!r},{int(ok)}")
        print(f"[{'ok' if ok else 'FAIL'}] {check:<24} {case:<18} "
              f"value={value:.3e} threshold={threshold:.3e}")

    gammas = (0.05, 0.1, 0.2) if level == "full" else (0.1,)
    mixings = _grid_mixings(level)

    for case, mixing in mixings:
        for gamma in gammas:
            cert = verify_contraction(mixing.W, d=1, gamma=gamma)
            report("contraction", f"{case}-g{gamma}", cert.norm_sq, 1.0 / 16.0, cert.passed)

    for case, mixing in mixings[:3]:
        prop = error_propagator(mixing.W, d=2, gamma=0.1)
        for tau in (2, 5, 13):
            diff = np.abs(propagator_power(mixing.W, 2, 0.1, tau)
                          - matrix_power_brute(prop.full, tau)).max()
            report("closed-form-power", f"{case}-t{tau}", diff, 1e-10, diff <= 1e-10)
        lam2 = mixing.lambda2
        norm = operator_norm(np.linalg.matrix_power(prop.A, 7))
        expected = (1 - 0.1 * (1 - lam2)) ** 7
        report("norm-identity", case, abs(norm - expected), 1e-10,
               abs(norm - expected) <= 1e-10)

    i_max = 200 if level == "full" else 60
    for case, mixing in mixings[:3]:
        worst = power_difference_max_norm(mixing.W, d=1, gamma=0.1, i_max=i_max)
        report("power-difference", case, worst, 4.0, worst <= 4.0)

    # stacked-error recursion residual on a recorded quantizer trace
    cfg = ExperimentConfig()
    top = build_topology("ring", 5, seed=3)
    mixing = metropolis_weights(top)
    objective = random_quadratic(5, 2, seed=4)
    oracle = GradientOracle(mode="exact")
    params = AlgParams(variant="icgt", alpha=0.05, gamma=0.15, shared_noise=True)
    ch = prob_quant(4, seed=9, tag="chx")
    trace = RunTrace(alpha=params.alpha, gamma=params.gamma)
    state = init_state(params, np.zeros((5, 2)), oracle, objective)
    steps = 100 if level == "full" else 40
    for _ in range(steps):
        state = icgt_step(state, mixing, ch, ch, params, oracle, objective, trace)
    rep = recursion_residual(trace, mixing.W)
    tol = 1e-9 * (1.0 + rep.max_psi_norm)
    report("recursion-residual", f"ring-5-q4-{steps}", rep.max_residual, tol,
           rep.max_residual <= tol)

    # windowed scalar recursion envelope, random instances
    n_inst = 100 if level == "full" else 25
    rng = substream(17, "check-recursion")
    worst_ok = True
    for _ in range(n_inst):
        rho_p = float(rng.uniform(0.01, 0.25))
        tau = int(rng.integers(1, 11))
        T = 20 * tau
        chk = windowed_recursion_check(
            rho_prime=rho_p, rho_dprime=float(rng.uniform(0.5, 4.0)),
            b=rho_p / 4.0, c=float(rng.uniform(0, 2)), r=float(rng.uniform(0, 2)),
            tau=tau, e=rng.uniform(0, 1, T + 1), T=T, a0=float(rng.uniform(0, 5)))
        worst_ok = worst_ok and chk.passed
    report("windowed-recursion", f"{n_inst}-instances", float(worst_ok), 1.0, worst_ok)

    # averaging noise floor
    trials = 2000 if level == "full" else 1000
    x0 = substream(5, "check-x0").standard_normal((5, 2))
    mc = averaging_noise_mc(metropolis_weights(build_topology("ring", 5, seed=3)).W,
                            d=2, gamma=0.1, sigma_c=0.2, x0=x0, K=80,
                            trials=trials, seed=21)
    margin = float(np.max(mc.empirical - mc.bound - 3 * mc.sem))
    report("averaging-floor", f"ring-5-{trials}t", margin, 0.0, mc.passed)

    (out_dir / "check_report.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"{'all checks passed' if all_ok else 'CHECK FAILURES PRESENT'}; "
          f"report: {out_dir / 'check_report.csv'}")
    return all_ok
