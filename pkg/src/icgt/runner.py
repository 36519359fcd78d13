"""Experiment orchestration: build a problem from a config, step the chosen
algorithm, record metrics, and write CSV artifacts.

Metrics per cadence point (iteration 0, every ``metrics.every``, and the
final iteration): squared distance of the node average from the reference
optimum, average pairwise consensus error over graph edges, stacked
consensus error, and (when noise logging is on) the squared stacked error
norm.  Runs are deterministic: identical config and seed give byte-identical
CSV output.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algorithms import (AlgParams, AlgState, RunTrace, contraction_horizon,
                         gamma_schedule, init_state, max_step_size, step)
from .channels import ChannelModel
from .config import ExperimentConfig
from .datasets import ingest_mnist_idx, synth_dataset
from .errors import ConfigError
from .graphs import (MixingMatrix, Topology, build_topology, metropolis_weights,
                     single_node_mixing)
from .objectives import (GradientOracle, LogisticObjective, ReferenceSolution,
                         SmoothnessInfo, estimate_constants, heterogeneity_chi2,
                         partition_dataset, random_quadratic, solve_reference)
from .rng import spawn_seed, substream
from .verification import stack_errors

CSV_HEADER = "iter,opt_err,avg_consensus,stacked_consensus,psi_norm_sq,status"
SWEEP_HEADER = "axis_value,repeat,final_opt_err,final_consensus,status"
ALPHA_GRID = tuple(float(a) for a in np.logspace(-4, 0, 13))

SWEEP_AXES = {
    "n_list": "n",
    "topology_list": "topology",
    "sigma_c_list": "channel_sigma_c",
    "algorithm_list": "algorithm",
}


@dataclass(frozen=True)
class MetricRow:
    k: int
    opt_err: float
    avg_pairwise: float
    stacked: float
    psi_sq: float | None


@dataclass
class RunRecord:
    rows: list[MetricRow]
    status: str
    diverged_at: int | None
    wall_time: float
    alpha: float
    gamma: float
    chi2: float
    trace: RunTrace | None = None

    @property
    def final_opt_err(self) -> float:
        return self.rows[-1].opt_err if self.rows else float("inf")

    @property
    def final_consensus(self) -> float:
        return self.rows[-1].avg_pairwise if self.rows else float("inf")


@dataclass
class Problem:
    cfg: ExperimentConfig
    mixing: MixingMatrix
    topology: Topology | None
    objective: object
    oracle: GradientOracle
    ch_x: ChannelModel
    ch_y: ChannelModel
    x0: np.ndarray
    smooth: SmoothnessInfo
    reference: ReferenceSolution
    chi2: float


def build_problem(cfg: ExperimentConfig) -> Problem:
    seed = cfg.seed
    if cfg.n == 1:
        topology, mixing = None, single_node_mixing()
    else:
        topology = build_topology(cfg.topology, cfg.n, cfg.er_prob,
                                  seed=spawn_seed(seed, "topology"))
        mixing = metropolis_weights(topology)

    if cfg.objective_type == "quadratic":
        objective = random_quadratic(cfg.n, cfg.dim, mu=cfg.quad_mu,
                                     l_max=cfg.quad_l_max, hetero=cfg.quad_hetero,
                                     seed=spawn_seed(seed, "objective"))
    else:
        if cfg.dataset_source == "synthetic":
            data = synth_dataset(cfg.n * cfg.per_node, cfg.dim,
                                 seed=spawn_seed(seed, "data"),
                                 separation=cfg.separation)
        else:
            data = ingest_mnist_idx(cfg.mnist_images, cfg.mnist_labels, cfg.class_pair)
        shards = partition_dataset(data.features, data.labels, cfg.n, cfg.per_node,
                                   seed=spawn_seed(seed, "partition"))
        objective = LogisticObjective(shards, cfg.reg_lambda)

    oracle = GradientOracle(mode=cfg.oracle_mode, batch_size=cfg.batch_size,
                            sigma_g=cfg.sigma_g, seed=spawn_seed(seed, "oracle"))
    chan_seed = spawn_seed(seed, "channel")
    kwargs = {}
    if cfg.channel_type == "awgn":
        kwargs = {"sigma_c": cfg.channel_sigma_c, "h": cfg.channel_h}
    elif cfg.channel_type == "quant":
        kwargs = {"delta_p": cfg.channel_delta_p}
    ch_x = ChannelModel(cfg.channel_type, seed=chan_seed, tag="chx", **kwargs)
    ch_y = ChannelModel(cfg.channel_type, seed=chan_seed, tag="chy", **kwargs)

    if cfg.init_mode == "zeros":
        x0 = np.zeros((cfg.n, objective.d))
    else:
        x0 = substream(seed, "init").standard_normal((cfg.n, objective.d)) * cfg.init_scale

    smooth = estimate_constants(objective)
    reference = solve_reference(objective)
    chi2 = heterogeneity_chi2(objective, reference.x_star)
    return Problem(cfg=cfg, mixing=mixing, topology=topology, objective=objective,
                   oracle=oracle, ch_x=ch_x, ch_y=ch_y, x0=x0, smooth=smooth,
                   reference=reference, chi2=chi2)


def resolve_params(cfg: ExperimentConfig, problem: Problem, alpha: float | None = None) -> AlgParams:
    """Apply the alpha/gamma mode logic for one concrete run."""
    if alpha is None:
        if cfg.alpha_mode == "theoretical":
            if cfg.gamma is None:
                raise ConfigError("alpha.mode=theoretical requires a fixed gamma")
            tau = contraction_horizon(cfg.gamma, problem.mixing.lambda2)
            alpha = max_step_size(tau, problem.smooth.L)
        else:
            alpha = cfg.alpha
    if cfg.gamma_mode == "schedule" and cfg.algorithm == "icgt":
        gamma = gamma_schedule(alpha, max(cfg.T, 2))
    else:
        gamma = cfg.gamma if cfg.gamma is not None else 0.1
    return AlgParams(variant=cfg.algorithm, alpha=alpha, gamma=gamma,
                     near_dgd_rounds=cfg.near_dgd_t, shared_noise=cfg.shared_noise,
                     allow_gamma_override=cfg.gamma_override)


def _metrics(problem: Problem, state: AlgState, k: int) -> MetricRow:
    x = state.x
    xbar = x.mean(axis=0)
    opt_err = float(np.sum((xbar - problem.reference.x_star) ** 2))
    stacked = float(np.sum((x - xbar) ** 2))
    if problem.topology is not None and problem.topology.edges:
        diffs = [float(np.sum((x[i] - x[j]) ** 2)) for i, j in problem.topology.edges]
        avg_pairwise = float(np.mean(diffs))
    else:
        avg_pairwise = 0.0
    return MetricRow(k=k, opt_err=opt_err, avg_pairwise=avg_pairwise,
                     stacked=stacked, psi_sq=None)


def _fill_psi(rows: list[MetricRow], trace: RunTrace) -> list[MetricRow]:
    # the stacked error at iteration k needs v_k, which only exists once
    # step k+1 has run, so psi values are attached after the loop
    out = []
    for row in rows:
        if row.k < len(trace.v):
            psi = stack_errors(trace.v[row.k], trace.x[row.k], trace.y[row.k], trace.alpha)
            out.append(replace(row, psi_sq=float(psi @ psi)))
        else:
            out.append(row)
    return out


def execute(problem: Problem, params: AlgParams) -> RunRecord:
    cfg = problem.cfg
    trace = RunTrace(alpha=params.alpha, gamma=params.gamma) if cfg.log_noise else None
    if trace is not None and params.variant not in ("icgt", "gt"):
        raise ConfigError("log_noise requires a tracker variant (icgt or gt)")
    t_start = time.perf_counter()
    state = init_state(params, problem.x0, problem.oracle, problem.objective)
    rows = [_metrics(problem, state, 0)]
    status, diverged_at = "budget_exhausted", None
    # overflow on the way to divergence is an expected, recorded outcome
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.T):
            state = step(state, problem.mixing, problem.ch_x, problem.ch_y, params,
                         problem.oracle, problem.objective, trace)
            k = state.k
            if not np.all(np.isfinite(state.x)):
                rows.append(_metrics(problem, state, k))
                status, diverged_at = f"diverged@{k}", k
                break
            at_cadence = (k % cfg.metrics_every == 0) or (k == cfg.T)
            if at_cadence:
                row = _metrics(problem, state, k)
                rows.append(row)
                if cfg.stop_opt_err is not None and row.opt_err <= cfg.stop_opt_err:
                    status = "converged"
                    break
    if trace is not None:
        rows = _fill_psi(rows, trace)
    wall = time.perf_counter() - t_start
    return RunRecord(rows=rows, status=status, diverged_at=diverged_at,
                     wall_time=wall, alpha=params.alpha, gamma=params.gamma,
                     chi2=problem.chi2, trace=trace)


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def write_run_csv(record: RunRecord, path) -> None:
    """Fixed schema; wall time is intentionally not a column so identical
    config + seed reproduce the file byte-for-byte."""
    lines = [CSV_HEADER]
    last = len(record.rows) - 1
    for idx, row in enumerate(record.rows):
        row_status = record.status if idx == last else "ok"
        lines.append(
            f"{row.k},{_fmt(row.opt_err)},{_fmt(row.avg_pairwise)},"
            f"{_fmt(row.stacked)},{_fmt(row.psi_sq)},{row_status}"
        )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def grid_search_alpha(cfg: ExperimentConfig, problem: Problem | None = None,
                      grid=ALPHA_GRID):
    """Tune alpha on a shared problem instance (same data, same noise seeds
    for every candidate) by minimal final optimality error."""
    if problem is None:
        problem = build_problem(cfg)
    table = []
    best_alpha, best_err = None, float("inf")
    for alpha in grid:
        params = resolve_params(cfg, problem, alpha=alpha)
        record = execute(problem, params)
        err = record.final_opt_err if record.diverged_at is None else float("inf")
        if not np.isfinite(err):
            err = float("inf")
        table.append((alpha, err, record.status))
        if err < best_err:
            best_alpha, best_err = alpha, err
    if best_alpha is None or best_err == float("inf"):
        best_alpha = grid[0]
    return best_alpha, table


def run_experiment(cfg: ExperimentConfig, out_dir=None, name: str = "run") -> RunRecord:
    """Build everything from the config, run T iterations, optionally write
    the per-iteration CSV.  Divergence is recorded, not raised."""
    problem = build_problem(cfg)
    if cfg.alpha_mode == "grid":
        best_alpha, _table = grid_search_alpha(cfg, problem)
        params = resolve_params(cfg, problem, alpha=best_alpha)
    else:
        params = resolve_params(cfg, problem)
    record = execute(problem, params)
    if out_dir is not None:
        write_run_csv(record, Path(out_dir) / f"{name}.csv")
    return record


def _sweep_one(args):
    cfg, axis_attr, value, repeat = args
    run_cfg = cfg.replace(**{axis_attr: value},
                          seed=spawn_seed(cfg.seed, "sweep", repeat))
    record = run_experiment(run_cfg)
    return value, repeat, record.final_opt_err, record.final_consensus, record.status


@dataclass
class SweepResult:
    axis: str
    values: list
    repeats: int
    rows: list  # (value, repeat, final_opt_err, final_consensus, status)
    summary: list = field(default_factory=list)  # (value, mean_err, mean_cons, diverged)

    def mean_errors(self) -> dict:
        return {v: e for v, e, _c, _d in self.summary}


def sweep(cfg: ExperimentConfig, axis: str, values, repeats: int = 1,
          out_dir=None, name: str = "sweep") -> SweepResult:
    """One run per (axis value, repeat).  Repeat r of every axis value shares
    the same derived sub-seed, so values are compared under common random
    numbers; the summary averages over repeats."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_AXES)}")
    if not values:
        raise ConfigError("sweep needs a nonempty value list")
    axis_attr = SWEEP_AXES[axis]
    jobs = [(cfg, axis_attr, v, r) for v in values for r in range(repeats)]
    workers = int(os.environ.get("ICGT_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]

    summary = []
    for v in values:
        errs = [e for (val, _r, e, _c, _s) in rows if val == v]
        cons = [c for (val, _r, _e, c, _s) in rows if val == v]
        div = sum(1 for (val, _r, _e, _c, s) in rows if val == v and s.startswith("diverged"))
        finite = [e for e in errs if np.isfinite(e)]
        mean_err = float(np.mean(finite)) if finite else float("inf")
        finite_c = [c for c in cons if np.isfinite(c)]
        mean_cons = float(np.mean(finite_c)) if finite_c else float("inf")
        summary.append((v, mean_err, mean_cons, div))
    result = SweepResult(axis=axis, values=list(values), repeats=repeats,
                         rows=rows, summary=summary)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [SWEEP_HEADER]
        for v, r, e, c, s in rows:
            lines.append(f"{v},{r},{_fmt(e)},{_fmt(c)},{s}")
        (out / f"{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        slines = ["axis_value,mean_final_opt_err,mean_final_consensus,diverged_runs"]
        for v, e, c, dgd in summary:
            slines.append(f"{v},{_fmt(e)},{_fmt(c)},{dgd}")
        (out / f"{name}_summary.csv").write_text("\n".join(slines) + "\n", encoding="utf-8")
    return result


_PLOT_STUB = """\
#!/usr/bin/env python3
\"\"\"Line/bar plots for the CSV files next to this script.\"\"\"
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).parent

def read(name):
    with open(HERE / name) as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]

for name in sys.argv[1:] or [p.name for p in HERE.glob("fig*.csv")]:
    header, rows = read(name)
    fig, ax = plt.subplots()
    xs = [float(r[0]) for r in rows]
    for col in range(1, len(header)):
        ys = [float(r[col]) if r[col] else float("nan") for r in rows]
        ax.plot(xs, ys, label=header[col])
    ax.set_xlabel(header[0])
    ax.set_yscale("log")
    ax.legend()
    fig.savefig(HERE / (Path(name).stem + ".png"), dpi=150)
    print("wrote", Path(name).stem + ".png")
"""


def emit_plot_data(out_dir, curves: dict | None = None,
                   topology_sweeps: dict | None = None,
                   sigma_sweep: SweepResult | None = None) -> list:
    """Write tidy per-figure CSVs plus a plotting stub that reads only them.

    ``curves``: {series name -> RunRecord} for the optimality/consensus
    trajectories; ``topology_sweeps``: {topology -> SweepResult over n};
    ``sigma_sweep``: SweepResult over the channel noise level.
    """
    if not curves and not topology_sweeps and sigma_sweep is None:
        raise ValueError("nothing to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if curves:
        names = list(curves)
        iters = sorted({row.k for rec in curves.values() for row in rec.rows})
        for fname, attr in (("fig1a_opt_err.csv", "opt_err"),
                            ("fig1b_consensus.csv", "avg_pairwise")):
            lines = ["iter," + ",".join(names)]
            lookup = {name: {row.k: getattr(row, attr) for row in rec.rows}
                      for name, rec in curves.items()}
            for k in iters:
                cells = [str(k)]
                for name in names:
                    v = lookup[name].get(k)
                    cells.append(_fmt(v) if v is not None else "")
                lines.append(",".join(cells))
            (out / fname).write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(out / fname)

    if topology_sweeps:
        topos = list(topology_sweeps)
        axis_values = topology_sweeps[topos[0]].values
        lines = ["n," + ",".join(topos)]
        for i, v in enumerate(axis_values):
            cells = [str(v)]
            for t in topos:
                cells.append(_fmt(topology_sweeps[t].summary[i][1]))
            lines.append(",".join(cells))
        (out / "fig1c_topology_sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(out / "fig1c_topology_sweep.csv")

    if sigma_sweep is not None:
        lines = ["sigma_c,final_opt_err"]
        for v, e, _c, _d in sigma_sweep.summary:
            lines.append(f"{v},{_fmt(e)}")
        (out / "fig1d_sigma_sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(out / "fig1d_sigma_sweep.csv")

    (out / "plot_figs.py").write_text(_PLOT_STUB, encoding="utf-8")
    written.append(out / "plot_figs.py")
    return written
