"""Command-line interface.

Subcommands:

* ``run``    - execute one experiment from a config file, write the run CSV.
* ``sweep``  - repeat a base config along one axis, write sweep CSVs.
* ``check``  - run the numerical verification grid, write a report + CSV.
* ``tau``    - print the contraction horizon for given gamma and lambda2.
* ``mnist-fetch-note`` - how to obtain the MNIST IDX files (no downloads).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import contraction_horizon
from .config import load_config
from .errors import SimulationError
from .runner import run_experiment, sweep
from .verify_grid import run_check_grid

MNIST_NOTE = """\
This tool performs no network access.  To run on MNIST, obtain the four IDX
files (train-images-idx3-ubyte, train-labels-idx1-ubyte, and the t10k pair)
from an MNIST mirror of your choice, decompress them, and point the config at
the image/label pair:

    dataset.source = mnist
    dataset.mnist_images = /path/to/train-images-idx3-ubyte
    dataset.mnist_labels = /path/to/train-labels-idx1-ubyte
    dataset.class_pair = 0,1

Files are parsed as big-endian IDX (magic 2051 for images, 2049 for labels).
"""


def _parse_values(axis: str, raw: str) -> list:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if axis == "n_list":
        return [int(p) for p in parts]
    if axis == "sigma_c_list":
        return [float(p) for p in parts]
    return parts


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="icgt", description=__doc__)
    parser.add_argument("--version", action="version", version=f"icgt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default="runs")

    p_sweep = sub.add_parser("sweep", help="sweep one config axis")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", required=True,
                         choices=["n_list", "topology_list", "sigma_c_list", "algorithm_list"])
    p_sweep.add_argument("--values", required=True, help="comma-separated list")
    p_sweep.add_argument("--repeats", type=int, default=1)
    p_sweep.add_argument("--out", default="runs")

    p_check = sub.add_parser("check", help="numerical verification grid")
    p_check.add_argument("--grid", choices=["small", "full"], default="small")
    p_check.add_argument("--out", default="runs")

    p_tau = sub.add_parser("tau", help="contraction horizon")
    p_tau.add_argument("--gamma", type=float, required=True)
    p_tau.add_argument("--lambda2", type=float, required=True)
    p_tau.add_argument("--delta", type=float, default=1.0 / 16.0)

    sub.add_parser("mnist-fetch-note", help="print MNIST acquisition instructions")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            record = run_experiment(cfg, out_dir=args.out)
            final = record.rows[-1]
            print(f"status={record.status} iters={final.k} "
                  f"opt_err={final.opt_err:.6e} consensus={final.avg_pairwise:.6e} "
                  f"alpha={record.alpha:.4g} gamma={record.gamma:.4g} "
                  f"wall={record.wall_time:.2f}s")
            print(f"csv: {Path(args.out) / 'run.csv'}")
            return 0
        if args.command == "sweep":
            cfg = load_config(args.config)
            values = _parse_values(args.axis, args.values)
            result = sweep(cfg, args.axis, values, repeats=args.repeats, out_dir=args.out)
            for v, err, cons, div in result.summary:
                print(f"{args.axis}={v}: mean_opt_err={err:.6e} "
                      f"mean_consensus={cons:.6e} diverged={div}")
            print(f"csv: {Path(args.out) / 'sweep.csv'}")
            return 0
        if args.command == "check":
            ok = run_check_grid(args.grid, Path(args.out))
            return 0 if ok else 1
        if args.command == "tau":
            tau = contraction_horizon(args.gamma, args.lambda2, args.delta)
            print(tau)
            return 0
        if args.command == "mnist-fetch-note":
            print(MNIST_NOTE)
            return 0
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
