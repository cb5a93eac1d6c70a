#!/usr/bin/env python3
"""Full-scale training runs: 10^4 samples, 5*10^4 Adam epochs.

The published configuration.  Expect hours of wall time per equation on
a single CPU; use --equations to run a subset.  Results (training log,
model, error summary) land under --out.
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from tracemap.geometry import DomainSpec, make_boundary_grid
from tracemap.kernels import KernelSpec
from tracemap.operator import (
    TrainingConfig,
    dirichlet_layouts,
    save_model,
    train_adam,
)
from tracemap.quadrature import BoundaryReconstructor
from tracemap.solvers import evaluate_suite, make_eval_grid, make_test_suite, solve_dirichlet
from tracemap.synthesis import DatasetSpec, build_dataset

SQUARE = DomainSpec.unit_square()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--equations", default="laplace,helmholtz1,helmholtz10,helmholtz100")
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--epochs", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", default="runs/full_scale")
    args = ap.parse_args()

    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    grid = make_boundary_grid(SQUARE, 400)
    eval_pts = make_eval_grid(SQUARE, 100, margin=0.05)
    inp, out = dirichlet_layouts(400)

    for name in args.equations.split(","):
        if name == "laplace":
            kernel = KernelSpec("laplace2d")
            families = ("u1", "u2", "u3", "u4", "u5")
            k = None
        else:
            k = float(name.removeprefix("helmholtz"))
            kernel = KernelSpec("helmholtz2d", k)
            families = ("sin_sin", "sin_sinh")

        t0 = time.time()
        spec = DatasetSpec(kernel=kernel, domain=SQUARE, n_points=400,
                           n_samples=args.samples, seed=args.seed)
        ds = build_dataset(spec, grid)
        cfg = TrainingConfig(epochs=args.epochs, seed=3)
        op, report = train_adam(ds.g_rows, ds.h_rows, inp, out, cfg)

        run_dir = out_root / name
        run_dir.mkdir(exist_ok=True)
        (run_dir / "model.json").write_text(save_model(op))
        (run_dir / "train_log.csv").write_text(report.to_csv())

        rec = BoundaryReconstructor(kernel, grid, eval_pts)
        cases = [c for f in families
                 for c in make_test_suite(f, SQUARE, k=k, seed=7, n_cases=10)]

        def solve_one(case):
            fld = solve_dirichlet(op, kernel, grid, case.dirichlet(grid),
                                  reconstructor=rec, exact=case.u)
            return fld, case.neumann(grid)

        summary = evaluate_suite(cases, solve_one)
        summary["_train"] = {
            "best_loss": report.best_loss,
            "best_epoch": report.best_epoch,
            "wall_time_s": report.wall_time,
            "total_s": time.time() - t0,
        }
        (run_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        tot = np.mean([s["mean_total_error"] for key, s in summary.items() if not key.startswith("_")])
        print(f"{name}: best loss {report.best_loss:.3e}, mean total error {tot:.3e}, "
              f"{time.time() - t0:.0f}s -> {run_dir}")


if __name__ == "__main__":
    main()
