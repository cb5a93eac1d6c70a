"""Command-line surface: dataset generation, training, evaluation,
solving, and the quadrature benchmark.

Every artifact-producing command is deterministic given its config and
seed, echoes its configuration next to the outputs, and exits nonzero if
any requested output could not be written.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .geometry import DomainSpec, PolarTerm, make_boundary_grid, triangulate_square
from .kernels import KernelSpec
from .operator import (
    TrainingConfig,
    compute_loss,
    constant_annihilation,
    dirichlet_layouts,
    fit_least_squares,
    load_model,
    mixed_layouts,
    mixed_training_arrays,
    save_model,
    train_adam,
)
from .quadrature import singular_log_integral
from .solvers import (
    MixedPartition,
    evaluate_suite,
    make_eval_grid,
    make_test_suite,
    poisson_cases,
    plane_wave_3d,
    predict_normal_derivative_3d,
    solve_dirichlet,
    solve_helmholtz,
    solve_mixed,
    solve_poisson,
    summary_to_json,
)
from .synthesis import (
    Dataset,
    DatasetSpec,
    dataset_checksum,
    dataset_from_csv,
    dataset_to_csv,
    build_dataset,
)

LOG_REFERENCE_CORNER = float(np.log(2.0) + np.pi / 2.0 - 3.0)
LOG_REFERENCE_CENTER = float(np.pi / 2.0 - np.log(2.0) - 3.0)


def _emit_provenance(args, *artifacts: Path) -> None:
    """One-line config echo plus a hash per written artifact."""
    skip = {"fn", "command"}
    echo = " ".join(
        f"{k}={v}" for k, v in sorted(vars(args).items()) if k not in skip and v != ""
    )
    print(f"config: {echo}")
    for path in artifacts:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()[:16]
        print(f"artifact: {path} sha256:{digest}")


def _domain_from_name(name: str) -> DomainSpec:
    presets = {
        "square": DomainSpec.unit_square,
        "circle": lambda: DomainSpec.polar(1.0),
        "star5": lambda: DomainSpec.polar(0.65, [PolarTerm("sin", 0.2, 5)]),
        "sphere": DomainSpec.sphere,
    }
    if name not in presets:
        raise SystemExit(f"unknown domain {name!r}; choose from {sorted(presets)}")
    return presets[name]()


def _kernel_from_args(args) -> KernelSpec:
    if args.equation == "laplace":
        return KernelSpec("laplace2d")
    if args.equation == "helmholtz":
        return KernelSpec("helmholtz2d", args.k)
    if args.equation == "helmholtz3d":
        return KernelSpec("helmholtz3d", args.k)
    raise SystemExit(f"unknown equation {args.equation!r}")


def cmd_gen(args) -> int:
    kernel = _kernel_from_args(args)
    domain = _domain_from_name(args.domain)
    spec = DatasetSpec(
        kernel=kernel,
        domain=domain,
        n_points=args.n,
        n_samples=args.samples,
        n_kernels_per_sample=args.kernels_per_sample,
        source_box=(args.box_lo, args.box_hi),
        seed=args.seed,
    )
    ds = build_dataset(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dataset.csv").write_text(dataset_to_csv(ds))
    (out / "dataset.json").write_text(spec.to_json())
    print(f"wrote {ds.n_samples} samples ({spec.n_points} points) to {out}")
    print(f"sha256 {dataset_checksum(ds)}")
    _emit_provenance(args, out / "dataset.csv", out / "dataset.json")
    return 0


def _load_dataset(data_dir: Path) -> Dataset:
    sidecar = json.loads((data_dir / "dataset.json").read_text())
    kernel = KernelSpec(sidecar["kernel"]["family"], sidecar["kernel"]["k"])
    dom = sidecar["domain"]
    if dom["shape"] == "unit_square":
        domain = DomainSpec.unit_square()
    elif dom["shape"] == "polar_curve":
        terms = [PolarTerm(k, a, f) for k, a, f in dom["outer"]["terms"]]
        domain = DomainSpec.polar(dom["outer"]["base"], terms, tuple(dom["outer"]["center"]))
    elif dom["shape"] == "sphere3d":
        domain = DomainSpec.sphere(tuple(dom["center"]), dom["radius"])
    else:
        raise SystemExit(f"cannot rebuild domain shape {dom['shape']!r}")
    spec = DatasetSpec(
        kernel=kernel,
        domain=domain,
        n_points=sidecar["n_points"],
        n_samples=sidecar["n_samples"],
        n_kernels_per_sample=sidecar["n_kernels_per_sample"],
        source_box=tuple(sidecar["source_box"]),
        min_boundary_distance=sidecar["min_boundary_distance"],
        seed=sidecar["seed"],
        anchor_index=sidecar.get("anchor_index", 0),
    )
    grid = make_boundary_grid(domain, spec.n_points)
    return dataset_from_csv((data_dir / "dataset.csv").read_text(), spec, grid)


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    ds = _load_dataset(data_dir)
    n = ds.spec.n_points
    if args.dirichlet_edges:
        edges = {f"G{e}" for e in args.dirichlet_edges.split(",")}
        inp_layout, out_layout = mixed_layouts(ds.grid, edges)
        inputs, targets = mixed_training_arrays(ds.g_rows, ds.h_rows, inp_layout, out_layout)
    else:
        inp_layout, out_layout = dirichlet_layouts(n)
        inputs, targets = ds.g_rows, ds.h_rows

    if args.method == "ls":
        op = fit_least_squares(inputs, targets, inp_layout, out_layout)
        residual = compute_loss(op, inputs, targets)
        print(f"least-squares residual {residual:.6e}")
        log_text = "epoch,mean_loss,best_loss\n"
    else:
        cfg = TrainingConfig(
            learning_rate=args.lr, batch_size=min(args.batch, len(inputs)),
            epochs=args.epochs, seed=args.seed,
        )
        op, report = train_adam(inputs, targets, inp_layout, out_layout, cfg)
        print(
            f"adam best loss {report.best_loss:.6e} at epoch {report.best_epoch} "
            f"({report.wall_time:.1f}s)"
        )
        log_text = report.to_csv()
    print(f"constant annihilation {constant_annihilation(op):.3e}")
    Path(args.out).write_text(save_model(op))
    written = [Path(args.out)]
    if args.log:
        Path(args.log).write_text(log_text)
        written.append(Path(args.log))
    print(f"wrote model to {args.out}")
    _emit_provenance(args, *written)
    return 0


def cmd_eval(args) -> int:
    op = load_model(Path(args.model).read_text())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    domain = _domain_from_name(args.domain)
    # accept spellings like "laplace-u1..u5"
    args.suite = args.suite.split("-")[0]

    if args.suite == "helmholtz3d":
        grid = make_boundary_grid(DomainSpec.sphere(), args.n)
        case = plane_wave_3d(args.k)
        h_pred, err = predict_normal_derivative_3d(
            op, grid, case.dirichlet(grid), case.neumann(grid)
        )
        summary = {"plane3d": {"n_cases": 1, "dudn_error": err}}
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
        print(f"3D normal-derivative relative error {err:.4e}")
        return 0

    grid = make_boundary_grid(domain, args.n)
    eval_points = make_eval_grid(domain, 100, margin=args.margin)
    if args.suite == "laplace":
        families = ["u1", "u2", "u3", "u4", "u5"]
        cases = [c for fam in families for c in make_test_suite(fam, domain, seed=args.seed)]

        def solve_one(case):
            fld = solve_dirichlet(
                op, KernelSpec("laplace2d"), grid, case.dirichlet(grid), eval_points, exact=case.u
            )
            return fld, case.neumann(grid)

    elif args.suite == "helmholtz":
        cases = [
            c
            for fam in ("sin_sin", "sin_sinh")
            for c in make_test_suite(fam, domain, k=args.k, seed=args.seed)
        ]

        def solve_one(case):
            fld = solve_helmholtz(op, args.k, grid, case.dirichlet(grid), eval_points, exact=case.u)
            return fld, case.neumann(grid)

    elif args.suite == "poisson":
        mesh = triangulate_square(args.mesh_h)
        cases = poisson_cases()

        def solve_one(case):
            fld = solve_poisson(
                op, case.source, case.dirichlet(grid), mesh, grid, eval_points, exact=case.u
            )
            return fld, case.neumann(grid)

    else:
        raise SystemExit(f"unknown suite {args.suite!r}")

    summary = evaluate_suite(cases, solve_one)
    (out_dir / "summary.json").write_text(summary_to_json(summary))
    for i, case in enumerate(cases):
        fld, _ = solve_one(case)
        (out_dir / f"case_{i:03d}_{case.family}.csv").write_text(fld.to_csv())
    print(summary_to_json(summary))
    _emit_provenance(args, out_dir / "summary.json")
    return 0


def cmd_solve(args) -> int:
    op = load_model(Path(args.model).read_text())
    domain, n = _parse_grid_name(args.grid)
    grid = make_boundary_grid(domain, n)
    g = _read_column(Path(args.g)) if args.g else None
    eval_points = make_eval_grid(domain, 100, margin=args.margin)

    if args.dirichlet_edges:
        h = _read_column(Path(args.h))
        partition = MixedPartition.from_edges(
            *[f"G{e}" for e in args.dirichlet_edges.split(",")]
        )
        fld = solve_mixed(op, grid, partition, g, h, eval_points)
    elif args.source:
        mesh = triangulate_square(args.mesh_h)
        f_vertex = _read_column(Path(args.source))
        if len(f_vertex) != len(mesh.vertices):
            raise SystemExit(
                f"source file has {len(f_vertex)} values, mesh has {len(mesh.vertices)} vertices"
            )
        f = _vertex_interpolant(mesh, f_vertex)
        fld = solve_poisson(op, f, g, mesh, grid, eval_points)
    elif args.equation == "helmholtz":
        fld = solve_helmholtz(op, args.k, grid, g, eval_points)
    else:
        fld = solve_dirichlet(op, KernelSpec("laplace2d"), grid, g, eval_points)
    Path(args.out).write_text(fld.to_csv())
    print(f"wrote field ({len(fld.points)} points) to {args.out}")
    _emit_provenance(args, Path(args.out))
    return 0


def _vertex_interpolant(mesh, vertex_values):
    """Piecewise-linear interpolation of per-vertex source values."""

    def f(pts):
        pts = np.atleast_2d(pts)
        out = np.zeros(len(pts))
        a, b, c = mesh.corner_arrays()
        va = vertex_values[mesh.triangles[:, 0]]
        vb = vertex_values[mesh.triangles[:, 1]]
        vc = vertex_values[mesh.triangles[:, 2]]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        for i, p in enumerate(pts):
            l1 = ((b[:, 0] - p[0]) * (c[:, 1] - p[1]) - (c[:, 0] - p[0]) * (b[:, 1] - p[1])) / det
            l2 = ((c[:, 0] - p[0]) * (a[:, 1] - p[1]) - (a[:, 0] - p[0]) * (c[:, 1] - p[1])) / det
            l3 = 1.0 - l1 - l2
            ok = (l1 >= -1e-12) & (l2 >= -1e-12) & (l3 >= -1e-12)
            if ok.any():
                t = int(np.argmax(ok))
                out[i] = l1[t] * va[t] + l2[t] * vb[t] + l3[t] * vc[t]
        return out

    return f


def _parse_grid_name(name: str):
    for prefix in ("square", "circle", "star5", "sphere"):
        if name.startswith(prefix):
            n = int(name[len(prefix) :] or "400")
            return _domain_from_name(prefix), n
    raise SystemExit(f"unknown grid {name!r} (expected e.g. square400)")


def _read_column(path: Path) -> np.ndarray:
    vals = [float(line.strip()) for line in path.read_text().splitlines() if line.strip()]
    return np.array(vals)


def cmd_quadbench(args) -> int:
    integrands = {
        "ln(x2+y2)": ((0.0, 0.0), LOG_REFERENCE_CORNER),
        "ln((x-0.5)2+(y-0.5)2)": ((0.5, 0.5), LOG_REFERENCE_CENTER),
    }
    if args.kernel != "both":
        if args.kernel not in integrands:
            raise SystemExit(f"unknown benchmark kernel {args.kernel!r}")
        integrands = {args.kernel: integrands[args.kernel]}
    rows = ["integrand,h,computed,reference,rel_error"]
    worst = 0.0
    for h in args.h:
        mesh = triangulate_square(h)
        for label, (x0, ref) in integrands.items():
            val = singular_log_integral(mesh, x0, args.r0)
            rel = abs(val - ref) / abs(ref)
            worst = max(worst, rel)
            rows.append(f"{label},{h},{val!r},{ref!r},{rel!r}")
    report = "\n".join(rows) + "\n"
    print(report, end="")
    if args.out:
        Path(args.out).write_text(report)
        _emit_provenance(args, Path(args.out))
    return 0 if worst <= args.fail_above else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracemap")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesize a trace-pair dataset")
    p.add_argument("--equation", required=True, choices=["laplace", "helmholtz", "helmholtz3d"])
    p.add_argument("--domain", default="square")
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--kernels-per-sample", type=int, default=3)
    p.add_argument("--box-lo", type=float, default=-7.0)
    p.add_argument("--box-hi", type=float, default=7.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("train", help="fit the boundary operator")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=["adam", "ls"], default="ls")
    p.add_argument("--epochs", type=int, default=50_000)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dirichlet-edges", default="", help="e.g. '1,3' for a mixed operator")
    p.add_argument("--out", required=True)
    p.add_argument("--log", default="")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="run an analytic test suite")
    p.add_argument("--model", required=True)
    p.add_argument("--suite", required=True,
                   help="laplace | helmholtz | poisson | helmholtz3d (family suffixes tolerated)")
    p.add_argument("--domain", default="square")
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--margin", type=float, default=0.05)
    p.add_argument("--mesh-h", type=float, default=0.02)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("solve", help="solve one problem from boundary-data files")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", default="square400")
    p.add_argument("--equation", choices=["laplace", "helmholtz"], default="laplace")
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--g", required=True, help="single-column CSV, grid order")
    p.add_argument("--h", default="", help="single-column CSV for the Neumann part (mixed)")
    p.add_argument("--dirichlet-edges", default="")
    p.add_argument("--source", default="", help="per-vertex source values (CSV column)")
    p.add_argument("--mesh-h", type=float, default=0.02)
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("quadbench", help="singular log-kernel integral benchmark")
    p.add_argument("--h", type=float, action="append", required=True)
    p.add_argument("--r0", type=float, default=0.01)
    p.add_argument("--kernel", default="both", help='"ln(x2+y2)", "ln((x-0.5)2+(y-0.5)2)", or "both"')
    p.add_argument("--fail-above", type=float, default=np.inf)
    p.add_argument("--out", default="")
    p.set_defaults(fn=cmd_quadbench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
