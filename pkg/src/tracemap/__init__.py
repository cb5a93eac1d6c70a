"""Boundary trace operator learning and boundary-integral PDE solvers."""

from .geometry import (
    BoundaryGrid,
    DomainSpec,
    PolarCurve,
    PolarTerm,
    TriMesh,
    contains,
    make_boundary_grid,
    parse_msh,
    triangulate_square,
)
from .kernels import KernelSpec, bessel, kernel_gradient_y, kernel_value
from .operator import (
    LinearBoundaryOperator,
    TrainingConfig,
    compute_loss,
    dirichlet_layouts,
    fit_least_squares,
    load_model,
    mixed_layouts,
    save_model,
    train_adam,
)
from .quadrature import (
    BoundaryReconstructor,
    SingularIntegralConfig,
    boundary_integral,
    integrate_mesh,
    integrate_triangle,
    newton_potential,
    reconstruct_interior,
)
from .solvers import (
    MixedPartition,
    SolutionField,
    make_eval_grid,
    make_test_suite,
    relative_l2,
    solve_dirichlet,
    solve_helmholtz,
    solve_mixed,
    solve_poisson,
)
from .synthesis import DatasetSpec, TracePair, build_dataset, normalize_pair

__all__ = [
    "BoundaryGrid",
    "BoundaryReconstructor",
    "DatasetSpec",
    "DomainSpec",
    "KernelSpec",
    "LinearBoundaryOperator",
    "MixedPartition",
    "PolarCurve",
    "PolarTerm",
    "SingularIntegralConfig",
    "SolutionField",
    "TracePair",
    "TrainingConfig",
    "TriMesh",
    "bessel",
    "boundary_integral",
    "build_dataset",
    "compute_loss",
    "contains",
    "dirichlet_layouts",
    "fit_least_squares",
    "integrate_mesh",
    "integrate_triangle",
    "kernel_gradient_y",
    "kernel_value",
    "load_model",
    "make_boundary_grid",
    "make_eval_grid",
    "make_test_suite",
    "mixed_layouts",
    "newton_potential",
    "normalize_pair",
    "parse_msh",
    "reconstruct_interior",
    "relative_l2",
    "save_model",
    "solve_dirichlet",
    "solve_helmholtz",
    "solve_mixed",
    "solve_poisson",
    "train_adam",
    "triangulate_square",
]
