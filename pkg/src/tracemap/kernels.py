"""Fundamental solutions and the special functions they need.

Supports the 2D log kernel, the 2D Helmholtz kernel (i/4) H0^(1)(kr) with
H0^(1) = J0 + i Y0, and the 3D Helmholtz kernel e^{ikr}/(4 pi r).  Bessel
functions J0, J1, Y0, Y1 are evaluated from their power series for small
arguments and from the large-argument amplitude/phase asymptotic
expansion beyond ``X_SWITCH``; no special-function library is used.

All kernels here satisfy L G = -delta (potential-theory sign), so the
interior representation used elsewhere is
``u(x) = \\oint (G h - g dG/dn_y) ds`` plus, for sources, a volume term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015328606
X_SWITCH = 12.0  # series below, asymptotic expansion above
_SERIES_TOL = 1e-17
_SERIES_MAX_TERMS = 60
_ASYMPTOTIC_MAX_TERMS = 30

FAMILIES = ("laplace2d", "helmholtz2d", "helmholtz3d")


class SingularEvaluationError(ValueError):
    """Kernel evaluated at coincident source and field points."""


class BesselDomainError(ValueError):
    """Argument outside the function's domain (Y needs x > 0)."""


@dataclass(frozen=True)
class KernelSpec:
    """Which fundamental solution to use; ``k`` is the wavenumber."""

    family: str
    k: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family != "laplace2d" and not self.k > 0.0:
            raise ValueError("Helmholtz kernels need a positive wavenumber")

    @property
    def dimension(self) -> int:
        return 3 if self.family == "helmholtz3d" else 2

    @property
    def is_complex(self) -> bool:
        return self.family != "laplace2d"


# ---------------------------------------------------------------------------
# Bessel functions J0, J1, Y0, Y1
# ---------------------------------------------------------------------------


def _j0_series(x):
    q = 0.25 * x * x
    total = np.ones_like(x)
    term = np.ones_like(x)
    for m in range(1, _SERIES_MAX_TERMS + 1):
        term = term * (-q) / (m * m)
        total = total + term
        if np.all(np.abs(term) < _SERIES_TOL * np.maximum(np.abs(total), 1.0)):
            break
    return total


def _j1_series(x):
    q = 0.25 * x * x
    total = np.ones_like(x)
    term = np.ones_like(x)
    for m in range(1, _SERIES_MAX_TERMS + 1):
        term = term * (-q) / (m * (m + 1))
        total = total + term
        if np.all(np.abs(term) < _SERIES_TOL * np.maximum(np.abs(total), 1.0)):
            break
    return 0.5 * x * total


def _y0_series(x):
    # (2/pi) [ (ln(x/2) + gamma) J0 + sum_{m>=1} (-1)^{m+1} H_m q^m / (m!)^2 ],
    # q = x^2/4; the digamma combination reduces to harmonic numbers.
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.zeros_like(x)
    harmonic = 0.0
    for m in range(1, _SERIES_MAX_TERMS + 1):
        term = term * (-q) / (m * m)
        harmonic += 1.0 / m
        contrib = -harmonic * term  # (-1)^{m+1} H_m q^m/(m!)^2
        total = total + contrib
        if np.all(np.abs(contrib) < _SERIES_TOL * np.maximum(np.abs(total), 1.0)):
            break
    return (2.0 / math.pi) * ((np.log(0.5 * x) + EULER_GAMMA) * _j0_series(x) + total)


def _y1_series(x):
    # (2/pi)(ln(x/2)+gamma) J1 - 2/(pi x)
    #   - (x/(2 pi)) sum_{m>=0} (-1)^m (H_m + H_{m+1}) q^m / (m! (m+1)!)
    q = 0.25 * x * x
    term = np.ones_like(x)
    h_m = 0.0
    h_m1 = 1.0
    total = np.full_like(x, h_m + h_m1)
    for m in range(1, _SERIES_MAX_TERMS + 1):
        term = term * (-q) / (m * (m + 1))
        h_m += 1.0 / m
        h_m1 += 1.0 / (m + 1)
        contrib = (h_m + h_m1) * term
        total = total + contrib
        if np.all(np.abs(contrib) < _SERIES_TOL * np.maximum(np.abs(total), 1.0)):
            break
    return (
        (2.0 / math.pi) * (np.log(0.5 * x) + EULER_GAMMA) * _j1_series(x)
        - 2.0 / (math.pi * x)
        - (x / (2.0 * math.pi)) * total
    )


def _amplitude_phase(x, nu):
    """P, Q of the large-argument expansion, truncated at the smallest term."""
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    a = np.ones_like(x)
    prev = np.inf
    for k in range(1, _ASYMPTOTIC_MAX_TERMS + 1):
        a = a * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        mag = float(np.max(np.abs(a))) if a.size else 0.0
        if mag >= prev:  # asymptotic series: stop at the smallest term
            break
        prev = mag
        if k % 2 == 1:
            q = q + a * (-1.0) ** ((k - 1) // 2)
        else:
            p = p + a * (-1.0) ** (k // 2)
        if mag < 1e-18:
            break
    return p, q


def _bessel_asymptotic(x, nu):
    p, q = _amplitude_phase(x, nu)
    omega = x - (0.5 * nu + 0.25) * math.pi
    amp = np.sqrt(2.0 / (math.pi * x))
    j = amp * (p * np.cos(omega) - q * np.sin(omega))
    y = amp * (p * np.sin(omega) + q * np.cos(omega))
    return j, y


def _eval_piecewise(x, series_fn, nu):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= X_SWITCH
    if np.any(small):
        out[small] = series_fn(x[small])
    if np.any(~small):
        j, y = _bessel_asymptotic(x[~small], nu)
        out[~small] = j if series_fn in (_j0_series, _j1_series) else y
    return out


def bessel_j0(x):
    """J0 for x >= 0; scalar in, scalar out; arrays supported."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise BesselDomainError("J0 requires x >= 0")
    out = _eval_piecewise(x, _j0_series, 0.0)
    return float(out) if out.ndim == 0 else out


def bessel_j1(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise BesselDomainError("J1 requires x >= 0")
    out = _eval_piecewise(x, _j1_series, 1.0)
    return float(out) if out.ndim == 0 else out


def bessel_y0(x):
    """Y0 for x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise BesselDomainError("Y0 requires x > 0")
    out = _eval_piecewise(x, _y0_series, 0.0)
    return float(out) if out.ndim == 0 else out


def bessel_y1(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise BesselDomainError("Y1 requires x > 0")
    out = _eval_piecewise(x, _y1_series, 1.0)
    return float(out) if out.ndim == 0 else out


_BESSEL_TABLE = {
    ("J", 0): bessel_j0,
    ("J", 1): bessel_j1,
    ("Y", 0): bessel_y0,
    ("Y", 1): bessel_y1,
}


def bessel(kind: str, order: int, x):
    """Dispatch to J0/J1/Y0/Y1 by kind in {"J", "Y"} and order in {0, 1}."""
    try:
        fn = _BESSEL_TABLE[(kind, order)]
    except KeyError:
        raise ValueError(f"unsupported Bessel function {kind}{order}") from None
    return fn(x)


# ---------------------------------------------------------------------------
# Kernel values and gradients
# ---------------------------------------------------------------------------


def _distances(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    r = np.sqrt(np.sum(d * d, axis=-1))
    return d, r


def kernel_value(spec: KernelSpec, x, y) -> complex:
    """G(x, y) as a complex number (imaginary part 0 for the log kernel)."""
    _, r = _distances(x, y)
    if r == 0.0:
        raise SingularEvaluationError("kernel evaluated at coincident points")
    return complex(_value_from_r(spec, np.asarray([r]))[0])


def _value_from_r(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    if spec.family == "laplace2d":
        return -np.log(r) / (2.0 * math.pi)
    if spec.family == "helmholtz2d":
        kr = spec.k * r
        return 0.25 * (-bessel_y0(kr) + 1j * bessel_j0(kr))
    kr = spec.k * r
    return (np.cos(kr) + 1j * np.sin(kr)) / (4.0 * math.pi * r)


def _radial_derivative(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """dG/dr as a function of the distance r."""
    if spec.family == "laplace2d":
        return -1.0 / (2.0 * math.pi * r)
    if spec.family == "helmholtz2d":
        kr = spec.k * r
        return 0.25 * spec.k * (bessel_y1(kr) - 1j * bessel_j1(kr))
    kr = spec.k * r
    phase = np.cos(kr) + 1j * np.sin(kr)
    return phase * (1j * kr - 1.0) / (4.0 * math.pi * r * r)


def kernel_gradient_y(spec: KernelSpec, x, y) -> np.ndarray:
    """Gradient of G with respect to the second argument, per component.

    For these radial kernels grad_y G = (dG/dr) (y - x)/r, and
    grad_x G = -grad_y G.
    """
    d, r = _distances(x, y)
    if r == 0.0:
        raise SingularEvaluationError("kernel gradient at coincident points")
    dg = _radial_derivative(spec, np.asarray([r]))[0]
    return dg * d / r


def kernel_normal_derivative_y(spec: KernelSpec, x, y, normal) -> complex:
    """dG/dn_y: gradient wrt y projected onto the unit normal at y."""
    grad = kernel_gradient_y(spec, x, y)
    return complex(np.dot(grad, np.asarray(normal, dtype=float)))


def kernel_matrix(spec: KernelSpec, xs, ys) -> np.ndarray:
    """G(x_i, y_j) for point sets; shape (len(xs), len(ys))."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    diff = ys[None, :, :] - xs[:, None, :]
    r = np.sqrt(np.sum(diff * diff, axis=2))
    if np.any(r == 0.0):
        raise SingularEvaluationError("kernel matrix has coincident point pairs")
    return _value_from_r(spec, r)

def kernel_normal_matrix(spec: KernelSpec, xs, ys, normals) -> np.ndarray:
    """dG/dn_y (x_i, y_j) for point sets with unit normals at the y points."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    diff = ys[None, :, :] - xs[:, None, :]
    r = np.sqrt(np.sum(diff * diff, axis=2))
    if np.any(r == 0.0):
        raise SingularEvaluationError("kernel matrix has coincident point pairs")
    proj = np.einsum("ijd,jd->ij", diff, normals) / r
    return _radial_derivative(spec, r) * proj
