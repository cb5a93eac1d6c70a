"""Training data synthesis from fundamental solutions.

Each sample is a Dirichlet/Neumann trace pair of an exact solution built
as a convex combination of kernels centered at points outside the domain:
log kernels ``ln((x-xi)^2+(y-yi)^2)`` for the Laplace family, J0/Y0 parts
of the Hankel kernel for 2D Helmholtz, and re/im parts of
``e^{ikr}/(4 pi r)`` in 3D.  Pairs are normalized in two steps: subtract
the first Dirichlet entry (Laplace mode only; constants are harmonic) and
divide both traces by the max absolute Neumann value.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundaryGrid, DomainSpec, boundary_distance, contains
from .kernels import KernelSpec, bessel_j0, bessel_j1, bessel_y0, bessel_y1

_REJECTION_LIMIT = 10**6
_CHUNK = 4096


class ConfigurationError(ValueError):
    """Dataset settings cannot produce samples (e.g. box too small)."""


class DegenerateSampleError(ValueError):
    """Sample with an identically zero Neumann trace; cannot be normalized."""


@dataclass(frozen=True)
class NormRecord:
    """Invertible record of the two-step normalization."""

    subtracted_constant: float
    scale: float


@dataclass(frozen=True, eq=False)
class TracePair:
    """One training sample: Dirichlet trace g and Neumann trace h."""

    g: np.ndarray
    h: np.ndarray
    norm_record: NormRecord | None = None

    def __post_init__(self):
        self.g.setflags(write=False)
        self.h.setflags(write=False)


@dataclass(frozen=True)
class DatasetSpec:
    kernel: KernelSpec
    domain: DomainSpec
    n_points: int = 400
    n_samples: int = 10_000
    n_kernels_per_sample: int = 3
    source_box: tuple[float, ...] = (-7.0, 7.0)
    min_boundary_distance: float = 1e-3
    seed: int = 0
    anchor_index: int = 0  # Dirichlet entry subtracted in Laplace mode

    def __post_init__(self):
        if self.min_boundary_distance <= 0.0:
            raise ConfigurationError("min_boundary_distance must be positive")
        lo, hi = self.source_box
        if not lo < hi:
            raise ConfigurationError("source box must have positive extent")
        blo, bhi = self.domain.bounding_box()
        if not (np.all(blo > lo) and np.all(bhi < hi)):
            raise ConfigurationError("source box must strictly contain the domain")

    @property
    def normalization_mode(self) -> str:
        # Constants solve the Laplace equation but not Helmholtz, so only
        # the Laplace family gets the first-entry subtraction.
        return "laplace_mode" if self.kernel.family == "laplace2d" else "scale_only"

    def to_json(self) -> str:
        payload = {
            "kernel": {"family": self.kernel.family, "k": self.kernel.k},
            "domain": _domain_payload(self.domain),
            "n_points": self.n_points,
            "n_samples": self.n_samples,
            "n_kernels_per_sample": self.n_kernels_per_sample,
            "source_box": list(self.source_box),
            "min_boundary_distance": self.min_boundary_distance,
            "seed": self.seed,
            "anchor_index": self.anchor_index,
            "normalization": self.normalization_mode,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _domain_payload(domain: DomainSpec) -> dict:
    payload: dict = {"shape": domain.shape}
    if domain.shape in ("polar_curve", "multi_loop"):
        def curve(c):
            return {
                "base": c.base,
                "terms": [[t.kind, t.amplitude, t.frequency] for t in c.terms],
                "center": list(c.center),
            }

        payload["outer"] = curve(domain.outer)
        if domain.inner is not None:
            payload["inner"] = curve(domain.inner)
    elif domain.shape == "sphere3d":
        payload["center"] = list(domain.center3d)
        payload["radius"] = domain.radius3d
    return payload


def sample_source_points(spec: DatasetSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform points in the source box, outside the domain and at least
    ``min_boundary_distance`` from its boundary; deterministic per rng."""
    lo, hi = spec.source_box
    dim = spec.domain.dimension
    out = np.empty((n, dim))
    got = 0
    rejected = 0
    while got < n:
        cand = rng.uniform(lo, hi, size=(_CHUNK, dim))
        ok = ~contains(spec.domain, cand)
        ok &= boundary_distance(spec.domain, cand) >= spec.min_boundary_distance
        idx = np.nonzero(ok)[0]
        take = idx[: n - got]
        out[got : got + len(take)] = cand[take]
        got += len(take)
        if len(idx) == 0:
            rejected += _CHUNK
            if rejected >= _REJECTION_LIMIT:
                raise ConfigurationError(
                    "source sampling rejected 10^6 candidates; box too small"
                )
        else:
            rejected = 0
    return out


def sample_simplex_weights(n: int, rng: np.random.Generator) -> np.ndarray:
    """Sequential stick weights: c1 ~ U[0,1], each next uniform on what
    remains, the last takes the exact remainder; sums to 1, all >= 0."""
    if n < 1:
        raise ValueError("need at least one weight")
    c = np.empty(n)
    remainder = 1.0
    for i in range(n - 1):
        c[i] = rng.uniform(0.0, remainder)
        remainder -= c[i]
    c[n - 1] = remainder
    return c


def _log_kernel_traces(sources, weights, points, normals):
    # f_i = ln((x-xi)^2 + (y-yi)^2); grad f_i = 2 (p - xi) / r^2
    diff = points[None, :, :] - sources[:, None, :]
    r2 = np.sum(diff * diff, axis=2)
    g = weights @ np.log(r2)
    grad = 2.0 * diff / r2[:, :, None]
    h = weights @ np.einsum("spd,pd->sp", grad, normals)
    return g, h


def _helmholtz2d_traces(sources, weights, kinds, k, points, normals):
    # Per source, the kernel is J0(kr) or Y0(kr); the radial derivative is
    # -k J1(kr) resp. -k Y1(kr).
    diff = points[None, :, :] - sources[:, None, :]
    r = np.sqrt(np.sum(diff * diff, axis=2))
    kr = k * r
    val = np.empty_like(r)
    dval = np.empty_like(r)
    for s, kind in enumerate(kinds):
        if kind == 0:
            val[s] = bessel_j0(kr[s])
            dval[s] = -k * bessel_j1(kr[s])
        else:
            val[s] = bessel_y0(kr[s])
            dval[s] = -k * bessel_y1(kr[s])
    g = weights @ val
    proj = np.einsum("spd,pd->sp", diff, normals) / r
    h = weights @ (dval * proj)
    return g, h


def _helmholtz3d_traces(sources, weights, kinds, k, points, normals):
    diff = points[None, :, :] - sources[:, None, :]
    r = np.sqrt(np.sum(diff * diff, axis=2))
    kr = k * r
    c, s_ = np.cos(kr), np.sin(kr)
    denom = 4.0 * np.pi * r
    val = np.where(kinds[:, None] == 0, c, s_) / denom
    # d/dr of cos(kr)/(4 pi r) and sin(kr)/(4 pi r)
    d_re = (-kr * s_ - c) / (denom * r)
    d_im = (kr * c - s_) / (denom * r)
    dval = np.where(kinds[:, None] == 0, d_re, d_im)
    g = weights @ val
    proj = np.einsum("spd,pd->sp", diff, normals) / r
    h = weights @ (dval * proj)
    return g, h


def synthesize_trace_pair(
    spec: DatasetSpec,
    grid: BoundaryGrid,
    sources: np.ndarray,
    weights: np.ndarray,
    kinds: np.ndarray | None = None,
) -> TracePair:
    """Raw (un-normalized) trace pair of the convex kernel combination.

    ``kinds`` selects the J0/Y0 (or re/im in 3D) variant per source for
    the Helmholtz families; ignored for the log kernel.
    """
    sources = np.asarray(sources, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if len(sources) != len(weights):
        raise ValueError("need one weight per source")
    if np.any(contains(spec.domain, sources)):
        raise ValueError("kernel source inside the domain")
    fam = spec.kernel.family
    if fam == "laplace2d":
        g, h = _log_kernel_traces(sources, weights, grid.points, grid.normals)
    elif fam == "helmholtz2d":
        if kinds is None:
            kinds = np.zeros(len(sources), dtype=int)
        g, h = _helmholtz2d_traces(sources, weights, kinds, spec.kernel.k, grid.points, grid.normals)
    else:
        if kinds is None:
            kinds = np.zeros(len(sources), dtype=int)
        g, h = _helmholtz3d_traces(sources, weights, kinds, spec.kernel.k, grid.points, grid.normals)
    return TracePair(g=g, h=h)


def normalize_pair(pair: TracePair, mode: str, anchor_index: int = 0) -> TracePair:
    """Two-step normalization; stores an invertible :class:`NormRecord`.

    ``laplace_mode`` subtracts the anchor Dirichlet entry before scaling;
    ``scale_only`` just divides both traces by max |h|.
    """
    if mode not in ("laplace_mode", "scale_only"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    scale = float(np.max(np.abs(pair.h)))
    if scale == 0.0:
        raise DegenerateSampleError("Neumann trace is identically zero")
    shift = float(pair.g[anchor_index]) if mode == "laplace_mode" else 0.0
    g = (pair.g - shift) / scale
    h = pair.h / scale
    return TracePair(g=g, h=h, norm_record=NormRecord(shift, scale))


def denormalize_pair(pair: TracePair) -> TracePair:
    if pair.norm_record is None:
        raise ValueError("pair carries no normalization record")
    rec = pair.norm_record
    return TracePair(g=pair.g * rec.scale + rec.subtracted_constant, h=pair.h * rec.scale)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Normalized samples as row matrices plus provenance."""

    spec: DatasetSpec
    grid: BoundaryGrid
    g_rows: np.ndarray  # (n_samples, n_points)
    h_rows: np.ndarray
    records: tuple[NormRecord, ...] = field(repr=False, default=())

    def __post_init__(self):
        self.g_rows.setflags(write=False)
        self.h_rows.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.g_rows.shape[0]


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    # Independent per-sample stream so serial and parallel builds agree.
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def build_sample(spec: DatasetSpec, grid: BoundaryGrid, index: int) -> TracePair:
    """Deterministic normalized sample ``index`` of the dataset."""
    rng = _sample_rng(spec.seed, index)
    for _ in range(32):
        sources = sample_source_points(spec, rng, spec.n_kernels_per_sample)
        weights = sample_simplex_weights(spec.n_kernels_per_sample, rng)
        kinds = None
        if spec.kernel.family != "laplace2d":
            kinds = rng.integers(0, 2, size=spec.n_kernels_per_sample)
        raw = synthesize_trace_pair(spec, grid, sources, weights, kinds)
        try:
            return normalize_pair(raw, spec.normalization_mode, spec.anchor_index)
        except DegenerateSampleError:
            continue  # regenerate from the same stream
    raise DegenerateSampleError(f"sample {index}: could not draw a non-degenerate pair")


def build_dataset(spec: DatasetSpec, grid: BoundaryGrid | None = None) -> Dataset:
    """All samples of ``spec``; deterministic function of the seed."""
    if grid is None:
        from .geometry import make_boundary_grid

        grid = make_boundary_grid(spec.domain, spec.n_points)
    if grid.n_points != spec.n_points:
        raise ConfigurationError("grid size does not match the dataset spec")
    g_rows = np.empty((spec.n_samples, spec.n_points))
    h_rows = np.empty((spec.n_samples, spec.n_points))
    records = []
    for i in range(spec.n_samples):
        pair = build_sample(spec, grid, i)
        g_rows[i] = pair.g
        h_rows[i] = pair.h
        records.append(pair.norm_record)
    return Dataset(spec=spec, grid=grid, g_rows=g_rows, h_rows=h_rows, records=tuple(records))


# ---------------------------------------------------------------------------
# Serialization: CSV of alternating g/h rows plus a JSON sidecar
# ---------------------------------------------------------------------------


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["kind", "n_points"])
    for i in range(ds.n_samples):
        w.writerow(["g"] + [repr(float(v)) for v in ds.g_rows[i]])
        w.writerow(["h"] + [repr(float(v)) for v in ds.h_rows[i]])
    return buf.getvalue()


def dataset_from_csv(text: str, spec: DatasetSpec, grid: BoundaryGrid) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:2] != ["kind", "n_points"]:
        raise ValueError("line 1: expected dataset header 'kind,n_points'")
    g_list, h_list = [], []
    for ln, row in enumerate(rows[1:], start=2):
        kind, vals = row[0], np.array([float(v) for v in row[1:]])
        if kind == "g":
            g_list.append(vals)
        elif kind == "h":
            h_list.append(vals)
        else:
            raise ValueError(f"line {ln}: unknown row kind {kind!r}")
    if len(g_list) != len(h_list):
        raise ValueError("unpaired g/h rows")
    return Dataset(spec=spec, grid=grid, g_rows=np.array(g_list), h_rows=np.array(h_list))


def dataset_checksum(ds: Dataset) -> str:
    return hashlib.sha256(dataset_to_csv(ds).encode()).hexdigest()
