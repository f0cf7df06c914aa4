"""Ruelle-Sullivan current evaluation for linear foliations of the torus.

Two independent routes are provided.  The spectral route evaluates the
current in closed form: for the identity immersion with the normalised
invariant volume, pairing a k-form with the foliation reduces to the mean
coefficients contracted with the Pluecker coordinates of the leaf plane.
The quadrature route implements the defining flow-box sum for the
1-dimensional foliation of T^2: overlapping flow boxes (leaf segment x
orthogonal transversal), a smooth partition of unity, composite Gauss
quadrature along leaves and Lebesgue integration over transversals.
Agreement of the two routes is a nontrivial consistency check, since they
share no code path beyond the coefficient tables.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import lattice
from .errors import AtlasCoverageError, IncompatibleForms
from .foliation import FoliationFrame

# Flow-box geometry caps.  Outer boxes must embed injectively in the
# torus; with half-dimensions below these caps only the eight unit
# translates can obstruct injectivity, so the scan below is exhaustive.
_LEAF_HALF_OUTER = 0.62
_TRANS_HALF_CAP = 0.30
_INNER_SCALE = 0.9          # inner (bump-carrying) box, strictly inside outer
_CHAIN_SPAN_TARGET = 4.5    # leaf length along which box centres are spread
_COVERAGE_FLOOR = 1e-9
_GAUSS_ORDER = 8


# ----------------------------------------------------------------------
# ambient trigonometric forms

@dataclass(eq=False)
class AmbientForm:
    """Degree-k form on T^n with trigonometric polynomial coefficients.

    Columns follow ``lattice.multi_indices(n, degree)``: column I holds the
    Fourier table of the coefficient of dx_I.
    """

    n: int
    degree: int
    modes: np.ndarray
    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self):
        self.modes = np.ascontiguousarray(self.modes, dtype=np.int64)
        self.coeffs = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        ncols = len(lattice.multi_indices(self.n, self.degree))
        if self.coeffs.shape != (self.modes.shape[0], ncols):
            raise ValueError(f"coeffs must have shape (M, {ncols})")

    @property
    def columns(self) -> tuple[tuple[int, ...], ...]:
        return lattice.multi_indices(self.n, self.degree)

    def mean_coefficients(self) -> np.ndarray:
        """The m = 0 row (zero if absent): one mean per coefficient index."""
        zero = (self.modes == 0).all(axis=1)
        if not zero.any():
            return np.zeros(self.coeffs.shape[1], dtype=np.complex128)
        return self.coeffs[np.nonzero(zero)[0][0]].copy()


def ambient_from_table(n: int, degree: int, entries: Mapping[tuple, complex]) -> AmbientForm:
    """Build an ambient form from a {(mode, index_set): coefficient} mapping."""
    cols = lattice.multi_indices(n, degree)
    col_of = {I: i for i, I in enumerate(cols)}
    support = sorted({tuple(int(x) for x in m) for m, _ in entries} | {(0,) * n},
                     key=lambda m: (sum(x * x for x in m), m))
    modes = np.array(support, dtype=np.int64).reshape(len(support), n)
    row_of = {m: i for i, m in enumerate(support)}
    coeffs = np.zeros((len(support), len(cols)), dtype=np.complex128)
    for (m, I), c in entries.items():
        coeffs[row_of[tuple(int(x) for x in m)], col_of[lattice.validate_multi_index(I, n)]] += c
    return AmbientForm(n, degree, modes, coeffs)


def coordinate_form(n: int, axis: int) -> AmbientForm:
    """The constant 1-form dx_axis (axis in 1..n)."""
    return ambient_from_table(n, 1, {((0,) * n, (axis,)): 1.0 + 0j})


def ambient_differential(eta: AmbientForm) -> AmbientForm:
    """d of a trigonometric function: component i picks up 2*pi*i*m_i."""
    if eta.degree != 0:
        raise ValueError("ambient differential implemented for functions only")
    factors = 2j * np.pi * eta.modes.astype(np.float64)
    coeffs = factors * eta.coeffs[:, [0] * eta.n]
    return AmbientForm(eta.n, 1, eta.modes, coeffs, real=eta.real)


def random_ambient_form(n: int, degree: int, radius: float, decay: float,
                        seed: int) -> AmbientForm:
    """Seeded real trigonometric form with magnitudes (1 + ||m||)^(-decay)."""
    rng = np.random.default_rng(seed)
    modes = lattice.enumerate_ball(n, radius)
    ncols = len(lattice.multi_indices(n, degree))
    norms = np.sqrt((modes * modes).sum(axis=1))
    mag = (1.0 + norms) ** (-float(decay))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(len(modes), ncols))
    coeffs = mag[:, None] * np.exp(1j * phases)
    # conjugate-symmetrise: the ball is closed under negation and the
    # canonical order reverses within each norm shell under m -> -m
    lead = _lead_sign(modes)
    coeffs[lead == 0] = mag[lead == 0, None]
    neg = _negation_index(modes)
    mirror = lead < 0
    coeffs[mirror] = np.conj(coeffs[neg[mirror]])
    return AmbientForm(n, degree, modes, coeffs, real=True)


def _lead_sign(modes: np.ndarray) -> np.ndarray:
    sign = np.zeros(len(modes), dtype=np.int8)
    undecided = np.ones(len(modes), dtype=bool)
    for i in range(modes.shape[1]):
        hit = undecided & (modes[:, i] != 0)
        sign[hit] = np.sign(modes[hit, i])
        undecided &= ~hit
    return sign


def _negation_index(modes: np.ndarray) -> np.ndarray:
    norm_sq = (modes * modes).sum(axis=1)
    out = np.empty(len(modes), dtype=np.intp)
    start = 0
    for end in np.append(np.nonzero(np.diff(norm_sq))[0] + 1, len(modes)):
        out[start:end] = np.arange(end - 1, start - 1, -1)
        start = end
    return out


# ----------------------------------------------------------------------
# spectral (closed-form) evaluation

def homology_class(frame: FoliationFrame) -> np.ndarray:
    """Pluecker coordinates P_I = det of the I-rows of [w_1 ... w_k].

    These are the coordinates of the foliation's cycle class in the
    k-th homology of the torus, in the basis dual to dx_I.
    """
    k, n = frame.k, frame.n
    cols = lattice.multi_indices(n, k)
    out = np.empty(len(cols))
    for i, I in enumerate(cols):
        idx = [a - 1 for a in I]
        out[i] = np.linalg.det(frame.w[:, idx].T)
    return out


def rs_spectral(omega: AmbientForm, frame: FoliationFrame) -> float:
    """Closed-form current value: mean coefficients contracted with the
    Pluecker coordinates of the leaf plane (mass-one invariant volume)."""
    if omega.degree != frame.k:
        raise IncompatibleForms(f"form degree {omega.degree} != leaf dimension {frame.k}")
    if omega.n != frame.n:
        raise IncompatibleForms("ambient dimensions differ")
    means = omega.mean_coefficients()
    return float(np.real(means @ homology_class(frame)))


# ----------------------------------------------------------------------
# flow-box atlas for the 1-dimensional foliation of T^2

@dataclass(eq=False)
class FlowBoxAtlas:
    """Overlapping flow boxes covering T^2 for a linear 1-foliation.

    Each box is a rotated rectangle centred at ``centers[i]``: leaf
    coordinate s along ``direction`` with |s| < leaf_half, transversal
    coordinate t along ``normal`` with |t| < trans_half, carried with the
    Lebesgue measure scaled by ``measure_scale``.  Bumps live on the inner
    rectangle, whose closure sits strictly inside the (still injective)
    outer rectangle.
    """

    direction: np.ndarray
    normal: np.ndarray
    centers: np.ndarray
    leaf_half: float
    trans_half: float
    leaf_half_outer: float
    trans_half_outer: float
    measure_scale: float = 1.0
    coverage_min: float = float("nan")
    partition_residual: float = float("nan")
    _grids: dict = field(default_factory=dict, repr=False)

    @property
    def box_count(self) -> int:
        return len(self.centers)

    def spec(self) -> dict:
        return {
            "box_count": int(self.box_count),
            "leaf_half": float(self.leaf_half),
            "trans_half": float(self.trans_half),
            "leaf_half_outer": float(self.leaf_half_outer),
            "trans_half_outer": float(self.trans_half_outer),
            "direction": [float(x) for x in self.direction],
            "centers": [[float(x) for x in c] for c in self.centers],
            "measure_scale": float(self.measure_scale),
            "coverage_min": float(self.coverage_min),
            "partition_residual": float(self.partition_residual),
        }


def _bump(x: np.ndarray) -> np.ndarray:
    """Standard smooth bump exp(-1/(1 - x^2)) supported on |x| < 1."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = np.exp(-1.0 / (1.0 - xi * xi))
    return out


_UNIT_TRANSLATES = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=2)))


def _bump_sum(atlas: FlowBoxAtlas, points: np.ndarray) -> np.ndarray:
    """Sum of all box bumps at torus points (wrapped over unit translates)."""
    pts = np.mod(points, 1.0)
    total = np.zeros(pts.shape[:-1])
    for c in atlas.centers:
        for v in _UNIT_TRANSLATES:
            delta = pts - c - v
            s = delta @ atlas.direction
            t = delta @ atlas.normal
            hit = (np.abs(s) < atlas.leaf_half) & (np.abs(t) < atlas.trans_half)
            if hit.any():
                total[hit] += (_bump(s[hit] / atlas.leaf_half)
                               * _bump(t[hit] / atlas.trans_half))
    return total


def build_kronecker_atlas(alpha: Sequence[float], box_count: int, *,
                          measure_scale: float = 1.0, verify: bool = True,
                          grid: int = 256) -> FlowBoxAtlas:
    """Construct overlapping flow boxes for the line flow of direction alpha.

    Boxes are chained along the leaf through the origin; their transversal
    width is chosen below the injectivity limit of the rotated rectangle.
    With ``verify`` the partition of unity is checked on a grid x grid
    sample: full coverage and sum of weights equal to one.  Directions or
    box counts that fail to cover raise AtlasCoverageError (more boxes
    help).
    """
    a = np.asarray(alpha, dtype=np.float64)
    if a.shape != (2,) or not np.all(np.isfinite(a)) or not np.any(a != 0.0):
        raise ValueError("alpha must be a nonzero finite vector in R^2")
    if box_count < 2:
        raise ValueError("need at least two flow boxes for an overlapping cover")
    u = a / np.linalg.norm(a)
    nvec = np.array([-u[1], u[0]])

    leaf_out = _LEAF_HALF_OUTER
    limit = math.inf
    for v in _UNIT_TRANSLATES:
        if not np.any(v):
            continue
        if abs(v @ u) < 2.0 * leaf_out:
            limit = min(limit, abs(v @ nvec))
    trans_out = min(_TRANS_HALF_CAP, 0.49 * limit)
    if trans_out <= 0.0:
        raise AtlasCoverageError("direction admits no injective flow box at this size")

    leaf_in = _INNER_SCALE * leaf_out
    trans_in = _INNER_SCALE * trans_out
    span = min(_CHAIN_SPAN_TARGET, 1.9 * leaf_in * box_count)
    step = span / box_count
    centers = np.mod(np.outer(np.arange(box_count) * step, u), 1.0)

    atlas = FlowBoxAtlas(direction=u, normal=nvec, centers=centers,
                         leaf_half=leaf_in, trans_half=trans_in,
                         leaf_half_outer=leaf_out, trans_half_outer=trans_out,
                         measure_scale=float(measure_scale))
    if verify:
        xs = (np.arange(grid) + 0.5) / grid
        pts = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
        total = _bump_sum(atlas, pts)
        atlas.coverage_min = float(total.min())
        if atlas.coverage_min < _COVERAGE_FLOOR:
            raise AtlasCoverageError(
                f"{box_count} boxes leave gaps (min bump sum {atlas.coverage_min:.2e}); "
                "increase the box count")
        # evaluate each normalised weight independently and sum
        rho_sum = np.zeros(len(pts))
        for c in atlas.centers:
            for v in _UNIT_TRANSLATES:
                delta = np.mod(pts, 1.0) - c - v
                s = delta @ u
                t = delta @ nvec
                hit = (np.abs(s) < leaf_in) & (np.abs(t) < trans_in)
                if hit.any():
                    rho_sum[hit] += (_bump(s[hit] / leaf_in) * _bump(t[hit] / trans_in)
                                     / total[hit])
        atlas.partition_residual = float(np.abs(rho_sum - 1.0).max())
        if atlas.partition_residual > 1e-10:
            raise AtlasCoverageError(
                f"partition of unity residual {atlas.partition_residual:.2e}")
    return atlas


def holonomy_translation_residual(atlas: FlowBoxAtlas, samples: int = 7) -> float:
    """Deviation of chart transitions from pure transversal translations.

    Between overlapping boxes the change of chart must send (s, t) to
    (s + ds, t + dt) with constant shifts, so holonomy acts on transversals
    by translations and preserves Lebesgue measure exactly.  Returns the
    largest deviation of the transversal shift from constancy.
    """
    worst = 0.0
    ss = np.linspace(-atlas.leaf_half, atlas.leaf_half, samples)
    ts = np.linspace(-atlas.trans_half, atlas.trans_half, samples)
    grid = np.stack(np.meshgrid(ss, ts, indexing="ij"), axis=-1).reshape(-1, 2)
    for i in range(atlas.box_count):
        ci = atlas.centers[i]
        pts = ci + np.outer(grid[:, 0], atlas.direction) + np.outer(grid[:, 1], atlas.normal)
        for j in range(atlas.box_count):
            if i == j:
                continue
            shifts = []
            for v in _UNIT_TRANSLATES:
                delta = pts - atlas.centers[j] - v
                s = delta @ atlas.direction
                t = delta @ atlas.normal
                hit = (np.abs(s) < atlas.leaf_half_outer) & (np.abs(t) < atlas.trans_half_outer)
                if hit.any():
                    shifts.append(t[hit] - grid[hit, 1])
            if shifts:
                allshifts = np.concatenate(shifts)
                # holonomy between two boxes may differ per overlap sheet;
                # within a sheet (same translate) the shift is constant
                for sh in shifts:
                    worst = max(worst, float(sh.max() - sh.min()))
    return worst


# ----------------------------------------------------------------------
# nested quadrature

def _composite_gauss(half: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
    edges = np.linspace(-half, half, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    h = 0.5 * (edges[1] - edges[0])
    x = (mid[:, None] + h * nodes[None, :]).ravel()
    w = np.tile(h * weights, panels)
    return x, w


def _box_grids(atlas: FlowBoxAtlas, resolution: int) -> list[dict]:
    cached = atlas._grids.get(resolution)
    if cached is not None:
        return cached
    panels_s = max(1, int(resolution) // _GAUSS_ORDER)
    panels_t = max(1, round(panels_s * atlas.trans_half / atlas.leaf_half))
    s_nodes, s_w = _composite_gauss(atlas.leaf_half, panels_s)
    t_nodes, t_w = _composite_gauss(atlas.trans_half, panels_t)
    grids = []
    for c in atlas.centers:
        pts = (c[None, None, :]
               + s_nodes[:, None, None] * atlas.direction[None, None, :]
               + t_nodes[None, :, None] * atlas.normal[None, None, :])
        total = _bump_sum(atlas, pts)
        own = np.outer(_bump(s_nodes / atlas.leaf_half), _bump(t_nodes / atlas.trans_half))
        rho = np.where(own > 0.0, own / np.where(total > 0.0, total, 1.0), 0.0)
        grids.append({"s": s_nodes, "sw": s_w, "t": t_nodes, "tw": t_w,
                      "rho": rho, "center": c})
    atlas._grids[resolution] = grids
    return grids


def _leaf_component_value(atlas: FlowBoxAtlas, omega: AmbientForm, grids: list[dict]) -> float:
    """Sum over boxes of the weighted leaf-line integrals of the 1-form."""
    u = atlas.direction
    freq_u = 2.0 * np.pi * (omega.modes @ u)
    freq_t = 2.0 * np.pi * (omega.modes @ atlas.normal)
    # contract the two coefficient columns with the leaf direction first
    w_leaf = omega.coeffs[:, 0] * u[0] + omega.coeffs[:, 1] * u[1]
    total = 0.0
    for g in grids:
        phase_c = np.exp(2j * np.pi * (omega.modes @ g["center"]))
        amp = w_leaf * phase_c
        a_grid = np.exp(1j * np.outer(freq_u, g["s"]))
        b_grid = np.exp(1j * np.outer(freq_t, g["t"]))
        values = ((a_grid * amp[:, None]).T @ b_grid).real
        total += float(g["sw"] @ (g["rho"] * values) @ g["tw"])
    return total * atlas.measure_scale


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    estimated_error: float
    resolution: int


def rs_quadrature(atlas: FlowBoxAtlas, omega: AmbientForm, resolution: int) -> QuadratureResult:
    """Flow-box evaluation of the current on a 1-form over T^2.

    Composite Gauss rule along each local leaf, then along the transversal
    with its Lebesgue measure, summed over boxes.  The error estimate is a
    Richardson-style comparison with the half-resolution value.
    """
    if omega.degree != 1 or omega.n != 2:
        raise IncompatibleForms("quadrature route implemented for 1-forms on T^2")
    if resolution < 2 * _GAUSS_ORDER:
        raise ValueError(f"resolution must be >= {2 * _GAUSS_ORDER}")
    fine = _leaf_component_value(atlas, omega, _box_grids(atlas, resolution))
    coarse = _leaf_component_value(atlas, omega, _box_grids(atlas, resolution // 2))
    return QuadratureResult(value=fine,
                            estimated_error=abs(fine - coarse) + 1e-15,
                            resolution=int(resolution))


def exactness_check(atlas: FlowBoxAtlas, eta: AmbientForm, resolution: int) -> float:
    """Evaluate the current on d(eta) by quadrature; small residual attests
    that the current is closed."""
    if eta.degree != 0:
        raise ValueError("exactness check expects a degree-0 form")
    return abs(rs_quadrature(atlas, ambient_differential(eta), resolution).value)


# ----------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class CurrentReport:
    """One current evaluation with provenance and the cycle class."""

    value: float
    method: str
    estimated_error: float
    homology_class: tuple[float, ...]
    measure_normalization: float
    atlas_spec: dict | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "estimatedError": self.estimated_error,
            "homologyClass": list(self.homology_class),
            "measureNormalization": self.measure_normalization,
            "atlasSpec": self.atlas_spec,
        }


def spectral_report(omega: AmbientForm, frame: FoliationFrame) -> CurrentReport:
    value = rs_spectral(omega, frame)
    return CurrentReport(value=value, method="spectral", estimated_error=0.0,
                         homology_class=tuple(float(x) for x in homology_class(frame)),
                         measure_normalization=1.0, atlas_spec=None)


def quadrature_report(atlas: FlowBoxAtlas, omega: AmbientForm, resolution: int,
                      frame: FoliationFrame) -> CurrentReport:
    result = rs_quadrature(atlas, omega, resolution)
    return CurrentReport(value=result.value, method="quadrature",
                         estimated_error=result.estimated_error,
                         homology_class=tuple(float(x) for x in homology_class(frame)),
                         measure_normalization=atlas.measure_scale,
                         atlas_spec=atlas.spec())
