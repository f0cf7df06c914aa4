"""Small-divisor analysis for linear flows on the torus.

For a direction alpha in R^n the quantities |<m, alpha>| over integer
modes m control the solvability of the primitive equation
D_alpha f = g: the solution coefficients are a_m = b_m / <m, alpha>.
This module scans for Minkowski witnesses (|<m, alpha>| < 1 / ||m||),
tracks record divisors, fits an empirical diophantine exponent, builds
witness sequences realising divergent primitives, and solves the
primitive equation with diagnostics.

Conventions: divisors use the raw, unnormalised direction vector, so the
per-mode multiplier here is <m, alpha> itself (no 2 pi factor).  The
exterior calculus in :mod:`solhodge.forms` differs by the constant
2 pi i / ||alpha||, which changes no kernel and no dimension count.

Sign canonicalisation: of {m, -m} the representative with <m, alpha> > 0
is reported (first nonzero entry positive when the divisor vanishes), so
divisors double as the witness coefficients b_m = <m, alpha>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import lattice
from .errors import (InsufficientData, InsufficientWitnesses,
                     NotSolvableConstantObstruction, ResonantDirection)
from .forms import FourierForm, _derived, _leading_sign
from .foliation import FoliationFrame

# Divisors below this are suspected resonances: a floating scan cannot
# tell a true rational relation from rounding at this scale.
DIVISOR_FLOOR = 1e-13


@dataclass(frozen=True)
class DirectionVector:
    """Unnormalised leaf direction with the user's independence claim."""

    alpha: tuple[float, ...]
    claimed_independence: bool = True

    def __post_init__(self):
        if not any(a != 0.0 for a in self.alpha):
            raise ValueError("direction vector must be nonzero")


def _as_alpha(direction) -> np.ndarray:
    if isinstance(direction, DirectionVector):
        arr = np.asarray(direction.alpha, dtype=np.float64)
    else:
        arr = np.asarray(direction, dtype=np.float64)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)) or not np.any(arr != 0.0):
        raise ValueError("direction must be a finite nonzero vector")
    return arr


@dataclass(frozen=True)
class DivisorRecord:
    """One scanned mode with its divisor and classification flags."""

    mode: tuple[int, ...]
    divisor: float
    norm: float
    is_record: bool
    is_minkowski_witness: bool


def _divisor_scan(direction, radius: float):
    """Canonical nonzero modes with divisors, plus the record subset.

    Returns (modes (M, n), divisors (M,), norm_sq (M,), record_mask (M,)).
    Modes are one representative per {m, -m} pair, ordered canonically.
    A record strictly improves the running divisor minimum over all modes
    of smaller or equal norm and satisfies the Minkowski inequality
    divisor * ||m|| < 1.
    """
    alpha = _as_alpha(direction)
    if radius < 1:
        raise ValueError("scan radius must be >= 1")
    ball = lattice.enumerate_ball(len(alpha), radius)[1:]
    dots = ball @ alpha
    lead = _leading_sign(ball)
    keep = (dots > 0.0) | ((dots == 0.0) & (lead > 0))
    modes = ball[keep]
    divisors = dots[keep]
    norm_sq = (modes * modes).sum(axis=1)

    order = np.lexsort(tuple(modes[:, i] for i in range(modes.shape[1] - 1, -1, -1))
                       + (divisors, norm_sq))
    shell_first = np.unique(norm_sq[order], return_index=True)[1]
    cand = order[shell_first]  # per-shell divisor minimiser, ties by mode order

    record_mask = np.zeros(len(modes), dtype=bool)
    best = math.inf
    for idx in cand:
        d = divisors[idx]
        if d < best:
            best = d
            if d * math.sqrt(norm_sq[idx]) < 1.0:
                record_mask[idx] = True
    return modes, divisors, norm_sq, record_mask


def _make_records(modes, divisors, norm_sq, record_mask, select) -> list[DivisorRecord]:
    out = []
    for i in np.nonzero(select)[0]:
        nrm = math.sqrt(norm_sq[i])
        out.append(DivisorRecord(
            mode=tuple(int(x) for x in modes[i]),
            divisor=float(divisors[i]),
            norm=nrm,
            is_record=bool(record_mask[i]),
            is_minkowski_witness=bool(divisors[i] * nrm < 1.0),
        ))
    return out


def minkowski_witnesses(direction, radius: float) -> list[DivisorRecord]:
    """All modes with 0 < ||m|| <= radius and divisor * ||m|| < 1.

    One canonical representative per {m, -m}, ordered by (norm, mode).
    An empty list for small radii is a valid outcome.
    """
    modes, divisors, norm_sq, record_mask = _divisor_scan(direction, radius)
    witness = divisors * np.sqrt(norm_sq) < 1.0
    return _make_records(modes, divisors, norm_sq, record_mask, witness)


def record_divisors(direction, radius: float) -> list[DivisorRecord]:
    """Running divisor minima (strictly decreasing, strictly increasing norm).

    A divisor of exactly zero appears as the final record and flags a
    resonance: the direction satisfies an integer relation in range.
    """
    modes, divisors, norm_sq, record_mask = _divisor_scan(direction, radius)
    return _make_records(modes, divisors, norm_sq, record_mask, record_mask)


# ----------------------------------------------------------------------
# continued fractions (n = 2 accelerator and cross-check)

@dataclass(frozen=True)
class ContinuedFraction:
    """Partial quotients and convergents of a floating-point number.

    The expansion is computed exactly on the binary rational the double
    represents; ``terminated`` flags that it ended before the requested
    depth.
    """

    quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    terminated: bool


def continued_fraction(x: float, depth: int) -> ContinuedFraction:
    """Partial quotients [a0; a1, ..., a_depth] and convergents p_i / q_i."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not math.isfinite(x):
        raise ValueError("x must be finite")
    value = Fraction(x)  # exact binary value of the double
    quotients: list[int] = []
    convergents: list[tuple[int, int]] = []
    p_prev, q_prev = 1, 0
    p_pprev, q_pprev = 0, 1
    terminated = False
    rest = value
    for _ in range(depth + 1):
        a = math.floor(rest)
        quotients.append(int(a))
        p, q = a * p_prev + p_pprev, a * q_prev + q_pprev
        convergents.append((p, q))
        p_pprev, q_pprev, p_prev, q_prev = p_prev, q_prev, p, q
        frac = rest - a
        if frac == 0:
            terminated = True
            break
        rest = 1 / frac
    return ContinuedFraction(tuple(quotients), tuple(convergents), terminated)


def convergent_modes(direction, radius: float, depth: int = 64) -> list[tuple[int, ...]]:
    """Canonical modes (-p_i, q_i) from convergents of alpha_2 / alpha_1,
    restricted to the scan ball.  Only defined for n = 2 directions with
    alpha_1 != 0."""
    alpha = _as_alpha(direction)
    if alpha.shape != (2,) or alpha[0] == 0.0:
        raise ValueError("convergent cross-check needs n = 2 and alpha_1 != 0")
    cf = continued_fraction(alpha[1] / alpha[0], depth)
    out = []
    for p, q in cf.convergents:
        if q == 0:
            continue
        if p * p + q * q > radius * radius:
            break
        m = (-p, q)
        if m[0] * alpha[0] + m[1] * alpha[1] < 0:
            m = (p, -q)
        out.append(m)
    return out


# ----------------------------------------------------------------------
# diophantine exponent

@dataclass(frozen=True)
class DiophantineEstimate:
    """Least-squares fit of record divisors against mode norms.

    ``slope`` solves log(divisor) ~ intercept - slope * log(norm) over the
    records; ``tau_hat`` = max(slope - n, 0) and ``gamma_hat`` come from
    reading the fit as divisor >= gamma / norm^(n + tau).
    """

    tau_hat: float
    gamma_hat: float
    scan_radius: float
    residual: float
    slope: float
    n: int
    n_records: int


def estimate_exponent(records: Sequence[DivisorRecord], *,
                      scan_radius: float | None = None,
                      divisor_floor: float = DIVISOR_FLOOR) -> DiophantineEstimate:
    """Fit the record envelope divisor ~ gamma / norm^slope."""
    if any(r.divisor < divisor_floor for r in records):
        raise ResonantDirection("a record divisor sits below the resonance floor")
    if len(records) < 3:
        raise InsufficientData(f"need >= 3 records, got {len(records)}")
    x = np.log([r.norm for r in records])
    y = np.log([r.divisor for r in records])
    if np.ptp(x) < 1e-9:
        raise InsufficientData("record norms are degenerate; cannot fit an exponent")
    coeff = np.polyfit(x, y, 1)
    slope = -float(coeff[0])
    intercept = float(coeff[1])
    residual = float(np.sqrt(np.mean((np.polyval(coeff, x) - y) ** 2)))
    n = len(records[0].mode)
    return DiophantineEstimate(
        tau_hat=max(slope - n, 0.0),
        gamma_hat=math.exp(intercept),
        scan_radius=float(scan_radius if scan_radius is not None else max(r.norm for r in records)),
        residual=residual,
        slope=slope,
        n=n,
        n_records=len(records),
    )


# ----------------------------------------------------------------------
# witness sequences

@dataclass(frozen=True)
class WitnessSequence:
    """Distinct modes with divisors tending to zero and data b_m = <m, alpha>.

    The induced primitive candidate has a_m = b_m / <m, alpha> = 1 on every
    member, so its squared norm grows by one per witness: the divergence is
    exhibited exactly.
    """

    modes: tuple[tuple[int, ...], ...]
    coefficients: tuple[float, ...]
    divisors: tuple[float, ...]

    def data_partial_sums(self) -> np.ndarray:
        """Cumulative sums of b_m^2 (finite, decreasing increments)."""
        b = np.asarray(self.coefficients)
        return np.cumsum(b * b)

    def solution_partial_sums(self) -> np.ndarray:
        """Cumulative sums of (b_m / divisor)^2; equals 1, 2, 3, ..."""
        b = np.asarray(self.coefficients)
        d = np.asarray(self.divisors)
        if len(b) == 0:
            return np.zeros(0)
        return np.cumsum((b / d) ** 2)


def build_witness_sequence(direction, radius: float, count: int) -> WitnessSequence:
    """First ``count`` record witnesses, with data b_m = <m, alpha>."""
    if count < 0:
        raise ValueError("count must be >= 0")
    records = record_divisors(direction, radius)
    if any(r.divisor < DIVISOR_FLOOR for r in records[:count]):
        raise ResonantDirection("witness scan hit a (suspected) resonance")
    if len(records) < count:
        raise InsufficientWitnesses(
            f"only {len(records)} witnesses within radius {radius}, need {count}")
    chosen = records[:count]
    return WitnessSequence(
        modes=tuple(r.mode for r in chosen),
        coefficients=tuple(r.divisor for r in chosen),
        divisors=tuple(r.divisor for r in chosen),
    )


def witness_families(direction, radius: float, count: int, families: int) -> list[WitnessSequence]:
    """``families`` pairwise disjoint witness sequences of length ``count``.

    Round-robins the record list, so supports are disjoint and each family
    keeps strictly decreasing divisors; the induced primitive classes are
    independent because their supports do not meet.
    """
    if families < 1:
        raise ValueError("families must be >= 1")
    records = record_divisors(direction, radius)
    if len(records) < count * families:
        raise InsufficientWitnesses(
            f"only {len(records)} witnesses within radius {radius}, need {count * families}")
    out = []
    for i in range(families):
        chosen = records[i::families][:count]
        out.append(WitnessSequence(
            modes=tuple(r.mode for r in chosen),
            coefficients=tuple(r.divisor for r in chosen),
            divisors=tuple(r.divisor for r in chosen),
        ))
    return out


# ----------------------------------------------------------------------
# the primitive (cohomological) equation

def direction_derivative(f: FourierForm, direction) -> FourierForm:
    """Data form of the derivative along alpha: b_m = <m, alpha> * a_m.

    Input is a degree-0 form over a line frame (k = 1); the result is the
    degree-1 coefficient table of D_alpha f, in the raw-alpha convention
    used throughout this module.
    """
    if f.degree != 0 or f.frame.k != 1:
        raise ValueError("expected a function over a line (k = 1) frame")
    alpha = _as_alpha(direction)
    dots = f.modes @ alpha
    return _derived(f, 1, f.coeffs * dots[:, None], real=False)


@dataclass(eq=False)
class CohomologicalSolution:
    """Primitive of a 1-form along the flow, with divergence diagnostics."""

    solution: FourierForm
    l2_by_radius: list[tuple[float, float]]
    divergence_slope: float | None
    small_divisor_modes: list[tuple[int, ...]]


def solve_cohomological(g: FourierForm, direction, *,
                        divisor_floor: float = DIVISOR_FLOOR,
                        mean_tol: float = 1e-12) -> CohomologicalSolution:
    """Solve D_alpha f = g per mode: a_m = b_m / <m, alpha>.

    Requires mean-free data (a nonzero b_0 is a constant obstruction) and
    a divisor-free scan: an exactly zero divisor raises ResonantDirection.
    Divisors below ``divisor_floor`` are still divided; the offending
    modes are listed in the diagnostics.
    """
    if g.degree != 1 or g.frame.k != 1:
        raise ValueError("expected a degree-1 form over a line (k = 1) frame")
    alpha = _as_alpha(direction)
    b = g.coeffs[:, 0]
    zero_row = (g.modes == 0).all(axis=1)
    if np.any(zero_row) and np.abs(b[zero_row]).max(initial=0.0) > mean_tol:
        raise NotSolvableConstantObstruction(
            "data has a nonzero mean; constants are not derivatives along the flow")
    dots = g.modes @ alpha.astype(np.float64)
    resonant = (dots == 0.0) & ~zero_row
    if resonant.any():
        raise ResonantDirection(
            f"exactly vanishing divisor at modes {[tuple(m) for m in g.modes[resonant][:4]]}")

    a = np.zeros_like(b)
    nz = ~zero_row
    a[nz] = b[nz] / dots[nz]
    small = nz & (np.abs(dots) < divisor_floor)
    small_modes = [tuple(int(x) for x in m) for m in g.modes[small]]

    norm_sq = (g.modes * g.modes).sum(axis=1)
    radii = [g.radius / 4.0, g.radius / 2.0, g.radius]
    l2 = [float(np.sqrt((np.abs(a) ** 2)[norm_sq <= rho * rho].sum())) for rho in radii]
    positive = [(rho, v) for rho, v in zip(radii, l2) if v > 0.0]
    slope = None
    if len(positive) >= 2:
        xs = np.log([rho for rho, _ in positive])
        ys = np.log([v for _, v in positive])
        if np.ptp(xs) > 0:
            slope = float(np.polyfit(xs, ys, 1)[0])

    solution = _derived(g, 0, a[:, None], real=False)
    return CohomologicalSolution(
        solution=solution,
        l2_by_radius=list(zip(radii, l2)),
        divergence_slope=slope,
        small_divisor_modes=small_modes,
    )


# ----------------------------------------------------------------------
# decay transfer

@dataclass(frozen=True)
class DecayTransferReport:
    """Observed polynomial decay of primitives of polynomially decaying data.

    Data |b_m| = (1 + ||m||)^(-input_decay) is divided by the record
    divisors (the decay envelope); ``fitted_output_decay`` is the
    least-squares exponent of |a_m| over the records.  A diophantine
    direction keeps fitted_output_decay >= input_decay - (n + tau_hat) -
    slack; falling below flags Liouville-like loss.
    """

    input_decay: float
    fitted_output_decay: float
    bound: float
    slack: float
    satisfies_bound: bool
    liouville_flag: bool
    n_records: int
    radius: float


def decay_transfer_report(direction, estimate: DiophantineEstimate, input_decay: float,
                          *, radius: float = 1000.0, slack: float = 0.2) -> DecayTransferReport:
    """Fit the solution decay exponent for envelope data of the given decay."""
    alpha = _as_alpha(direction)
    n = len(alpha)
    if not input_decay > n + estimate.tau_hat + 1:
        raise ValueError(
            f"input decay {input_decay} must exceed n + tau_hat + 1 = {n + estimate.tau_hat + 1}")
    records = record_divisors(direction, radius)
    if len(records) < 3:
        raise InsufficientData("need >= 3 records to fit the output decay")
    norms = np.array([r.norm for r in records])
    divisors = np.array([r.divisor for r in records])
    amp = (1.0 + norms) ** (-float(input_decay)) / divisors
    slope = -float(np.polyfit(np.log(1.0 + norms), np.log(amp), 1)[0])
    bound = float(input_decay) - (n + estimate.tau_hat) - slack
    ok = slope >= bound
    return DecayTransferReport(
        input_decay=float(input_decay),
        fitted_output_decay=slope,
        bound=bound,
        slack=slack,
        satisfies_bound=ok,
        liouville_flag=not ok,
        n_records=len(records),
        radius=float(radius),
    )


def line_frame(direction, minimality_asserted: bool = True) -> FoliationFrame:
    """Frame of the 1-dimensional foliation spanned by alpha."""
    alpha = _as_alpha(direction)
    from .foliation import build_frame
    return build_frame([alpha], minimality_asserted=minimality_asserted)
