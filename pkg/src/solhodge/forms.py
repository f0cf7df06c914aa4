"""Leafwise exterior calculus on truncated Fourier coefficient tables.

A degree-p form is stored as a table of complex coefficients indexed by
(lattice mode m, multi-index J), kept as a dense (modes x columns) array
whose columns follow the lexicographic multi-index order of
``lattice.multi_indices``.  All operators here act mode by mode, so the
algebraic identities (d o d = 0, adjointness, star duality, the Hodge
decomposition) hold per mode up to floating point rounding; truncation
only limits which forms are representable, not operator accuracy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import lattice
from .errors import IncompatibleForms, SmallDivisorWarning
from .foliation import FoliationFrame, frequencies

# Serialization drops coefficients at or below this magnitude (zero entries
# at m = 0 are always kept: they carry the harmonic content).
DROP_TOL = 1e-15
# Thresholds on sum_j <m, w_j>^2 = lambda(m) / (4 pi^2):
# below KERNEL_TOL a mode counts as harmonic, between the two the Green
# operator still divides but attaches a SmallDivisorWarning.
KERNEL_TOL = 1e-14
SMALL_DIVISOR_FLOOR = 1e-13

_FOUR_PI_SQ = 4.0 * np.pi**2


@dataclass(eq=False)
class FourierForm:
    """Degree-p leafwise form with finitely many Fourier modes.

    ``modes`` is an (M, n) int64 array in canonical ball order
    (norm squared, then lexicographic); ``coeffs`` is (M, C(k, p)) complex.
    Values are treated as immutable after construction.
    """

    frame: FoliationFrame
    degree: int
    radius: float
    modes: np.ndarray
    coeffs: np.ndarray
    real: bool = False
    degree_clamped: bool = False
    _xi: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        k = self.frame.k
        if not 0 <= self.degree <= k:
            raise ValueError(f"degree {self.degree} outside 0..{k}")
        self.modes = np.ascontiguousarray(self.modes, dtype=np.int64)
        ncols = len(lattice.multi_indices(k, self.degree))
        self.coeffs = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        if self.modes.ndim != 2 or self.modes.shape[1] != self.frame.n:
            raise ValueError(f"modes must have shape (M, {self.frame.n})")
        if self.coeffs.shape != (self.modes.shape[0], ncols):
            raise ValueError(f"coeffs must have shape (M, {ncols})")

    @property
    def columns(self) -> tuple[tuple[int, ...], ...]:
        """Multi-indices labelling the coefficient columns."""
        return lattice.multi_indices(self.frame.k, self.degree)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def coefficient(self, mode: Sequence[int], index: Sequence[int] = ()) -> complex:
        """Single table entry; absent modes read as zero."""
        idx = lattice.validate_multi_index(index, self.frame.k)
        if len(idx) != self.degree:
            raise ValueError(f"index {idx} has wrong cardinality for degree {self.degree}")
        col = self.columns.index(idx)
        m = np.asarray(mode, dtype=np.int64)
        row = _find_rows(self.modes, m[None, :])[0]
        if row < 0:
            return 0j
        return complex(self.coeffs[row, col])

    def __add__(self, other: "FourierForm") -> "FourierForm":
        _check_compatible(self, other)
        modes, ca, cb = _union_tables(self, other)
        return FourierForm(self.frame, self.degree, max(self.radius, other.radius),
                           modes, ca + cb, real=self.real and other.real)

    def __sub__(self, other: "FourierForm") -> "FourierForm":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "FourierForm":
        c = complex(scalar)
        real = self.real and c.imag == 0.0
        out = FourierForm(self.frame, self.degree, self.radius, self.modes,
                          self.coeffs * c, real=real)
        out._xi = self._xi
        return out

    __rmul__ = __mul__

    def is_real(self, tol: float = 1e-12) -> bool:
        """Check conjugate symmetry f(-m) = conj(f(m)) of the table."""
        neg_rows = _find_rows(self.modes, -self.modes)
        ok = neg_rows >= 0
        if not ok.all():
            # a mode without its mirror and with mass cannot be symmetric
            if np.abs(self.coeffs[~ok]).max(initial=0.0) > tol:
                return False
        mirrored = np.conj(self.coeffs[neg_rows[ok]])
        return bool(np.abs(self.coeffs[ok] - mirrored).max(initial=0.0) <= tol)


# ----------------------------------------------------------------------
# support bookkeeping

def _mode_sort_keys(modes: np.ndarray) -> np.ndarray:
    """Injective int64 key realising the canonical (norm^2, lex) order."""
    modes = np.asarray(modes, dtype=np.int64)
    m_abs = int(np.abs(modes).max(initial=0))
    base = 2 * m_abs + 3
    offset = m_abs + 1
    norm_sq = (modes * modes).sum(axis=1)
    span = int(norm_sq.max(initial=0)) + 1
    if (span + 1) * base ** modes.shape[1] >= 2**62:
        raise OverflowError("mode table too large to key")
    key = norm_sq.copy()
    for i in range(modes.shape[1]):
        key = key * base + (modes[:, i] + offset)
    return key

def _find_rows(table: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Row index of each query mode in a canonically ordered table, -1 if absent."""
    all_modes = np.vstack([table, queries])
    keys = _mode_sort_keys(all_modes)
    tk, qk = keys[: len(table)], keys[len(table):]
    pos = np.searchsorted(tk, qk)
    pos = np.minimum(pos, len(tk) - 1) if len(tk) else np.zeros(len(qk), dtype=np.intp)
    hit = len(tk) > 0
    found = np.where(hit & (tk[pos] == qk), pos, -1) if len(tk) else np.full(len(qk), -1)
    return found.astype(np.intp)

def _union_tables(a: FourierForm, b: FourierForm):
    if a.modes is b.modes or (a.modes.shape == b.modes.shape and np.array_equal(a.modes, b.modes)):
        return a.modes, a.coeffs, b.coeffs
    stacked = np.vstack([a.modes, b.modes])
    keys = _mode_sort_keys(stacked)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    first = np.ones(len(sorted_keys), dtype=bool)
    first[1:] = sorted_keys[1:] != sorted_keys[:-1]
    union_modes = stacked[order][first]
    union_keys = sorted_keys[first]
    ca = np.zeros((len(union_modes), a.coeffs.shape[1]), dtype=np.complex128)
    cb = np.zeros_like(ca)
    ca[np.searchsorted(union_keys, keys[: len(a.modes)])] = a.coeffs
    cb[np.searchsorted(union_keys, keys[len(a.modes):])] = b.coeffs
    return union_modes, ca, cb

def _check_compatible(a: FourierForm, b: FourierForm):
    if a.frame.fingerprint != b.frame.fingerprint:
        raise IncompatibleForms("forms live over different frames")
    if a.degree != b.degree:
        raise IncompatibleForms(f"degrees differ: {a.degree} vs {b.degree}")

def _xi(form: FourierForm) -> np.ndarray:
    if form._xi is None:
        form._xi = frequencies(form.frame, form.modes)
    return form._xi

def _lam(form: FourierForm) -> np.ndarray:
    xi = _xi(form)
    return np.einsum("ij,ij->i", xi, xi)

def _derived(src: FourierForm, degree: int, coeffs: np.ndarray, *,
             real: bool | None = None, clamped: bool = False) -> FourierForm:
    out = FourierForm(src.frame, degree, src.radius, src.modes, coeffs,
                      real=src.real if real is None else real,
                      degree_clamped=clamped)
    out._xi = src._xi
    return out


# ----------------------------------------------------------------------
# constructors

def zero_form(frame: FoliationFrame, degree: int, radius: float,
              modes: np.ndarray | None = None) -> FourierForm:
    """The zero form on the full ball (or on a given support)."""
    if modes is None:
        modes = lattice.enumerate_ball(frame.n, radius)
    ncols = len(lattice.multi_indices(frame.k, degree))
    return FourierForm(frame, degree, radius, modes,
                       np.zeros((len(modes), ncols), dtype=np.complex128), real=True)


def form_from_table(frame: FoliationFrame, degree: int, radius: float,
                    entries: Mapping[tuple, complex]) -> FourierForm:
    """Build a form from a {(mode, multi_index): coefficient} mapping."""
    cols = lattice.multi_indices(frame.k, degree)
    col_of = {J: i for i, J in enumerate(cols)}
    raw_modes = []
    for m, J in entries:
        idx = lattice.validate_multi_index(J, frame.k)
        if len(idx) != degree:
            raise ValueError(f"index {idx} has wrong cardinality for degree {degree}")
        raw_modes.append(tuple(int(x) for x in m))
    support = sorted(set(raw_modes) | {(0,) * frame.n},
                     key=lambda m: (sum(x * x for x in m), m))
    modes = np.array(support, dtype=np.int64).reshape(len(support), frame.n)
    row_of = {m: i for i, m in enumerate(support)}
    coeffs = np.zeros((len(support), len(cols)), dtype=np.complex128)
    for (m, J), c in entries.items():
        coeffs[row_of[tuple(int(x) for x in m)], col_of[lattice.validate_multi_index(J, frame.k)]] += c
    return FourierForm(frame, degree, radius, modes, coeffs)


def basis_form(frame: FoliationFrame, radius: float, mode: Sequence[int],
               index: Sequence[int] = ()) -> FourierForm:
    """The single-entry form e_m d(leaf coordinates)_J."""
    J = lattice.validate_multi_index(index, frame.k)
    return form_from_table(frame, len(J), radius, {(tuple(mode), J): 1.0 + 0j})


def random_form(frame: FoliationFrame, degree: int, radius: float, decay: float,
                seed: int, real: bool = True,
                support: int | None = None) -> FourierForm:
    """Seeded random form with coefficient magnitudes (1 + ||m||)^(-decay).

    Deterministic for a fixed seed.  With ``real=True`` the table is
    conjugate-symmetric.  ``support`` caps the number of modes kept (a
    seeded symmetric subsample of the ball); by default the full ball is
    used.
    """
    if decay < 0:
        raise ValueError("decay must be >= 0")
    rng = np.random.default_rng(seed)
    nmax = int(np.floor(radius))
    ball_size_bound = (2 * nmax + 1) ** frame.n
    modes = None
    if support is not None and support < ball_size_bound:
        # draw symmetric support directly: candidates in the cube, filtered
        # to the ball, deduplicated, mirrored; cost is O(support)
        take = max(0, (int(support) - 1) // 2)
        cand = rng.integers(-nmax, nmax + 1, size=(max(4 * take, 16), frame.n), dtype=np.int64)
        cand = cand[((cand * cand).sum(axis=1) <= radius * radius)]
        cand = cand[_leading_sign(cand) > 0]
        keys = _mode_sort_keys(cand)
        order = np.argsort(keys, kind="stable")
        uniq = np.ones(len(order), dtype=bool)
        uniq[1:] = keys[order][1:] != keys[order][:-1]
        chosen = cand[order][uniq][:take]
        sel = np.vstack([np.zeros((1, frame.n), dtype=np.int64), chosen, -chosen])
        modes = sel[np.argsort(_mode_sort_keys(sel), kind="stable")]
    if modes is None:
        modes = lattice.enumerate_ball(frame.n, radius)

    ncols = len(lattice.multi_indices(frame.k, degree))
    norms = np.sqrt((modes * modes).sum(axis=1))
    mag = (1.0 + norms) ** (-float(decay))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(len(modes), ncols))
    coeffs = mag[:, None] * np.exp(1j * phases)
    if real:
        lead = _leading_sign(modes)
        zero_rows = lead == 0
        coeffs[zero_rows] = mag[zero_rows, None]
        neg_rows = _find_rows(modes, -modes)
        mirror = (lead < 0) & (neg_rows >= 0)
        coeffs[mirror] = np.conj(coeffs[neg_rows[mirror]])
    form = FourierForm(frame, degree, radius, modes, coeffs, real=real)
    return form


def _leading_sign(modes: np.ndarray) -> np.ndarray:
    """Sign of the first nonzero entry of each mode (0 for the origin)."""
    sign = np.zeros(len(modes), dtype=np.int8)
    undecided = np.ones(len(modes), dtype=bool)
    for i in range(modes.shape[1]):
        col = modes[:, i]
        hit = undecided & (col != 0)
        sign[hit] = np.sign(col[hit])
        undecided &= ~hit
    return sign


# ----------------------------------------------------------------------
# operator structure tables

@lru_cache(maxsize=None)
def _derivative_terms(k: int, p: int):
    cols_in = lattice.multi_indices(k, p)
    cols_out = lattice.multi_indices(k, p + 1)
    pos = {J: i for i, J in enumerate(cols_in)}
    terms = []
    for out_idx, K in enumerate(cols_out):
        for j in K:
            rest = tuple(i for i in K if i != j)
            terms.append((out_idx, j, lattice.insertion_sign(j, rest), pos[rest]))
    return tuple(terms)


@lru_cache(maxsize=None)
def _codifferential_terms(k: int, p: int):
    cols_in = lattice.multi_indices(k, p)
    cols_out = lattice.multi_indices(k, p - 1)
    pos = {J: i for i, J in enumerate(cols_in)}
    terms = []
    for out_idx, J in enumerate(cols_out):
        for j in range(1, k + 1):
            if j in J:
                continue
            grown = tuple(sorted(J + (j,)))
            terms.append((out_idx, j, lattice.insertion_sign(j, J), pos[grown]))
    return tuple(terms)


@lru_cache(maxsize=None)
def _star_table(k: int, p: int):
    cols_in = lattice.multi_indices(k, p)
    cols_out = lattice.multi_indices(k, k - p)
    pos = {J: i for i, J in enumerate(cols_out)}
    perm = np.zeros(len(cols_in), dtype=np.intp)
    sign = np.zeros(len(cols_in))
    for i, J in enumerate(cols_in):
        perm[i] = pos[lattice.complement(J, k)]
        sign[i] = lattice.complement_sign(J, k)
    return perm, sign


# ----------------------------------------------------------------------
# calculus

def exterior_derivative(form: FourierForm) -> FourierForm:
    """Leafwise differential; wedges each mode with i*xi(m).

    On top-degree forms the complex terminates: the zero form of degree k
    is returned with ``degree_clamped`` set.
    """
    k = form.frame.k
    p = form.degree
    if p >= k:
        zeros = np.zeros((len(form.modes), 1), dtype=np.complex128)
        return _derived(form, k, zeros, clamped=True)
    xi = _xi(form)
    out = np.zeros((len(form.modes), len(lattice.multi_indices(k, p + 1))), dtype=np.complex128)
    for out_idx, j, sgn, in_idx in _derivative_terms(k, p):
        out[:, out_idx] += (1j * sgn) * xi[:, j - 1] * form.coeffs[:, in_idx]
    return _derived(form, p + 1, out)


def codifferential(form: FourierForm) -> FourierForm:
    """Hermitian adjoint of the differential, computed per mode as the
    contraction with -i*xi(m).  Returns the zero function on degree 0."""
    k = form.frame.k
    p = form.degree
    if p == 0:
        return _derived(form, 0, np.zeros_like(form.coeffs))
    xi = _xi(form)
    out = np.zeros((len(form.modes), len(lattice.multi_indices(k, p - 1))), dtype=np.complex128)
    for out_idx, j, sgn, in_idx in _codifferential_terms(k, p):
        out[:, out_idx] += (-1j * sgn) * xi[:, j - 1] * form.coeffs[:, in_idx]
    return _derived(form, p - 1, out)


def codifferential_via_star(form: FourierForm) -> FourierForm:
    """Cross-check route: +/- star d star with the constant sign
    (-1)^(k(p+1)+1) on degree-p forms.  Should agree with
    :func:`codifferential` to rounding."""
    k, p = form.frame.k, form.degree
    if p == 0:
        return _derived(form, 0, np.zeros_like(form.coeffs))
    sign = -1.0 if (k * (p + 1) + 1) % 2 else 1.0
    return sign * hodge_star(exterior_derivative(hodge_star(form)))


def hodge_star(form: FourierForm) -> FourierForm:
    """Star operator: coefficient at J moves to the complement of J with
    the sign of the permutation (J, J complement)."""
    k, p = form.frame.k, form.degree
    perm, sign = _star_table(k, p)
    out = np.zeros((len(form.modes), len(lattice.multi_indices(k, k - p))), dtype=np.complex128)
    out[:, perm] = form.coeffs * sign
    return _derived(form, k - p, out)


def inner_product(a: FourierForm, b: FourierForm) -> complex:
    """Hermitian L2 pairing sum conj(a) * b over all (mode, index) entries."""
    _check_compatible(a, b)
    _, ca, cb = _union_tables(a, b)
    return complex(np.vdot(ca, cb))


def sobolev_norm(form: FourierForm, order: int) -> float:
    """Discrete W^(order,2) norm: sqrt(sum (1 + ||xi(m)||^2)^order |f|^2)."""
    if order < 0 or int(order) != order:
        raise ValueError("Sobolev order must be a nonnegative integer")
    weight = (1.0 + _lam(form)) ** int(order)
    return float(np.sqrt((weight[:, None] * np.abs(form.coeffs) ** 2).sum()))


def laplacian(form: FourierForm) -> FourierForm:
    """Multiplication by lambda(m) on every coefficient; equals d d* + d* d."""
    return _derived(form, form.degree, form.coeffs * _lam(form)[:, None])


def green_apply(form: FourierForm, *, kernel_tol: float = KERNEL_TOL,
                warn_floor: float = SMALL_DIVISOR_FLOOR) -> FourierForm:
    """Green operator: divide by lambda(m) off the kernel, zero on it.

    Thresholds apply to sum_j <m, w_j>^2 = lambda / (4 pi^2).  Modes in
    the band (kernel_tol, warn_floor) carrying data are still divided but
    reported through a SmallDivisorWarning, since zeroing them would
    silently change cohomology classes.
    """
    lam = _lam(form)
    scaled = lam / _FOUR_PI_SQ
    kernel = scaled <= kernel_tol
    out = np.zeros_like(form.coeffs)
    nz = ~kernel
    out[nz] = form.coeffs[nz] / lam[nz, None]
    risky = nz & (scaled < warn_floor)
    if risky.any():
        loaded = risky & (np.abs(form.coeffs).max(axis=1) > DROP_TOL)
        if loaded.any():
            flagged = [tuple(int(x) for x in m) for m in form.modes[loaded]]
            warnings.warn(SmallDivisorWarning(
                f"divided by near-resonant multipliers on {len(flagged)} mode(s)",
                modes=flagged), stacklevel=2)
    return _derived(form, form.degree, out)


def harmonic_project(form: FourierForm, *, kernel_tol: float = KERNEL_TOL) -> FourierForm:
    """Orthogonal projection onto the kernel of the Laplacian.

    With ``minimality_asserted`` on the frame only the m = 0 coefficients
    survive; otherwise every scanned mode with lambda(m) below the kernel
    tolerance is kept.
    """
    if form.frame.minimality_asserted:
        keep = (form.modes == 0).all(axis=1)
    else:
        keep = (_lam(form) / _FOUR_PI_SQ) <= kernel_tol
    out = np.where(keep[:, None], form.coeffs, 0.0)
    return _derived(form, form.degree, out)


@dataclass(eq=False)
class HodgeDecomposition:
    """Orthogonal splitting harmonic + exact + coexact of a form."""

    harmonic: FourierForm
    exact: FourierForm
    coexact: FourierForm

    def reconstruction(self) -> FourierForm:
        return self.harmonic + self.exact + self.coexact


def hodge_decompose(form: FourierForm) -> HodgeDecomposition:
    """Split into harmonic, d d* G and d* d G parts (mutually orthogonal).

    At the ends of the complex the missing composite is the zero form of
    the input degree (functions have no exact part, top forms no coexact
    part).
    """
    k, p = form.frame.k, form.degree
    g = green_apply(form)
    zero = _derived(form, p, np.zeros_like(form.coeffs), real=True)
    return HodgeDecomposition(
        harmonic=harmonic_project(form),
        exact=exterior_derivative(codifferential(g)) if p >= 1 else zero,
        coexact=codifferential(exterior_derivative(g)) if p <= k - 1 else zero,
    )


def harmonic_dimension(frame: FoliationFrame, radius: float, degree: int,
                       *, kernel_tol: float = KERNEL_TOL) -> int:
    """Dimension of the harmonic degree-p space over the scanned ball.

    Counts modes with sum_j <m, w_j>^2 below the kernel tolerance and
    multiplies by the number of degree-p wedge columns.  For a minimal
    foliation the only kernel mode is m = 0 and the count is C(k, p).
    """
    modes = lattice.enumerate_ball(frame.n, radius)
    proj = modes @ frame.w.T
    values = np.einsum("ij,ij->i", proj, proj)
    kernel_modes = int((values <= kernel_tol).sum())
    return kernel_modes * len(lattice.multi_indices(frame.k, degree))


# ----------------------------------------------------------------------
# serialization

def to_json(form: FourierForm) -> dict:
    """Canonical JSON table: entries [[m...], [J...], re, im] in
    (ball order, column order), dropping magnitudes <= DROP_TOL except at
    m = 0.  Finite doubles round-trip exactly."""
    entries = []
    cols = form.columns
    keep_zero = (form.modes == 0).all(axis=1)
    for row in range(len(form.modes)):
        m = [int(x) for x in form.modes[row]]
        for col, J in enumerate(cols):
            c = form.coeffs[row, col]
            if abs(c) > DROP_TOL or keep_zero[row]:
                entries.append([m, list(J), float(c.real), float(c.imag)])
    return {
        "degree": form.degree,
        "frame_id": form.frame.fingerprint,
        "truncation_radius": float(form.radius),
        "real": bool(form.real),
        "entries": entries,
    }


def from_json(data: Mapping, frame: FoliationFrame) -> FourierForm:
    """Rebuild a form from :func:`to_json` output over a matching frame."""
    if data["frame_id"] != frame.fingerprint:
        raise IncompatibleForms("serialized form belongs to a different frame")
    table = {}
    for m, J, re, im in data["entries"]:
        table[(tuple(m), tuple(J))] = complex(re, im)
    form = form_from_table(frame, int(data["degree"]), float(data["truncation_radius"]), table)
    form.real = bool(data.get("real", False))
    return form
