"""Foliation frames on the flat torus and their per-mode spectral data.

A frame holds k orthonormal leaf directions w_1..w_k inside R^n.  Every
Fourier mode m carries the leaf frequency vector xi_j(m) = 2*pi*<m, w_j>
and the Laplace multiplier lambda(m) = ||xi(m)||^2.

Convention: the derivative along w_j acts on mode m as multiplication by
i * xi_j(m) = 2*pi*i*<m, w_j>, so multipliers count true derivatives.
Kernels and dimension counts are unaffected by the 2*pi normalisation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateSubspace
from .lattice import enumerate_ball

ORTHONORMALITY_TOL = 1e-12
SPAN_TOL = 1e-10
# A scanned value of sum_j <m, w_j>^2 below this is treated as an exact
# resonance (integer vector orthogonal to the leaf plane).
RESONANCE_TOL = 1e-14


@dataclass(eq=False)
class FoliationFrame:
    """Orthonormal leaf directions of a linear foliation of T^n.

    ``w`` has shape (k, n) with orthonormal rows; ``minimality_asserted``
    records the user's claim that no nonzero integer mode annihilates all
    leaf frequencies (a finite scan can only gather evidence, see
    :func:`minimality_scan`).
    """

    n: int
    k: int
    w: np.ndarray
    minimality_asserted: bool = True
    _fingerprint: str = field(default="", repr=False)

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        if self.w.shape != (self.k, self.n):
            raise ValueError(f"w must have shape ({self.k}, {self.n})")
        if not 1 <= self.k < self.n:
            raise ValueError("need 1 <= k < n")
        gram = self.w @ self.w.T
        if not np.allclose(gram, np.eye(self.k), atol=ORTHONORMALITY_TOL):
            raise ValueError("leaf directions are not orthonormal to 1e-12")
        self.w.setflags(write=False)
        digest = hashlib.sha256()
        digest.update(f"{self.n},{self.k};".encode())
        digest.update(self.w.tobytes())
        self._fingerprint = digest.hexdigest()[:16]

    @property
    def fingerprint(self) -> str:
        """Short content hash; used to pair serialized forms with frames."""
        return self._fingerprint


def build_frame(raw_basis: Sequence[Sequence[float]], minimality_asserted: bool = True) -> FoliationFrame:
    """Orthonormalise ``raw_basis`` (k vectors in R^n) into a frame.

    The span of the input is preserved; the first vector keeps its
    direction.  Raises DegenerateSubspace when the input is numerically
    rank-deficient.
    """
    basis = np.asarray(raw_basis, dtype=np.float64)
    if basis.ndim != 2:
        raise ValueError("raw basis must be a list of equal-length vectors")
    k, n = basis.shape
    if k >= n:
        raise ValueError(f"leaf dimension {k} must be < ambient dimension {n}")
    if not np.all(np.isfinite(basis)):
        raise ValueError("raw basis entries must be finite")

    sv = np.linalg.svd(basis, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-12 * sv[0]:
        raise DegenerateSubspace("raw basis vectors are numerically dependent")

    q, r = np.linalg.qr(basis.T)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    w = (q * signs).T

    residual = np.linalg.norm(basis - (basis @ w.T) @ w)
    if residual > SPAN_TOL * max(np.linalg.norm(basis), 1.0):
        raise DegenerateSubspace("orthonormalisation failed to preserve the span")
    return FoliationFrame(n=n, k=k, w=w, minimality_asserted=minimality_asserted)


def frequencies(frame: FoliationFrame, modes: np.ndarray) -> np.ndarray:
    """Leaf frequency vectors xi(m) = 2*pi*(m . w_j), shape (M, k)."""
    modes = np.asarray(modes)
    return 2.0 * np.pi * (modes @ frame.w.T)


def frequency(frame: FoliationFrame, mode: Sequence[int]) -> np.ndarray:
    """xi(m) for a single mode, shape (k,)."""
    m = np.asarray(mode, dtype=np.int64)
    if m.shape != (frame.n,):
        raise ValueError(f"mode must have length {frame.n}")
    return frequencies(frame, m[None, :])[0]


def laplacian_eigenvalues(frame: FoliationFrame, modes: np.ndarray) -> np.ndarray:
    """Multipliers lambda(m) = ||xi(m)||^2 = 4*pi^2 * sum_j <m, w_j>^2."""
    xi = frequencies(frame, modes)
    return np.einsum("ij,ij->i", xi, xi)


def laplacian_eigenvalue(frame: FoliationFrame, mode: Sequence[int]) -> float:
    """lambda(m) for a single mode."""
    xi = frequency(frame, mode)
    return float(xi @ xi)


@dataclass(frozen=True)
class MinimalityReport:
    """Result of a finite resonance scan.

    ``min_value`` is the smallest sum_j <m, w_j>^2 over nonzero modes in
    the scanned ball (no 2*pi factor); ``resonant`` flags values below
    RESONANCE_TOL, i.e. an integer vector orthogonal to the leaf plane
    within the scan range.
    """

    min_mode: tuple[int, ...]
    min_value: float
    resonant: bool
    radius: float


def minimality_scan(frame: FoliationFrame, radius: float) -> MinimalityReport:
    """Locate the nonzero mode m with ||m|| <= radius minimising sum_j <m, w_j>^2."""
    if radius < 1:
        raise ValueError("scan radius must be >= 1")
    modes = enumerate_ball(frame.n, radius)[1:]  # drop the origin (first in ball order)
    proj = modes @ frame.w.T
    values = np.einsum("ij,ij->i", proj, proj)
    idx = int(np.argmin(values))  # first minimiser in canonical ball order
    mode = modes[idx]

    # Report a canonical sign: first nonzero leaf projection positive,
    # falling back to the first nonzero entry of m for resonant modes.
    row = proj[idx]
    nonzero = np.nonzero(np.abs(row) > 0.0)[0]
    if nonzero.size:
        if row[nonzero[0]] < 0:
            mode = -mode
    else:
        lead = np.nonzero(mode)[0]
        if lead.size and mode[lead[0]] < 0:
            mode = -mode

    value = float(values[idx])
    return MinimalityReport(
        min_mode=tuple(int(x) for x in mode),
        min_value=value,
        resonant=value < RESONANCE_TOL,
        radius=float(radius),
    )
