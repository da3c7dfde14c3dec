"""Thin-plate spline basis and penalty matrix on a planar point set.

The penalty ``M`` is built so that ``nu @ M @ nu`` equals the bending
energy ``gamma @ K @ gamma`` of the interpolating spline through the
field values ``nu``.  Its null space is the linear polynomials, so it has
exactly three zero eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree, distance

from .errors import (
    CollinearSites,
    DegenerateRank,
    DimensionMismatch,
    DuplicateSites,
    IllConditionedBasis,
    TooFewSites,
)

N_POLY = 3
MAX_CONDITION = 1e12
ZERO_EIG_SLACK = 64.0
# standardized-distance below which two sites count as the same point
DUPLICATE_TOL = 64 * np.finfo(float).eps


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TpsKernel:
    """Radial kernel ``a_md * r**(2m-d) * log r`` (even ``d``).

    Only ``d = 2, m = 2`` can be evaluated; other orders are accepted so
    the type can describe them, but evaluation refuses.
    """

    m: int = 2
    d: int = 2
    a_md: float = 1.0

    def __post_init__(self):
        if 2 * self.m <= self.d:
            raise ValueError(f"need 2m > d, got m={self.m}, d={self.d}")
        if not self.a_md > 0:
            raise ValueError("a_md must be positive")

    def _check(self):
        if (self.m, self.d) != (2, 2):
            raise NotImplementedError(
                f"only the planar m=2, d=2 kernel is implemented (got m={self.m}, d={self.d})"
            )

    def __call__(self, r):
        """Evaluate on distances ``r >= 0`` (scalar or array)."""
        self._check()
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("distances must be nonnegative")
        r2 = r * r
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r2 > 0, 0.5 * r2 * np.log(r2), 0.0)
        out = self.a_md * out
        return float(out) if out.ndim == 0 else out


def tps_kernel_eval(r, k: TpsKernel = TpsKernel()):
    return k(r)


@dataclass(frozen=True)
class SpatialDesign:
    """Distinct planar sites, stored in standardized coordinates.

    ``center`` and ``scale`` map raw coordinates to the standardized frame
    via ``(raw - center) / scale``.
    """

    sites: np.ndarray
    center: np.ndarray
    scale: float

    @property
    def n(self) -> int:
        return self.sites.shape[0]

    def to_standard(self, raw) -> np.ndarray:
        raw = np.atleast_2d(np.asarray(raw, dtype=float))
        if raw.shape[1] != 2:
            raise DimensionMismatch(f"expected coordinate pairs, got shape {raw.shape}")
        return (raw - self.center) / self.scale

    def to_raw(self, std) -> np.ndarray:
        return np.atleast_2d(np.asarray(std, dtype=float)) * self.scale + self.center

    @property
    def raw_sites(self) -> np.ndarray:
        return self.to_raw(self.sites)


def polynomial_basis(points) -> np.ndarray:
    points = np.atleast_2d(points)
    return np.column_stack([np.ones(points.shape[0]), points[:, 0], points[:, 1]])


def kernel_matrix(a, b, k: TpsKernel = TpsKernel()) -> np.ndarray:
    """``out[i, j] = psi(|a_i - b_j|)``."""
    return k(distance.cdist(np.atleast_2d(a), np.atleast_2d(b)))


def build_design(raw_sites) -> SpatialDesign:
    """Validate raw sites and standardize them.

    The sites are centered at their mean and divided by the root mean
    square distance from that center, so the standardized cloud has RMS
    radius one.  The r^2 log r kernel is not scale invariant and raw map
    coordinates (e.g. metres) give a badly conditioned kernel matrix.
    """
    raw = np.asarray(raw_sites, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 2:
        raise DimensionMismatch(f"sites must be an (n, 2) array, got shape {raw.shape}")
    n = raw.shape[0]
    if n < N_POLY + 1:
        raise TooFewSites(f"need at least {N_POLY + 1} sites, got {n}")
    if not np.all(np.isfinite(raw)):
        raise DimensionMismatch("site coordinates must be finite")

    center = raw.mean(axis=0)
    scale = float(np.sqrt(np.mean(np.sum((raw - center) ** 2, axis=1))))
    if scale == 0.0:
        raise DuplicateSites("all sites coincide")
    sites = (raw - center) / scale

    dist, idx = cKDTree(sites).query(sites, k=2)
    close = np.flatnonzero(dist[:, 1] <= DUPLICATE_TOL)
    if close.size:
        i = int(close[0])
        j = int(idx[i, 1])
        raise DuplicateSites(
            f"sites {min(i, j)} and {max(i, j)} coincide at {raw[i].tolist()}"
        )

    if np.linalg.matrix_rank(polynomial_basis(sites)) < N_POLY:
        raise CollinearSites("all sites lie on one line; the linear trend is not identifiable")

    return SpatialDesign(sites=_frozen(sites), center=_frozen(center), scale=scale)


class _PivotedQR:
    """Solver for ``G x = b`` and ``G.T x = b`` from one pivoted QR."""

    def __init__(self, g):
        self.q, self.r, self.piv = linalg.qr(g, pivoting=True)
        rcond, info = linalg.lapack.dtrcon(self.r, norm="1", uplo="U", diag="N")
        self.condition = np.inf if rcond == 0 else 1.0 / rcond

    def solve(self, b):
        out = np.empty_like(b, dtype=float)
        out[self.piv] = linalg.solve_triangular(self.r, self.q.T @ b)
        return out

    def solve_t(self, b):
        z = linalg.solve_triangular(self.r, b[self.piv], trans="T")
        return self.q @ z


@dataclass(frozen=True, eq=False)
class SplinePenalty:
    design: SpatialDesign
    kernel: TpsKernel
    T: np.ndarray
    K: np.ndarray
    F2: np.ndarray
    G: np.ndarray
    H: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    lambdas: np.ndarray
    rank: int
    log_pdet: float
    condition: float
    _factor: _PivotedQR

    @property
    def n(self) -> int:
        return self.design.n

    def quad_form(self, nu) -> np.ndarray:
        """``nu @ M @ nu`` for one field or each row of a stack."""
        nu = np.asarray(nu, dtype=float)
        return np.einsum("...i,ij,...j->...", nu, self.M, nu)


def _null_space_basis(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    w, f = np.linalg.eigh(t @ t.T)
    # eigh is ascending: the first n - 3 vectors span the complement of col(T)
    f2 = f[:, : n - N_POLY].copy()
    tol = np.sqrt(np.finfo(float).eps)
    for j in range(f2.shape[1]):
        lead = np.flatnonzero(np.abs(f2[:, j]) > tol)[0]
        if f2[lead, j] < 0:
            f2[:, j] = -f2[:, j]
    return f2


def build_penalty(design: SpatialDesign, k: TpsKernel = TpsKernel()) -> SplinePenalty:
    """Assemble T, K, F2, G, H and ``M = G^-T H G^-1`` with its eigenpairs.

    Raises
    ------
    IllConditionedBasis
        If the condition estimate of ``G`` exceeds 1e12.
    DegenerateRank
        If the number of numerically zero eigenvalues of ``M`` is not 3.
    """
    n = design.n
    t = polynomial_basis(design.sites)
    kmat = kernel_matrix(design.sites, design.sites, k)
    f2 = _null_space_basis(t)
    g = np.hstack([t, kmat @ f2])
    h = np.zeros((n, n))
    h[N_POLY:, N_POLY:] = f2.T @ kmat @ f2

    factor = _PivotedQR(g)
    if not np.isfinite(factor.condition) or factor.condition > MAX_CONDITION:
        raise IllConditionedBasis(
            f"condition estimate of the spline basis is {factor.condition:.3g} (> {MAX_CONDITION:g})"
        )

    # M = G^-T H G^-1 using H = H^T: first G^-T H = (H G^-1)^T, then once more
    m = factor.solve_t(factor.solve_t(h).T)
    m = 0.5 * (m + m.T)

    lam, q = np.linalg.eigh(m)
    lam = lam[::-1].copy()
    q = q[:, ::-1].copy()
    lam_max = lam[0]
    threshold = n * lam_max * np.finfo(float).eps * ZERO_EIG_SLACK
    zero = lam < threshold
    if int(zero.sum()) != N_POLY:
        raise DegenerateRank(
            f"expected {N_POLY} zero eigenvalues in the penalty, found {int(zero.sum())}"
        )
    lam[zero] = 0.0
    rank = n - N_POLY

    return SplinePenalty(
        design=design,
        kernel=k,
        T=_frozen(t),
        K=_frozen(kmat),
        F2=_frozen(f2),
        G=_frozen(g),
        H=_frozen(h),
        M=_frozen(m),
        Q=_frozen(q),
        lambdas=_frozen(lam),
        rank=rank,
        log_pdet=float(np.sum(np.log(lam[:rank]))),
        condition=float(factor.condition),
        _factor=factor,
    )


@dataclass(frozen=True)
class SplineCoefficients:
    """Polynomial part ``beta`` and kernel weights ``gamma``.

    For a stack of ``k`` fields the arrays carry a leading axis:
    ``beta`` is (k, 3) and ``gamma`` is (k, n).
    """

    beta: np.ndarray
    gamma: np.ndarray


def recover_coefficients(penalty: SplinePenalty, nu) -> SplineCoefficients:
    """Invert ``nu = G omega`` and map ``omega = (beta, lambda)`` to ``gamma = F2 lambda``.

    ``nu`` may be a single n-vector or a (k, n) stack of fields.
    """
    nu = np.asarray(nu, dtype=float)
    if nu.shape[-1] != penalty.n:
        raise DimensionMismatch(f"field has length {nu.shape[-1]}, design has {penalty.n} sites")
    omega = penalty._factor.solve(nu.T)
    beta = omega[:N_POLY]
    gamma = penalty.F2 @ omega[N_POLY:]
    return SplineCoefficients(beta=beta.T, gamma=gamma.T)


def surface_basis(design: SpatialDesign, query_points, k: TpsKernel = TpsKernel()):
    """Polynomial and kernel design rows for raw query coordinates."""
    q = design.to_standard(query_points)
    return polynomial_basis(q), kernel_matrix(q, design.sites, k)


def evaluate_surface(
    coeffs: SplineCoefficients,
    design: SpatialDesign,
    query_points,
    k: TpsKernel = TpsKernel(),
) -> np.ndarray:
    """Evaluate the spline at raw query coordinates.

    Returns a (q,) vector, or (k, q) when ``coeffs`` holds a stack.
    Extrapolation outside the site hull is allowed.
    """
    tq, kq = surface_basis(design, query_points, k)
    return coeffs.beta @ tq.T + coeffs.gamma @ kq.T
