"""Independent draws from the joint posterior of (eta, delta0, nu).

Model: ``y ~ N(nu, delta0/w I)`` with the thin-plate prior
``nu | eta, delta0 ∝ (eta/delta0)^(r/2) exp(-eta nu'M nu / (2 delta0))``,
``delta0 ~ InvGamma(a0, b0)`` and an arbitrary prior on ``eta``.

Draws factor as ``pi(eta | y) pi(delta0 | eta, y) pi(nu | delta0, eta, y)``:
eta by ratio-of-uniforms on its marginal, delta0 from its inverse-gamma
conditional, nu from a Gaussian.  Every quantity is evaluated in the
eigenbasis of M, so each density evaluation is O(n).

``w`` (the observation weight) is 1 for the plain Gaussian model.  The
hierarchical binomial model reuses this machinery with ``w = 2`` for
two averaged replicates, plus a within-site residual sum of squares and
extra degrees of freedom that only affect delta0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import rou
from .errors import DimensionMismatch, NonPositiveDelta0, NonPositiveEta
from .penalty import SplineCoefficients, SplinePenalty, recover_coefficients
from .rou import RouEnvelope

DEFAULT_A0 = 0.01
DEFAULT_B0 = 0.01
CHUNK = 4096


@dataclass(frozen=True)
class EtaPrior:
    """Prior on the smoothing ratio eta = delta0 / delta1.

    ``kind="pareto"`` is the density ``1/(1+eta)^2`` (median 1, uniform on
    eta/(1+eta)).  ``kind="user"`` wraps a vectorized log density.
    """

    kind: str = "pareto"
    log_density: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in ("pareto", "user"):
            raise ValueError(f"unknown eta prior {self.kind!r}")
        if self.kind == "user" and self.log_density is None:
            raise ValueError("a user eta prior needs a log density")

    @classmethod
    def pareto(cls) -> "EtaPrior":
        return cls("pareto")

    @classmethod
    def user(cls, log_density) -> "EtaPrior":
        return cls("user", log_density)

    def logpdf(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.kind == "pareto":
            return -2.0 * np.log1p(eta)
        return np.asarray(self.log_density(eta), dtype=float) + np.zeros_like(eta)


@dataclass(frozen=True)
class PosteriorCache:
    lambdas: np.ndarray
    y_star: np.ndarray
    yty: float
    n: int
    rank: int
    a0: float
    b0: float
    eta_prior: EtaPrior
    log_pdet: float
    weight: float = 1.0
    extra_ss: float = 0.0
    extra_dof: float = 0.0

    @property
    def shape(self) -> float:
        """Inverse-gamma shape of delta0 given eta."""
        return self.a0 + 0.5 * (self.rank + self.extra_dof)

    def log_density(self, eta):
        return log_marginal_eta(self, eta)


def build_cache(
    penalty: SplinePenalty,
    y,
    a0: float = DEFAULT_A0,
    b0: float = DEFAULT_B0,
    eta_prior: EtaPrior = EtaPrior(),
    *,
    weight: float = 1.0,
    extra_ss: float = 0.0,
    extra_dof: float = 0.0,
) -> PosteriorCache:
    """Rotate the data into the eigenbasis of M and store what eta needs."""
    y = np.asarray(y, dtype=float)
    if y.shape != (penalty.n,):
        raise DimensionMismatch(f"data has shape {y.shape}, design has {penalty.n} sites")
    if a0 < 0 or b0 < 0:
        raise ValueError("a0 and b0 must be nonnegative")
    if not weight > 0:
        raise ValueError("weight must be positive")
    y_star = penalty.Q.T @ y
    if b0 == 0 and extra_ss == 0:
        # S(eta) is then the only scale for delta0, and it vanishes when y has
        # no penalized part.  Roundoff in Q leaves ~1e-13 relative, far below sqrt(eps).
        rough = float(np.sum(y_star[: penalty.rank] ** 2))
        if rough <= np.finfo(float).eps * max(float(y @ y), 1.0):
            raise NonPositiveDelta0(
                "delta0 posterior is improper: b0 = 0 and the data lie in the null space of the penalty"
            )
    return PosteriorCache(
        lambdas=penalty.lambdas,
        y_star=y_star,
        yty=float(y @ y),
        n=penalty.n,
        rank=penalty.rank,
        a0=float(a0),
        b0=float(b0),
        eta_prior=eta_prior,
        log_pdet=penalty.log_pdet,
        weight=float(weight),
        extra_ss=float(extra_ss),
        extra_dof=float(extra_dof),
    )


def _check_eta(eta, allow_zero=False):
    eta = np.asarray(eta, dtype=float)
    bad = eta < 0 if allow_zero else ~(eta > 0)
    if np.any(bad):
        raise NonPositiveEta(f"eta must be {'nonnegative' if allow_zero else 'positive'}")
    return eta


def residual_ss(cache: PosteriorCache, eta):
    """``S(eta) = w y'y - w^2 y'(wI + eta M)^-1 y``, evaluated spectrally.

    Written as ``sum w y*_i^2 eta lam_i / (w + eta lam_i)`` to avoid the
    cancellation in the difference form when eta is small.
    """
    eta = np.asarray(eta, dtype=float)
    x = eta[..., None] * cache.lambdas
    w = cache.weight
    return np.sum(w * cache.y_star**2 * x / (w + x), axis=-1)


def delta0_scale(cache: PosteriorCache, eta):
    return cache.b0 + 0.5 * (cache.extra_ss + residual_ss(cache, eta))


def log_marginal_eta(cache: PosteriorCache, eta):
    """Unnormalized log posterior density of eta with delta0 and nu integrated out.

    ``log pi(eta) + (r/2) log eta - 1/2 sum log(1 + eta lam_i / w)
    - shape * log(b0 + (extra_ss + S(eta)) / 2)``.  Terms constant in
    eta (|M|_+, Gamma(shape), powers of w) are dropped.
    """
    eta = _check_eta(eta)
    scalar = eta.ndim == 0
    eta = np.atleast_1d(eta)
    x = eta[:, None] * cache.lambdas
    logdet = np.sum(np.log1p(x / cache.weight), axis=1)
    with np.errstate(divide="ignore"):
        out = (
            cache.eta_prior.logpdf(eta)
            + 0.5 * cache.rank * np.log(eta)
            - 0.5 * logdet
            - cache.shape * np.log(delta0_scale(cache, eta))
        )
    return float(out[0]) if scalar else out


def build_rou_envelope(cache: PosteriorCache) -> RouEnvelope:
    return rou.build_envelope(cache.log_density)


def sample_eta(cache: PosteriorCache, env: RouEnvelope, N: int, rng: np.random.Generator):
    return rou.rou_sample(cache.log_density, env, N, rng)


def sample_delta0(cache: PosteriorCache, eta, rng: np.random.Generator):
    """Inverse-gamma draw(s) of delta0 given eta (one per entry of ``eta``)."""
    eta = _check_eta(eta)
    scale = delta0_scale(cache, eta)
    draw = scale / rng.gamma(cache.shape, size=np.shape(eta))
    return float(draw) if np.ndim(draw) == 0 else draw


def sample_nu(
    penalty: SplinePenalty,
    cache: PosteriorCache,
    eta,
    delta0,
    rng: np.random.Generator,
):
    """Exact Gaussian draw(s) of nu given (eta, delta0).

    In the eigenbasis the conditional is diagonal: mean
    ``w y*_i / (w + eta lam_i)``, variance ``delta0 / (w + eta lam_i)``.
    ``eta = 0`` is accepted and gives the unsmoothed limit.  Vector
    ``eta``/``delta0`` of length N give an (N, n) array.
    """
    eta = _check_eta(eta, allow_zero=True)
    delta0 = np.asarray(delta0, dtype=float)
    if np.any(~(delta0 > 0)):
        raise NonPositiveDelta0("delta0 must be positive")
    eta, delta0 = np.broadcast_arrays(eta, delta0)
    denom = cache.weight + eta[..., None] * cache.lambdas
    z = rng.standard_normal(denom.shape)
    rotated = (cache.weight * cache.y_star + np.sqrt(delta0[..., None] * denom) * z) / denom
    return rotated @ penalty.Q.T


def smoothing_solution(penalty: SplinePenalty, cache: PosteriorCache, eta):
    """Posterior mean of nu given eta: ``(wI + eta M)^-1 w y``."""
    eta = _check_eta(eta, allow_zero=True)
    denom = cache.weight + eta[..., None] * cache.lambdas
    return (cache.weight * cache.y_star / denom) @ penalty.Q.T


@dataclass(frozen=True)
class JointDraws:
    eta: np.ndarray
    delta0: np.ndarray
    nu: np.ndarray
    seed: Optional[int]

    @property
    def n_draws(self) -> int:
        return self.eta.shape[0]

    def coefficients(self, penalty: SplinePenalty) -> SplineCoefficients:
        return recover_coefficients(penalty, self.nu)


def draw_joint(
    penalty: SplinePenalty,
    cache: PosteriorCache,
    N: int,
    seed: Optional[int] = None,
    *,
    workers: int = 1,
    env: Optional[RouEnvelope] = None,
) -> JointDraws:
    """Draw N independent (eta, delta0, nu) triples.

    Draws are generated in fixed chunks, each with its own substream of
    ``SeedSequence(seed)``, and concatenated in chunk order, so output is
    identical for any ``workers``.  No burn-in.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    if N == 0:
        return JointDraws(np.empty(0), np.empty(0), np.empty((0, penalty.n)), seed)
    if env is None:
        env = build_rou_envelope(cache)

    sizes = [min(CHUNK, N - s) for s in range(0, N, CHUNK)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def chunk(args):
        m, ss = args
        rng = np.random.default_rng(ss)
        eta = sample_eta(cache, env, m, rng)
        delta0 = sample_delta0(cache, eta, rng)
        nu = sample_nu(penalty, cache, eta, delta0, rng)
        return eta, delta0, nu

    jobs = list(zip(sizes, streams))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk, jobs))
    else:
        parts = [chunk(j) for j in jobs]
    return JointDraws(
        eta=np.concatenate([p[0] for p in parts]),
        delta0=np.concatenate([p[1] for p in parts]),
        nu=np.concatenate([p[2] for p in parts]),
        seed=seed,
    )
