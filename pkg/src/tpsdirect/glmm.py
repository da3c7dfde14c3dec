"""Hierarchical binomial-logit model with a thin-plate spatial effect.

    y_ij ~ Binomial(n_ij, logistic(nu_ij))
    nu_ij = Z_i + theta_j + eps_ij,   eps_ij ~ N(0, delta0),   theta_1 = 0
    Z | eta, delta0 ~ thin-plate prior, delta0 ~ InvGamma(a0, b0), eta ~ pi(eta)

Two samplers target the same posterior:

* ``run_direct_chain``: random-walk Metropolis on nu, then one exact block
  draw of (eta, delta0, Z) given (nu, theta2) through the direct sampler,
  then theta2.
* ``run_baseline_gibbs``: nu, Z, theta2, delta0 and eta each drawn from
  their full conditionals in turn.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import rou
from .errors import DataError, DimensionMismatch
from .penalty import SplinePenalty
from .sampler import (
    DEFAULT_A0,
    DEFAULT_B0,
    EtaPrior,
    build_cache,
    build_rou_envelope,
    sample_delta0,
    sample_eta,
    sample_nu,
)

N_WEEKS = 2
TARGET_ACCEPT = 0.44
INITIAL_STEP = 1.0


@dataclass(frozen=True)
class BinomialPanel:
    y: np.ndarray
    trials: np.ndarray
    centroids: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        trials = np.asarray(self.trials, dtype=float)
        centroids = np.asarray(self.centroids, dtype=float)
        if y.ndim != 2 or y.shape[1] != N_WEEKS or trials.shape != y.shape:
            raise DimensionMismatch(f"counts must be (N, {N_WEEKS}) arrays of equal shape")
        if centroids.shape != (y.shape[0], 2):
            raise DimensionMismatch("need one centroid per row of counts")
        if np.any(trials < 0) or np.any(y < 0) or np.any(y > trials):
            raise DataError("counts must satisfy 0 <= y <= n")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "centroids", centroids)

    @property
    def n_sites(self) -> int:
        return self.y.shape[0]


@dataclass
class GlmmState:
    nu: np.ndarray
    Z: np.ndarray
    theta2: float
    delta0: float
    eta: float
    rng: np.random.Generator
    step_sizes: np.ndarray
    accepted: np.ndarray = field(default=None)

    @property
    def theta(self) -> np.ndarray:
        # week 1 is the baseline and never sampled
        return np.array([0.0, self.theta2])


@dataclass
class ChainOutput:
    scheme: str
    theta2: np.ndarray
    eta: np.ndarray
    delta0: np.ndarray
    z_draws: np.ndarray
    nu_draws: np.ndarray
    z_mean: np.ndarray
    acceptance_rate: float
    duration: float

    @property
    def n_records(self) -> int:
        return self.theta2.shape[0]


def log_conditional_nu(nu, y, n, Z, theta, delta0):
    """Log full conditional of a latent logit, up to a constant.

    ``nu y - n log(1 + e^nu) - (nu - Z - theta)^2 / (2 delta0)``; the
    softplus term goes through ``logaddexp`` so it is finite for any nu.
    """
    nu = np.asarray(nu, dtype=float)
    return nu * y - n * np.logaddexp(0.0, nu) - (nu - Z - theta) ** 2 / (2.0 * delta0)


def initial_state(panel: BinomialPanel, rng: np.random.Generator) -> GlmmState:
    """Empirical logits as a starting point; deterministic in the data."""
    nu = np.log((panel.y + 0.5) / (panel.trials - panel.y + 0.5))
    theta2 = float(np.mean(nu[:, 1] - nu[:, 0]))
    z = (nu - np.array([0.0, theta2])).mean(axis=1)
    return GlmmState(
        nu=nu,
        Z=z,
        theta2=theta2,
        delta0=1.0,
        eta=1.0,
        rng=rng,
        step_sizes=np.full(nu.shape, INITIAL_STEP),
        accepted=np.zeros(nu.shape, dtype=bool),
    )


def mh_update_nu(state: GlmmState, panel: BinomialPanel, adapt_gain: float = 0.0) -> GlmmState:
    """One random-walk Metropolis sweep over all cells.

    Cells are conditionally independent given (Z, theta, delta0), so the
    sweep is vectorized.  With ``adapt_gain > 0`` the log step sizes move
    by ``gain * (accept - 0.44)``; callers only pass a gain during burn-in.
    """
    mean = state.Z[:, None] + state.theta
    rng = state.rng
    prop = state.nu + state.step_sizes * rng.standard_normal(state.nu.shape)
    log_ratio = log_conditional_nu(prop, panel.y, panel.trials, mean, 0.0, state.delta0) - log_conditional_nu(
        state.nu, panel.y, panel.trials, mean, 0.0, state.delta0
    )
    accept = np.log(rng.random(state.nu.shape)) < log_ratio
    state.nu = np.where(accept, prop, state.nu)
    state.accepted = accept
    if adapt_gain > 0:
        state.step_sizes = state.step_sizes * np.exp(adapt_gain * (accept - TARGET_ACCEPT))
    return state


def _pseudo_data(state: GlmmState):
    resid = state.nu - state.theta
    ybar = resid.mean(axis=1)
    within = float(np.sum((resid - ybar[:, None]) ** 2))
    return ybar, within


def direct_block_update(
    state: GlmmState,
    penalty: SplinePenalty,
    a0: float = DEFAULT_A0,
    b0: float = DEFAULT_B0,
    eta_prior: EtaPrior = EtaPrior(),
) -> GlmmState:
    """Exact joint draw of (eta, delta0, Z) given (nu, theta2).

    Given nu and theta2 the site means ``(nu_i1 + nu_i2 - theta2) / 2``
    are Gaussian around Z_i with variance delta0/2, which is the Gaussian
    model with observation weight 2.  The within-site scatter around those
    means carries N more degrees of freedom for delta0 and enters its
    scale as an extra sum of squares.
    """
    ybar, within = _pseudo_data(state)
    n_sites = ybar.shape[0]
    cache = build_cache(
        penalty,
        ybar,
        a0,
        b0,
        eta_prior,
        weight=N_WEEKS,
        extra_ss=within,
        extra_dof=(N_WEEKS - 1) * n_sites,
    )
    env = build_rou_envelope(cache)
    eta = float(sample_eta(cache, env, 1, state.rng)[0])
    delta0 = sample_delta0(cache, eta, state.rng)
    state.Z = sample_nu(penalty, cache, eta, delta0, state.rng)
    state.eta = eta
    state.delta0 = delta0
    return state


def gibbs_update_theta2(state: GlmmState) -> GlmmState:
    """theta2 | Z, delta0, nu ~ N(mean(nu_i2 - Z_i), delta0 / N) under a flat prior."""
    n_sites = state.Z.shape[0]
    mean = float(np.mean(state.nu[:, 1] - state.Z))
    state.theta2 = mean + math.sqrt(state.delta0 / n_sites) * state.rng.standard_normal()
    return state


def gibbs_update_z(state: GlmmState, penalty: SplinePenalty) -> GlmmState:
    """Single-site sweep over Z_i | Z_-i, nu, theta2, delta0, eta.

    Z_i ~ N((s_i - eta sum_{k != i} M_ik Z_k) / (2 + eta M_ii), delta0 / (2 + eta M_ii))
    with ``s_i = sum_j (nu_ij - theta_j)``.  ``M @ Z`` is kept current
    after every site so the sweep costs O(n^2).
    """
    m = penalty.M
    eta, delta0 = state.eta, state.delta0
    s = (state.nu - state.theta).sum(axis=1)
    z = state.Z.copy()
    mz = m @ z
    noise = state.rng.standard_normal(z.shape[0])
    for i in range(z.shape[0]):
        prec = N_WEEKS + eta * m[i, i]
        off = mz[i] - m[i, i] * z[i]
        new = (s[i] - eta * off) / prec + math.sqrt(delta0 / prec) * noise[i]
        mz += m[:, i] * (new - z[i])
        z[i] = new
    state.Z = z
    return state


def gibbs_update_delta0(state, penalty, a0=DEFAULT_A0, b0=DEFAULT_B0):
    """delta0 | nu, Z, theta2, eta: both the likelihood and the spatial prior inform it."""
    resid = state.nu - state.Z[:, None] - state.theta
    shape = a0 + 0.5 * (resid.size + penalty.rank)
    scale = b0 + 0.5 * (float(np.sum(resid**2)) + state.eta * float(penalty.quad_form(state.Z)))
    state.delta0 = scale / state.rng.gamma(shape)
    return state


def eta_conditional(penalty: SplinePenalty, Z, delta0, eta_prior: EtaPrior = EtaPrior()):
    """Log density of eta | Z, delta0: ``pi(eta) eta^(r/2) exp(-eta Z'MZ / (2 delta0))``."""
    rate = float(penalty.quad_form(Z)) / (2.0 * delta0)
    half_rank = 0.5 * penalty.rank

    def log_density(eta):
        eta = np.asarray(eta, dtype=float)
        with np.errstate(divide="ignore"):
            return eta_prior.logpdf(eta) + half_rank * np.log(eta) - rate * eta

    return log_density


def gibbs_update_eta(state, penalty, eta_prior=EtaPrior()):
    log_density = eta_conditional(penalty, state.Z, state.delta0, eta_prior)
    env = rou.build_envelope(log_density)
    state.eta = float(rou.rou_sample(log_density, env, 1, state.rng)[0])
    return state


def _adapt_gain(it: int, burn_in: int) -> float:
    if it >= burn_in:
        return 0.0
    return min(0.5, 5.0 / (it + 1) ** 0.6)


def _run(scheme, panel, penalty, iterations, burn_in, seed, a0, b0, eta_prior, thin, sweep):
    if penalty.n != panel.n_sites:
        raise DimensionMismatch("penalty and panel disagree on the number of sites")
    if not 0 <= burn_in <= iterations:
        raise ValueError("need 0 <= burn_in <= iterations")
    thin = max(int(thin), 1)
    kept = iterations - burn_in
    rng = np.random.default_rng(seed)
    state = initial_state(panel, rng)
    theta2 = np.empty(kept)
    eta = np.empty(kept)
    delta0 = np.empty(kept)
    z_draws, nu_draws = [], []
    z_sum = np.zeros(panel.n_sites)
    n_accept = 0.0

    start = time.perf_counter()
    for it in range(iterations):
        mh_update_nu(state, panel, _adapt_gain(it, burn_in))
        sweep(state)
        k = it - burn_in
        if k >= 0:
            theta2[k] = state.theta2
            eta[k] = state.eta
            delta0[k] = state.delta0
            z_sum += state.Z
            n_accept += state.accepted.mean()
            if k % thin == 0:
                z_draws.append(state.Z.copy())
                nu_draws.append(state.nu.copy())
    duration = time.perf_counter() - start

    n_sites = panel.n_sites
    return ChainOutput(
        scheme=scheme,
        theta2=theta2,
        eta=eta,
        delta0=delta0,
        z_draws=np.array(z_draws).reshape(-1, n_sites),
        nu_draws=np.array(nu_draws).reshape(-1, n_sites, N_WEEKS),
        z_mean=z_sum / kept if kept else np.full(n_sites, np.nan),
        acceptance_rate=n_accept / kept if kept else float("nan"),
        duration=duration,
    )


def run_direct_chain(
    panel: BinomialPanel,
    penalty: SplinePenalty,
    iterations: int,
    burn_in: int,
    seed,
    *,
    a0: float = DEFAULT_A0,
    b0: float = DEFAULT_B0,
    eta_prior: EtaPrior = EtaPrior(),
    thin: int = 10,
) -> ChainOutput:
    """Metropolis-within-Gibbs with the exact (eta, delta0, Z) block."""

    def sweep(state):
        direct_block_update(state, penalty, a0, b0, eta_prior)
        gibbs_update_theta2(state)

    return _run("direct", panel, penalty, iterations, burn_in, seed, a0, b0, eta_prior, thin, sweep)


def run_baseline_gibbs(
    panel: BinomialPanel,
    penalty: SplinePenalty,
    iterations: int,
    burn_in: int,
    seed,
    *,
    a0: float = DEFAULT_A0,
    b0: float = DEFAULT_B0,
    eta_prior: EtaPrior = EtaPrior(),
    thin: int = 10,
) -> ChainOutput:
    """Full-conditional cycle: nu, Z (site by site), theta2, delta0, eta."""

    def sweep(state):
        gibbs_update_z(state, penalty)
        gibbs_update_theta2(state)
        gibbs_update_delta0(state, penalty, a0, b0)
        gibbs_update_eta(state, penalty, eta_prior)

    return _run("baseline", panel, penalty, iterations, burn_in, seed, a0, b0, eta_prior, thin, sweep)
