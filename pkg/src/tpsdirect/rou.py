"""Ratio-of-uniforms sampling for unnormalized densities on (0, inf).

Works in log space throughout.  The target is normalized by its numerical
maximum, so the envelope is ``0 < u <= 1`` and ``0 < v <= b`` with
``b = sup x * sqrt(h(x))``; a proposal is kept when ``u**2 <= h(v / u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import AcceptanceStall, UnboundedPosterior

LOG_LO = math.log(1e-8)
LOG_HI = math.log(1e8)
GRID_SIZE = 200
TAIL_PROBES = (1e8, 1e9, 1e10)
# allowed growth of log(x sqrt(h)) across the tail probes; any power-law
# growth x**e with e > 0.02 trips it
TAIL_SLACK = 0.1
STALL_PROPOSALS = 1_000_000
STALL_RATE = 1e-3

LogDensity = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RouEnvelope:
    sqrt_h_max: float
    u_eta_max: float
    mode: float
    log_h_max: float


def _argmax_log(f, t_grid, values):
    """Refine a grid maximum of ``f(t)`` by golden-section search."""
    i = int(np.nanargmax(values))
    if i == 0 or i == len(t_grid) - 1:
        return float(t_grid[i]), float(values[i])
    res = optimize.minimize_scalar(
        lambda t: -f(t),
        bracket=(t_grid[i - 1], t_grid[i], t_grid[i + 1]),
        method="golden",
        options={"xtol": 1e-10},
    )
    t_best, v_best = float(res.x), float(-res.fun)
    if v_best < values[i]:
        return float(t_grid[i]), float(values[i])
    return t_best, v_best


def build_envelope(log_density: LogDensity, grid_size: int = GRID_SIZE) -> RouEnvelope:
    """Locate the mode of ``h`` and the bound on ``x * sqrt(h(x))``.

    Raises UnboundedPosterior when ``x**2 h(x)`` keeps growing in the far
    tail (the ratio-of-uniforms region would be unbounded).
    """
    t_grid = np.linspace(LOG_LO, LOG_HI, grid_size)
    with np.errstate(all="ignore"):
        lh_grid = np.asarray(log_density(np.exp(t_grid)), dtype=float)
    if not np.any(np.isfinite(lh_grid)) or np.any(lh_grid == np.inf):
        raise UnboundedPosterior("log density is not finite on the search grid")

    def lh(t):
        with np.errstate(all="ignore"):
            return float(log_density(np.array([math.exp(t)]))[0])

    t_mode, log_h_max = _argmax_log(lh, t_grid, np.where(np.isnan(lh_grid), -np.inf, lh_grid))
    if not math.isfinite(log_h_max):
        raise UnboundedPosterior("could not locate a finite maximum of the density")

    def lg(t):
        return t + 0.5 * (lh(t) - log_h_max)

    lg_grid = t_grid + 0.5 * (lh_grid - log_h_max)
    _, log_b = _argmax_log(lg, t_grid, np.where(np.isnan(lg_grid), -np.inf, lg_grid))

    probes = np.log(TAIL_PROBES)
    lg_tail = np.array([lg(t) for t in probes])
    if np.any(np.isnan(lg_tail)) or np.any(lg_tail == np.inf):
        raise UnboundedPosterior("density is not finite in the far tail")
    if lg_tail[-1] > lg_tail[0] + TAIL_SLACK:
        raise UnboundedPosterior(
            "x^2 h(x) grows without bound in the tail; the prior on eta is too heavy-tailed"
        )
    log_b = max(log_b, float(lg_tail.max()))
    return RouEnvelope(
        sqrt_h_max=1.0,
        u_eta_max=math.exp(log_b),
        mode=math.exp(t_mode),
        log_h_max=log_h_max,
    )


def rou_sample(
    log_density: LogDensity,
    env: RouEnvelope,
    size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``size`` variates with density proportional to ``exp(log_density)``."""
    out = np.empty(size)
    filled = 0
    proposed = 0
    rate = 0.5
    while filled < size:
        need = size - filled
        m = int(min(max(math.ceil(1.1 * need / rate) + 8, 16), STALL_PROPOSALS))
        u = 1.0 - rng.random(m)
        v = env.u_eta_max * (1.0 - rng.random(m))
        x = v / u
        with np.errstate(all="ignore"):
            keep = 2.0 * np.log(u) <= np.asarray(log_density(x)) - env.log_h_max
        got = x[keep][:need]
        out[filled:filled + got.size] = got
        filled += got.size
        proposed += m
        rate = max(filled / proposed, STALL_RATE / 10)
        if proposed >= STALL_PROPOSALS and filled / proposed < STALL_RATE:
            raise AcceptanceStall(
                f"ratio-of-uniforms acceptance {filled}/{proposed} is below {STALL_RATE:g}"
            )
    return out
