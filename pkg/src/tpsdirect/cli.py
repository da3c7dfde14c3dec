"""Command-line front end.

    tpsdirect synth --kind gaussian --seed 1 --out data.csv
    tpsdirect fit-gaussian --data data.csv --value-col value --draws 10000 --out run/
    tpsdirect fit-binomial --data turkey.csv --iters 20000 --out run/

Exit codes: 0 success, 2 data error, 3 numerical error, 4 sampler error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .data import ingest_panel, ingest_points, make_synthetic, write_records, write_table
from .diagnostics import QUANTILE_LEVELS, acf, ess, mcse, summarize
from .errors import TooShort, TpsError
from .glmm import run_baseline_gibbs, run_direct_chain
from .penalty import build_penalty, evaluate_surface, recover_coefficients
from .sampler import DEFAULT_A0, DEFAULT_B0, EtaPrior, build_cache, draw_joint

log = logging.getLogger("tpsdirect")

MAX_LAG = 20
MAX_SURFACE_DRAWS = 1000
GRID_PAD = 0.05
QUANTILE_NAMES = [f"q{100 * q:g}" for q in QUANTILE_LEVELS]


@dataclass
class RunConfig:
    model: str
    data: str
    out: str
    value_col: str = "value"
    transform: str = "none"
    a0: float = DEFAULT_A0
    b0: float = DEFAULT_B0
    eta_prior: str = "pareto"
    draws: int = 10_000
    iterations: int = 20_000
    burn_in: Optional[int] = None
    thin: int = 10
    seed: int = 0
    grid: tuple = (50, 50)
    bbox: Optional[tuple] = None
    jitter: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.model not in ("gaussian", "binomial"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.draws <= 0 or self.iterations <= 0:
            raise ValueError("draws and iterations must be positive")
        if min(self.grid) < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if self.a0 < 0 or self.b0 < 0:
            raise ValueError("a0 and b0 must be nonnegative")
        if self.burn_in is None:
            self.burn_in = self.iterations // 10
        if not 0 <= self.burn_in <= self.iterations:
            raise ValueError("burn-in must lie in [0, iterations]")
        self.grid = tuple(self.grid)
        if self.bbox is not None:
            self.bbox = tuple(self.bbox)

    @classmethod
    def from_manifest(cls, path, out=None) -> "RunConfig":
        """Rebuild the configuration recorded in a ``manifest.json``, optionally redirecting output."""
        cfg = json.loads(Path(path).read_text())["config"]
        if out is not None:
            cfg["out"] = str(out)
        return cls(**cfg)


def _eta_prior(cfg: RunConfig) -> EtaPrior:
    if cfg.eta_prior != "pareto":
        raise ValueError(f"unsupported eta prior {cfg.eta_prior!r}")
    return EtaPrior.pareto()


def _manifest(cfg: RunConfig, files, wall, extra=None) -> dict:
    out = {
        "config": dataclasses.asdict(cfg),
        "argv": sys.argv[1:],
        "seed": cfg.seed,
        "versions": {
            "tpsdirect": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_clock_seconds": wall,
        "files": sorted(files),
    }
    if extra:
        out.update(extra)
    return out


def _diagnostic_rows(named_chains):
    rows = []
    for name, values in named_chains:
        lags = min(MAX_LAG, len(values) - 1)
        rho = np.full(MAX_LAG, np.nan)
        try:
            rho[:lags] = acf(values, lags)[1:]
        except (TooShort, ValueError):
            pass
        try:
            e, se = ess(values), mcse(values)
        except (TooShort, ValueError):
            e = se = float("nan")
        rows.append([name, *rho, e, se])
    return rows


def _diagnostic_header():
    return ["parameter"] + [f"acf_{k}" for k in range(1, MAX_LAG + 1)] + ["ess", "mcse"]


def _summary_rows(named_chains):
    rows = []
    for name, values in named_chains:
        s = summarize(values)
        rows.append([name, s["mean"], s["sd"], *(s[q] for q in QUANTILE_NAMES)])
    return rows


SUMMARY_HEADER = ["parameter", "mean", "sd"] + QUANTILE_NAMES


def draw_columns(draws):
    """Named scalar chains of a draws table: eta, delta0, nu_1..nu_n."""
    cols = [("eta", draws.eta), ("delta0", draws.delta0)]
    cols += [(f"nu_{i + 1}", draws.nu[:, i]) for i in range(draws.nu.shape[1])]
    return cols


def summary_from_table(header, table):
    """Summary rows for every column of a draws table (used to re-derive summary.csv)."""
    return _summary_rows([(name, table[:, j]) for j, name in enumerate(header)])


def grid_points(raw_sites, grid, bbox=None):
    if bbox is None:
        lo, hi = raw_sites.min(axis=0), raw_sites.max(axis=0)
        pad = GRID_PAD * (hi - lo)
        bbox = (lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1])
    xs = np.linspace(bbox[0], bbox[1], grid[0])
    ys = np.linspace(bbox[2], bbox[3], grid[1])
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def thinned_index(n_draws, limit=MAX_SURFACE_DRAWS):
    step = max(1, math.ceil(n_draws / limit))
    return np.arange(0, n_draws, step)


def surface_summary(penalty, nu_draws, query):
    """Pointwise mean and 95% band of the posterior surface from per-draw splines."""
    coeffs = recover_coefficients(penalty, nu_draws)
    f = np.atleast_2d(evaluate_surface(coeffs, penalty.design, query, penalty.kernel))
    lo, hi = np.quantile(f, [0.025, 0.975], axis=0)
    return f.mean(axis=0), lo, hi


def run_gaussian(cfg: RunConfig) -> dict:
    start = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    design, y = ingest_points(cfg.data, cfg.value_col, cfg.transform, jitter=cfg.jitter, seed=cfg.seed)
    penalty = build_penalty(design)
    cache = build_cache(penalty, y, cfg.a0, cfg.b0, _eta_prior(cfg))
    draws = draw_joint(penalty, cache, cfg.draws, cfg.seed, workers=cfg.workers)

    chains = draw_columns(draws)
    header = [name for name, _ in chains]
    files = {}
    table = np.column_stack([draws.eta, draws.delta0, draws.nu])
    files["draws"] = write_table(out / "draws.csv", header, table)
    files["summary"] = write_records(out / "summary.csv", SUMMARY_HEADER, summary_from_table(header, table))
    files["diagnostics"] = write_records(out / "diagnostics.csv", _diagnostic_header(), _diagnostic_rows(chains))

    query = grid_points(design.raw_sites, cfg.grid, cfg.bbox)
    idx = thinned_index(draws.n_draws)
    mean, lo, hi = surface_summary(penalty, draws.nu[idx], query)
    files["surface"] = write_table(
        out / "surface.csv", ["x", "y", "mean", "q2.5", "q97.5"], [query[:, 0], query[:, 1], mean, lo, hi]
    )

    wall = time.perf_counter() - start
    manifest = _manifest(
        cfg,
        [p.name for p in files.values()] + ["manifest.json"],
        wall,
        {"n_sites": design.n, "n_draws": draws.n_draws, "surface_draws": int(idx.size)},
    )
    files["manifest"] = out / "manifest.json"
    files["manifest"].write_text(json.dumps(manifest, indent=2) + "\n")
    return files


def run_binomial(cfg: RunConfig) -> dict:
    start = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    design, panel = ingest_panel(cfg.data, jitter=cfg.jitter, seed=cfg.seed)
    penalty = build_penalty(design)
    prior = _eta_prior(cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    kwargs = dict(a0=cfg.a0, b0=cfg.b0, eta_prior=prior, thin=cfg.thin)
    chains = {
        "direct": run_direct_chain(panel, penalty, cfg.iterations, cfg.burn_in, seeds[0], **kwargs),
        "baseline": run_baseline_gibbs(panel, penalty, cfg.iterations, cfg.burn_in, seeds[1], **kwargs),
    }

    files = {}
    ess_rows = []
    extra = {"n_sites": panel.n_sites, "chains": {}}
    for name, ch in chains.items():
        scalars = [("theta2", ch.theta2), ("eta", ch.eta), ("delta0", ch.delta0)]
        files[f"{name}_draws"] = write_table(
            out / f"{name}_draws.csv", ["theta2", "eta", "delta0"], [ch.theta2, ch.eta, ch.delta0]
        )
        z_chains = [(f"Z_{i + 1}", ch.z_draws[:, i]) for i in range(panel.n_sites)]
        if ch.n_records >= 2:
            files[f"{name}_summary"] = write_records(
                out / f"{name}_summary.csv", SUMMARY_HEADER, _summary_rows(scalars + z_chains)
            )
        diag = _diagnostic_rows(scalars)
        files[f"{name}_diagnostics"] = write_records(out / f"{name}_diagnostics.csv", _diagnostic_header(), diag)
        ess_index = _diagnostic_header().index("ess")
        ess_rows.append([name] + [row[ess_index] for row in diag])
        extra["chains"][name] = {
            "records": ch.n_records,
            "acceptance_rate": ch.acceptance_rate,
            "duration_seconds": ch.duration,
        }
    files["ess_comparison"] = write_records(
        out / "ess_comparison.csv", ["scheme", "ess_theta2", "ess_eta", "ess_delta0"], ess_rows
    )
    files["z_posterior"] = write_table(
        out / "z_posterior.csv",
        ["x", "y", "z_mean_direct", "z_mean_baseline"],
        [panel.centroids[:, 0], panel.centroids[:, 1], chains["direct"].z_mean, chains["baseline"].z_mean],
    )

    wall = time.perf_counter() - start
    manifest = _manifest(cfg, [p.name for p in files.values()] + ["manifest.json"], wall, extra)
    files["manifest"] = out / "manifest.json"
    files["manifest"].write_text(json.dumps(manifest, indent=2) + "\n")
    return files


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tpsdirect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--data", required=True, help="input CSV with x,y columns")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--a0", type=float, default=DEFAULT_A0)
        p.add_argument("--b0", type=float, default=DEFAULT_B0)
        p.add_argument("--jitter", type=float, metavar="EPS", help="seeded uniform jitter of the sites")
        p.add_argument("--out", required=True, help="output directory")

    g = sub.add_parser("fit-gaussian", help="direct sampling for Gaussian data")
    common(g)
    g.add_argument("--value-col", default="value")
    g.add_argument("--log", action="store_true", help="model log(value)")
    g.add_argument("--draws", type=int, default=10_000)
    g.add_argument("--grid", type=int, nargs=2, metavar=("NX", "NY"), default=(50, 50))
    g.add_argument("--bbox", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    g.add_argument("--workers", type=int, default=1)

    b = sub.add_parser("fit-binomial", help="direct-block and baseline Gibbs chains for binomial counts")
    common(b)
    b.add_argument("--iters", type=int, default=20_000)
    b.add_argument("--burn-in", type=int, help="default: 10%% of --iters")
    b.add_argument("--thin", type=int, default=10, help="thinning of stored Z snapshots")

    s = sub.add_parser("synth", help="write a seeded synthetic dataset")
    s.add_argument("--kind", choices=("gaussian", "turkey"), required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output CSV path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "synth":
            make_synthetic(args.kind, args.seed, args.out)
            return 0
        if args.command == "fit-gaussian":
            cfg = RunConfig(
                model="gaussian",
                data=args.data,
                out=args.out,
                value_col=args.value_col,
                transform="log" if args.log else "none",
                a0=args.a0,
                b0=args.b0,
                draws=args.draws,
                seed=args.seed,
                grid=tuple(args.grid),
                bbox=tuple(args.bbox) if args.bbox else None,
                jitter=args.jitter,
                workers=args.workers,
            )
            run_gaussian(cfg)
        else:
            cfg = RunConfig(
                model="binomial",
                data=args.data,
                out=args.out,
                a0=args.a0,
                b0=args.b0,
                iterations=args.iters,
                burn_in=args.burn_in,
                thin=args.thin,
                seed=args.seed,
                jitter=args.jitter,
            )
            run_binomial(cfg)
    except TpsError as exc:
        print(f"tpsdirect: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"tpsdirect: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
