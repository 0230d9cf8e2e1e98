"""Monte Carlo experiment orchestration.

A sweep varies one of n, m, or epsilon over a value list while holding
the rest of the federation fixed.  Replication r draws its curves, design
points, and measurement noise from streams keyed by (tag, r, server) only,
so every sweep value sees the same underlying randomness (common random
numbers).  Sample-size sweeps slice a single batch generated at the
largest value, which makes the pairing exact; the mechanism noise stream
is shared too, so privatization noise is coupled across epsilon values.

Replications can be distributed over a process pool (FEDFDA_WORKERS);
results are reduced by replication index, so the output is identical for
any worker count.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import common, independent
from . import rng as rngmod
from .datagen import (CurveSpec, Design, FederationConfig, ServerConfig,
                      ServerDataset, evaluate_curves, make_design,
                      sample_curve_batch, true_mean)
from .wavelet import build_table, quadrature_grid, reconstruct

IMSE_DEPTH = 12
TABLE_DEPTH = 14

DELTA_FIXED = "fixed"
DELTA_ONE_OVER_N_SQUARED = "one_over_n_squared"


@dataclass(frozen=True)
class ExperimentSpec:
    """A full experiment: curve model, federation template, sweep, seeds."""

    design: Design
    curve: CurveSpec
    servers: tuple[ServerConfig, ...]
    sweep: str                      # "n" | "m" | "epsilon"
    sweep_values: tuple[float, ...]
    replications: int
    base_seed: int
    delta_rule: str = DELTA_ONE_OVER_N_SQUARED
    delta_value: float = 1e-5
    noiseless: bool = False
    radius: float | None = None  # estimator-side Hölder radius; default curve.R

    def __post_init__(self):
        if self.sweep not in ("n", "m", "epsilon"):
            raise ValueError(f"sweep must be one of n, m, epsilon; got {self.sweep!r}")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if not self.sweep_values:
            raise ValueError("sweep_values must be nonempty")
        if any(v <= 0 for v in self.sweep_values):
            raise ValueError("sweep values must be positive")
        if self.delta_rule not in (DELTA_FIXED, DELTA_ONE_OVER_N_SQUARED):
            raise ValueError(f"unknown delta rule {self.delta_rule!r}")

    @property
    def alpha(self) -> float:
        return self.curve.alpha

    @property
    def holder_radius(self) -> float:
        return self.radius if self.radius is not None else self.curve.R

    def server_delta(self, n: int, epsilon: float) -> float:
        if not math.isfinite(epsilon):
            return 0.0
        if self.delta_rule == DELTA_ONE_OVER_N_SQUARED:
            return 1.0 / n**2
        return self.delta_value

    def federation_at(self, value: float) -> FederationConfig:
        """The federation with the sweep variable substituted on every server."""
        servers = []
        for s in self.servers:
            n, m, eps = s.n, s.m, s.epsilon
            if self.sweep == "n":
                n = int(value)
            elif self.sweep == "m":
                m = int(value)
            else:
                eps = float(value)
            servers.append(ServerConfig(n=n, m=m, epsilon=eps,
                                        delta=self.server_delta(n, eps)))
        return FederationConfig(tuple(servers), self.curve.alpha,
                                self.holder_radius, self.design)

    @property
    def base_federation(self) -> FederationConfig:
        """The configured servers as they stand, no sweep substitution."""
        return FederationConfig(self.servers, self.curve.alpha,
                                self.holder_radius, self.design)

    @property
    def max_shapes(self) -> tuple[int, int]:
        """(n, m) ceilings over the sweep, used for shared batch generation."""
        n_max = max(s.n for s in self.servers)
        m_max = max(s.m for s in self.servers)
        if self.sweep == "n":
            n_max = max(n_max, int(max(self.sweep_values)))
        elif self.sweep == "m":
            m_max = max(m_max, int(max(self.sweep_values)))
        return n_max, m_max


@dataclass
class RiskRow:
    sweep_value: float
    mean_imse: float
    stderr: float
    reps: int
    d_star: float
    seconds: float

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("standard error cannot be negative")


class RepData:
    """Shared raw randomness for one replication at the sweep's max shapes.

    Curves and noise are generated once per (rep, server) and sliced per
    sweep value; slicing a row prefix reproduces exactly what a direct
    generation at the smaller n would draw.
    """

    def __init__(self, spec: ExperimentSpec, rep: int):
        self.spec = spec
        self.rep = rep
        self.table = shared_table(spec.curve)
        n_max, m_max = spec.max_shapes
        self.curves = []
        self.noise = []
        self.points_max = []
        self._common_y = {}
        for s in range(len(spec.servers)):
            self.curves.append(sample_curve_batch(
                spec.curve, n_max,
                rngmod.make_rng(spec.base_seed, rngmod.CURVES, rep, s)))
            self.noise.append(
                rngmod.make_rng(spec.base_seed, rngmod.MEASUREMENT, rep, s)
                .standard_normal(size=(n_max, m_max)))
            if spec.design is Design.INDEPENDENT:
                template = ServerConfig(n=n_max, m=m_max, epsilon=math.inf)
                self.points_max.append(make_design(
                    template, Design.INDEPENDENT,
                    rngmod.make_rng(spec.base_seed, rngmod.DESIGN, rep, s)))

    def datasets(self, fed: FederationConfig) -> list[ServerDataset]:
        out = []
        for s, cfg in enumerate(fed.servers):
            if self.spec.design is Design.INDEPENDENT:
                pts = self.points_max[s][:cfg.n, :cfg.m]
                y = evaluate_curves(self.table, _batch_prefix(self.curves[s], cfg.n), pts)
            else:
                grid = np.arange(1, cfg.m + 1) / cfg.m
                pts = np.tile(grid, (cfg.n, 1))
                key = (s, cfg.m)
                if key not in self._common_y:
                    full = evaluate_curves(self.table, self.curves[s],
                                           np.tile(grid, (self.curves[s].n_curves, 1)))
                    self._common_y[key] = full
                y = self._common_y[key][:cfg.n]
            if not self.spec.noiseless:
                y = y + self.noise[s][:cfg.n, :cfg.m]
            out.append(ServerDataset(points=pts, y=y, config=cfg,
                                     design=self.spec.design))
        return out


def _batch_prefix(batch, n: int):
    if batch.n_curves == n:
        return batch
    from .datagen import CurveBatch
    return CurveBatch(batch.spec, [s[:n] for s in batch.signs])


def base_datasets(spec: ExperimentSpec, rep: int = 0) -> list[ServerDataset]:
    """Datasets for the configured federation, outside any sweep."""
    from .datagen import generate_federation
    return generate_federation(spec.base_federation, spec.curve,
                               shared_table(spec.curve), spec.base_seed,
                               rep=rep, noiseless=spec.noiseless)


_TABLE_CACHE: dict = {}


def shared_table(curve: CurveSpec):
    key = (curve.family_name, TABLE_DEPTH)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = build_table(curve.family, TABLE_DEPTH)
    return _TABLE_CACHE[key]


def imse_quadrature(fhat_values: np.ndarray, ftrue_values: np.ndarray,
                    depth: int = IMSE_DEPTH) -> float:
    """Trapezoid integral of (fhat - f)^2 on the 2^depth grid."""
    _, w = quadrature_grid(depth)
    diff = np.asarray(fhat_values) - np.asarray(ftrue_values)
    return float(np.sum(w * diff * diff))


def true_mean_values(curve: CurveSpec, depth: int = IMSE_DEPTH) -> np.ndarray:
    x, _ = quadrature_grid(depth)
    return reconstruct(shared_table(curve), true_mean(curve), x)


def _estimate(spec: ExperimentSpec, fed: FederationConfig,
              datasets: list[ServerDataset], rep: int):
    if spec.design is Design.INDEPENDENT:
        return independent.estimate(datasets, fed, shared_table(spec.curve),
                                    seed=spec.base_seed, rep=rep)
    return common.estimate(datasets, fed, seed=spec.base_seed, rep=rep,
                           psi_sup=shared_table(spec.curve).sup_norm,
                           L_star=spec.curve.L_star)


def replication_imse(spec: ExperimentSpec, value: float, rep: int,
                     data: RepData | None = None) -> tuple[float, float]:
    """(IMSE, effective dimension) of one replication at one sweep value."""
    if data is None:
        data = RepData(spec, rep)
    fed = spec.federation_at(value)
    try:
        datasets = data.datasets(fed)
        est = _estimate(spec, fed, datasets, rep)
        x, _ = quadrature_grid(IMSE_DEPTH)
        imse = imse_quadrature(est(x), true_mean_values(spec.curve))
    except Exception as e:
        raise RuntimeError(
            f"replication {rep} failed at {spec.sweep}={value}: {e}") from e
    return imse, est.d_star


def run_replication(spec: ExperimentSpec, value: float, rep: int) -> float:
    """IMSE of a single replication (standalone entry point)."""
    return replication_imse(spec, value, rep)[0]


def _rep_worker(args):
    spec, rep = args
    data = RepData(spec, rep)
    return [replication_imse(spec, value, rep, data)
            for value in sorted(spec.sweep_values)]


def worker_count() -> int:
    raw = os.environ.get("FEDFDA_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_sweep(spec: ExperimentSpec, timing: bool = True) -> list[RiskRow]:
    """Mean IMSE per sweep value over paired replications, sorted by value."""
    values = sorted(spec.sweep_values)
    t0 = time.perf_counter()
    jobs = [(spec, rep) for rep in range(spec.replications)]
    workers = worker_count()
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_rep_worker, jobs))
    else:
        results = [_rep_worker(j) for j in jobs]
    elapsed = time.perf_counter() - t0
    rows = []
    for i, value in enumerate(values):
        imses = np.array([results[r][i][0] for r in range(spec.replications)])
        d_star = results[0][i][1]
        stderr = (float(imses.std(ddof=1)) / math.sqrt(len(imses))
                  if len(imses) > 1 else 0.0)
        rows.append(RiskRow(sweep_value=value, mean_imse=float(imses.mean()),
                            stderr=stderr, reps=spec.replications,
                            d_star=d_star,
                            seconds=elapsed / len(values) if timing else 0.0))
    return rows


def sweep_imse_matrix(spec: ExperimentSpec) -> np.ndarray:
    """(reps, values) IMSE matrix with paired replications (values sorted)."""
    out = np.zeros((spec.replications, len(spec.sweep_values)))
    for rep in range(spec.replications):
        data = RepData(spec, rep)
        for i, value in enumerate(sorted(spec.sweep_values)):
            out[rep, i] = replication_imse(spec, value, rep, data)[0]
    return out


# ---------------------------------------------------------------------------
# emission

CSV_HEADER = ["sweep", "mean_imse", "stderr", "reps", "d_star", "seconds"]


def emit_csv(rows: list[RiskRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([format(r.sweep_value, ".17g"),
                             format(r.mean_imse, ".17g"),
                             format(r.stderr, ".17g"),
                             r.reps,
                             format(r.d_star, ".17g"),
                             format(r.seconds, ".17g")])


def load_csv(path) -> list[RiskRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"bad risk csv header {header!r}")
        for r in reader:
            rows.append(RiskRow(sweep_value=float(r[0]), mean_imse=float(r[1]),
                                stderr=float(r[2]), reps=int(r[3]),
                                d_star=float(r[4]), seconds=float(r[5])))
    return rows


def emit_plot(rows: list[RiskRow], path, image_path=None) -> None:
    """Log-scale series data (sweep, log10 IMSE), optionally a vector image."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep", "log10_sweep", "log10_mean_imse"])
        for r in rows:
            writer.writerow([format(r.sweep_value, ".17g"),
                             format(math.log10(r.sweep_value), ".17g"),
                             format(math.log10(r.mean_imse), ".17g")
                             if r.mean_imse > 0 else "-inf"])
    if image_path is not None:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog([r.sweep_value for r in rows], [r.mean_imse for r in rows],
                  marker="o")
        ax.set_xlabel("sweep value")
        ax.set_ylabel("mean IMSE")
        fig.tight_layout()
        fig.savefig(image_path)
        plt.close(fig)
