"""Synthetic federated functional datasets.

Random curves are built from Rademacher-signed wavelet coefficients with
the decay that characterizes a Hölder ball,

    X(t) = R * sum_{l<=L*} sum_k s_lk 2^{-l(alpha+1/2)} psi_lk(t),
    s_lk iid, +1 with probability p and -1 otherwise,

so every draw lies on the boundary of the ball and the population mean has
coefficients R (2p-1) 2^{-l(alpha+1/2)}.  Observations are the curves read
off at the design points plus standard normal measurement noise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import rng as rngmod
from .wavelet import WaveletCoeffs, WaveletFamily, WaveletTable, family


class Design(Enum):
    COMMON = "common"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class ServerConfig:
    """Per-server sample sizes and privacy budget."""

    n: int
    m: int
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0 (math.inf allowed), got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must be in [0, 1), got {self.delta}")

    @property
    def private(self) -> bool:
        return math.isfinite(self.epsilon)


@dataclass(frozen=True)
class FederationConfig:
    servers: tuple[ServerConfig, ...]
    alpha: float
    R: float
    design: Design

    def __post_init__(self):
        if not self.alpha > 0.5:
            raise ValueError(f"alpha must exceed 1/2, got {self.alpha}")
        if self.R <= 0:
            raise ValueError("Hölder radius R must be positive")
        if self.total_individuals < 1:
            raise ValueError("need at least one individual overall")

    @property
    def total_individuals(self) -> int:
        return sum(s.n for s in self.servers)


def default_family(alpha: float) -> WaveletFamily:
    """Daubechies family with ceil(alpha)+1 vanishing moments (> alpha)."""
    return family(f"db{math.ceil(alpha) + 1}")


@dataclass(frozen=True)
class CurveSpec:
    """Parameters of the random-curve generator."""

    R: float = 2.0
    L_star: int = 15
    p: float = 0.9
    alpha: float = 1.0
    family_name: str = ""

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"Rademacher probability must be in [0, 1], got {self.p}")
        if self.L_star < 0:
            raise ValueError("L_star must be >= 0")
        if not self.family_name:
            object.__setattr__(self, "family_name", default_family(self.alpha).name)

    @property
    def family(self) -> WaveletFamily:
        return family(self.family_name)

    def level_scale(self, level) -> np.ndarray:
        return self.R * 2.0 ** (-np.asarray(level, dtype=float) * (self.alpha + 0.5))


@dataclass
class ServerDataset:
    """Design points and observations held by one server."""

    points: np.ndarray  # (n, m), identical rows under common design
    y: np.ndarray       # (n, m)
    config: ServerConfig
    design: Design

    def __post_init__(self):
        n, m = self.config.n, self.config.m
        if self.points.shape != (n, m) or self.y.shape != (n, m):
            raise ValueError("points/y shape inconsistent with server config")
        if np.any(self.points < 0) or np.any(self.points > 1):
            raise ValueError("design points must lie in [0, 1]")


class CurveBatch:
    """Rademacher sign arrays for a batch of curves, one block per level.

    ``signs[l]`` has shape (n_curves, 2^l); the curve coefficients are the
    signs scaled by R 2^{-l(alpha+1/2)}.
    """

    def __init__(self, spec: CurveSpec, signs: list[np.ndarray]):
        self.spec = spec
        self.signs = signs

    @property
    def n_curves(self) -> int:
        return self.signs[0].shape[0]

    def coeffs(self, i: int) -> WaveletCoeffs:
        """Coefficients of curve ``i`` (father block at level 0 is zero)."""
        spec = self.spec
        mothers = [spec.level_scale(l) * self.signs[l][i]
                   for l in range(spec.L_star + 1)]
        return WaveletCoeffs(0, np.zeros(1), mothers)


def true_mean(spec: CurveSpec) -> WaveletCoeffs:
    """Coefficients of the population mean: R (2p-1) 2^{-l(alpha+1/2)}."""
    amp = spec.R * (2.0 * spec.p - 1.0)
    mothers = [np.full(2**l, amp * 2.0 ** (-l * (spec.alpha + 0.5)))
               for l in range(spec.L_star + 1)]
    return WaveletCoeffs(0, np.zeros(1), mothers)


def sample_curve_batch(spec: CurveSpec, n_curves: int,
                       rng: np.random.Generator) -> CurveBatch:
    """Draw ``n_curves`` independent curves (signs only, lazily scaled).

    All levels are drawn as one (n, 2^{L*+1}-1) block so that the first
    rows of a larger batch coincide with a smaller batch from the same
    stream; sample-size sweeps rely on this prefix property.
    """
    total = 2 ** (spec.L_star + 1) - 1
    u = rng.random(size=(n_curves, total), dtype=np.float32)
    flat = np.where(u < spec.p, np.int8(1), np.int8(-1))
    signs, start = [], 0
    for l in range(spec.L_star + 1):
        signs.append(flat[:, start:start + 2**l])
        start += 2**l
    return CurveBatch(spec, signs)


def sample_curve(spec: CurveSpec, rng_seed: int) -> WaveletCoeffs:
    """Draw a single curve, reproducible from the seed."""
    rng = rngmod.make_rng(rng_seed, rngmod.CURVES, 0, 0)
    return sample_curve_batch(spec, 1, rng).coeffs(0)


def evaluate_curves(table: WaveletTable, batch: CurveBatch,
                    points: np.ndarray) -> np.ndarray:
    """Evaluate curve i at points[i, :] for all rows at once.

    Support-aware: per level only the translates overlapping each point
    contribute, so cost is O(levels * support_width) per point.
    """
    spec = batch.spec
    fam = spec.family
    if fam.name != table.family.name:
        raise ValueError("table family does not match curve spec")
    A = fam.vanishing_moments
    width = fam.support_width
    x = np.asarray(points, dtype=float)
    out = np.zeros_like(x)
    rows = np.arange(x.shape[0])[:, None]
    for level in range(spec.L_star + 1):
        two_l = 2**level
        base = np.floor(two_l * x).astype(np.int64)
        frac = two_l * x - base
        acc = np.zeros_like(x)
        s = batch.signs[level]
        for o in range(width):
            k = (base - A + 1 + o) % two_l
            acc += s[rows, k] * table.mother_at(frac + A - 1 - o)
        out += spec.level_scale(level) * 2.0 ** (level / 2.0) * acc
    return out


def make_design(config: ServerConfig, design: Design,
                rng: np.random.Generator) -> np.ndarray:
    """Design point matrix (n, m): j/m grid rows or iid uniforms."""
    if design is Design.COMMON:
        grid = np.arange(1, config.m + 1) / config.m
        return np.tile(grid, (config.n, 1))
    return rng.random(size=(config.n, config.m))


def observe(table: WaveletTable, curves, points: np.ndarray,
            rng: np.random.Generator, noiseless: bool = False) -> np.ndarray:
    """Observations y_ij = X_i(points_ij) + N(0,1) noise (unit variance).

    ``curves`` is a CurveBatch or a list of per-individual WaveletCoeffs.
    """
    points = np.asarray(points, dtype=float)
    if isinstance(curves, CurveBatch):
        y = evaluate_curves(table, curves, points)
    else:
        from .wavelet import reconstruct
        y = np.stack([reconstruct(table, c, row)
                      for c, row in zip(curves, points)])
    if not noiseless:
        y = y + rng.standard_normal(size=points.shape)
    return y


def generate_server_dataset(fed: FederationConfig, spec: CurveSpec,
                            table: WaveletTable, server_index: int,
                            base_seed: int, rep: int = 0,
                            noiseless: bool = False) -> ServerDataset:
    cfg = fed.servers[server_index]
    curves = sample_curve_batch(
        spec, cfg.n, rngmod.make_rng(base_seed, rngmod.CURVES, rep, server_index))
    pts = make_design(
        cfg, fed.design, rngmod.make_rng(base_seed, rngmod.DESIGN, rep, server_index))
    y = observe(table, curves, pts,
                rngmod.make_rng(base_seed, rngmod.MEASUREMENT, rep, server_index),
                noiseless=noiseless)
    return ServerDataset(points=pts, y=y, config=cfg, design=fed.design)


def generate_federation(fed: FederationConfig, spec: CurveSpec,
                        table: WaveletTable, base_seed: int, rep: int = 0,
                        noiseless: bool = False) -> list[ServerDataset]:
    """One dataset per server; streams keyed by (tag, rep, server)."""
    return [generate_server_dataset(fed, spec, table, s, base_seed, rep, noiseless)
            for s in range(len(fed.servers))]


# ---------------------------------------------------------------------------
# CSV round trip: header then (server, individual, j, zeta, y) rows


def save_datasets_csv(datasets: list[ServerDataset], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["server", "individual", "j", "zeta", "y"])
        for s, ds in enumerate(datasets):
            n, m = ds.points.shape
            for i in range(n):
                for j in range(m):
                    writer.writerow([s, i, j + 1,
                                     format(ds.points[i, j], ".17g"),
                                     format(ds.y[i, j], ".17g")])


def load_datasets_csv(path, servers: list[ServerConfig],
                      design: Design) -> list[ServerDataset]:
    expected = ["server", "individual", "j", "zeta", "y"]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != expected:
            raise ValueError(f"bad dataset header {header!r}, expected {expected!r}")
        pts = [np.zeros((c.n, c.m)) for c in servers]
        ys = [np.zeros((c.n, c.m)) for c in servers]
        for row in reader:
            s, i, j = int(row[0]), int(row[1]), int(row[2]) - 1
            pts[s][i, j] = float(row[3])
            ys[s][i, j] = float(row[4])
    return [ServerDataset(points=pts[s], y=ys[s], config=servers[s], design=design)
            for s in range(len(servers))]
