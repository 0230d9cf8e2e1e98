"""Privatized design-point means, bagging, and local polynomial smoothing.

Per server, observations are clipped, averaged per design point, and
released with Gaussian noise; the central server combines servers by
inverse-variance weights, splits the design points into interleaved
groups, smooths each group with a kernel-weighted local polynomial fit of
degree floor(alpha), and averages the group estimates.

The bandwidth is 1/m0 with a floor that guarantees degree+1 group points
inside every window (including the one-sided windows at the boundary,
where the literal 1/m0 leaves a rank-deficient design for degree >= 1).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng as rngmod
from .datagen import Design, FederationConfig, ServerDataset
from .privacy import clip, sigma_common, sup_norm_bound, tau_common
from .rates import RateSolution, solve_common


class AssumptionViolation(RuntimeError):
    """A local-polynomial regularity assumption failed; message names it."""


# kernels on [-1, 1], each integrating to 1

_PHI1 = 0.841344746068542949  # standard normal cdf at 1


def _gauss_trunc(u):
    z = math.sqrt(2.0 * math.pi) * (2.0 * _PHI1 - 1.0)
    return np.where(np.abs(u) <= 1.0, np.exp(-0.5 * u**2) / z, 0.0)


def _epanechnikov(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u**2), 0.0)


def _uniform(u):
    return np.where(np.abs(u) <= 1.0, 0.5, 0.0)


KERNELS = {
    "gauss_trunc": _gauss_trunc,
    "epanechnikov": _epanechnikov,
    "uniform": _uniform,
}


@dataclass(frozen=True)
class LocalPolyConfig:
    degree: int
    bandwidth: float
    kernel: str = "gauss_trunc"
    ridge: float = 1e-10

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; have {sorted(KERNELS)}")

    def kernel_fn(self):
        return KERNELS[self.kernel]


@dataclass(frozen=True)
class BaggingPlan:
    """Interleaved partition of design point indices into B groups."""

    m0: int
    B: int
    groups: tuple = field(repr=False)


def make_groups(m: int, m0: int) -> BaggingPlan:
    """Strided groups: group b holds indices b, b+B, b+2B, ... (B = ceil(m/m0))."""
    if not 1 <= m0 <= m:
        raise ValueError(f"need 1 <= m0 <= m, got m0={m0}, m={m}")
    B = math.ceil(m / m0)
    groups = tuple(np.arange(b, m, B) for b in range(B))
    return BaggingPlan(m0=m0, B=B, groups=groups)


@dataclass
class PrivatizedMeans:
    """Aggregated noisy per-point means and the ingredients used."""

    zeta: np.ndarray      # (m,) shared design grid
    values: np.ndarray    # (m,) combined means
    tau: float
    server_values: np.ndarray  # (S, m)
    server_sigmas: tuple[float, ...]
    server_weights: np.ndarray


def privatized_server_means(dataset: ServerDataset, tau: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Clipped per-point means plus mechanism noise for one server."""
    if dataset.design is not Design.COMMON:
        raise ValueError("privatized means require a common design")
    cfg = dataset.config
    sigma = sigma_common(tau, cfg.m, cfg.n, cfg.epsilon, cfg.delta)
    means = clip(dataset.y, tau).mean(axis=0)
    return means + sigma * rng.standard_normal(size=cfg.m)


def aggregate_means(server_means: list[np.ndarray], servers, m0: int,
                    zeta: np.ndarray, tau: float,
                    sigmas: tuple[float, ...] = ()) -> PrivatizedMeans:
    """Inverse-variance combination with u_s = n^2 e^2 / m0 ^ n."""
    if m0 < 1:
        raise ValueError("m0 must be >= 1")
    u = []
    for s in servers:
        if math.isfinite(s.epsilon):
            u.append(min(s.n**2 * s.epsilon**2 / m0, s.n))
        else:
            u.append(float(s.n))
    u = np.asarray(u, dtype=float)
    if u.sum() <= 0:
        raise ValueError("degenerate config: all aggregation weights vanish")
    w = u / u.sum()
    stacked = np.asarray(server_means)
    return PrivatizedMeans(zeta=zeta, values=w @ stacked, tau=tau,
                           server_values=stacked, server_sigmas=tuple(sigmas),
                           server_weights=w)


# ---------------------------------------------------------------------------
# local polynomial machinery


def _monomials(u: np.ndarray, degree: int) -> np.ndarray:
    """V(u) = (1, u, u^2/2!, ..., u^p/p!) stacked along the last axis."""
    cols = [np.ones_like(u)]
    for q in range(1, degree + 1):
        cols.append(u**q / math.factorial(q))
    return np.stack(cols, axis=-1)


def lp_design_matrix(points: np.ndarray, x: float,
                     config: LocalPolyConfig) -> np.ndarray:
    """Kernel-weighted design matrix (1/(g h)) sum_j V V^T K at one point."""
    points = np.asarray(points, dtype=float)
    h = config.bandwidth
    u = (points - x) / h
    K = config.kernel_fn()(u)
    V = _monomials(u, config.degree)
    return np.einsum("j,ja,jb->ab", K, V, V) / (len(points) * h)


def _weights_grid(points: np.ndarray, xs: np.ndarray,
                  config: LocalPolyConfig) -> np.ndarray:
    """W*[x, j] for a whole evaluation grid at once."""
    points = np.asarray(points, dtype=float)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    g = len(points)
    h = config.bandwidth
    u = (points[None, :] - xs[:, None]) / h
    K = config.kernel_fn()(u)
    V = _monomials(u, config.degree)
    Bm = np.einsum("xj,xja,xjb->xab", K, V, V) / (g * h)
    p1 = config.degree + 1
    lam = np.linalg.eigvalsh(Bm)[:, 0]
    bad = lam < 1e-8
    if np.any(bad):
        # near-singular windows get a ridge repair, then one retest
        tr = np.trace(Bm[bad], axis1=1, axis2=2)
        Bm[bad] += config.ridge * tr[:, None, None] * np.eye(p1)
        lam2 = np.linalg.eigvalsh(Bm[bad])[:, 0]
        if np.any(lam2 < 1e-8):
            where = xs[bad][int(np.argmin(lam2))]
            raise AssumptionViolation(
                f"(LP1) violated: weighted design matrix is singular near x={where:.6g} "
                f"(min eigenvalue {lam2.min():.3e}); too few group points in the window")
    e1 = np.zeros((len(xs), p1, 1))
    e1[:, 0, 0] = 1.0
    z = np.linalg.solve(Bm, e1)[:, :, 0]
    return np.einsum("xa,xja,xj->xj", z, V, K) / (g * h)


def lp_weights(points: np.ndarray, x: float,
               config: LocalPolyConfig) -> np.ndarray:
    """Local polynomial weights at one query point; zero outside the window."""
    return _weights_grid(points, np.asarray([x]), config)[0]


def estimate_group(values: np.ndarray, points: np.ndarray, x: float,
                   config: LocalPolyConfig) -> float:
    """Kernel-weighted fit over one group, evaluated at x."""
    return float(np.dot(lp_weights(points, x, config), values))


def bandwidth_for(m: int, m0: int, degree: int, B: int) -> float:
    """1/m0 with a floor of 1.01 (degree+1) B/m.

    The floor keeps at least degree+1 group points inside the one-sided
    windows at the boundary of [0, 1]; group points sit B/m apart.
    """
    return max(1.0 / m0, 1.01 * (degree + 1) * B / m)


@dataclass
class LPReport:
    min_eigenvalue: float
    argmin_x: float
    argmin_group: int
    lp2_constant: float
    lp2_interval: tuple[float, float]


def check_lp_assumptions(plan: BaggingPlan, points: np.ndarray,
                         config: LocalPolyConfig) -> LPReport:
    """Worst-case diagnostics for the two regularity assumptions.

    Scans a 256-point x grid for the smallest design-matrix eigenvalue
    over all groups, and an interval family for the occupation ratio
    (1/m0) sum_j 1(zeta_j in A) / max(|A|, 1/m0).
    """
    xs = np.linspace(0.0, 1.0, 256)
    worst = math.inf
    arg_x, arg_b = 0.0, 0
    for b, idx in enumerate(plan.groups):
        pts = points[idx]
        for x in xs:
            lam = float(np.linalg.eigvalsh(lp_design_matrix(pts, x, config))[0])
            if lam < worst:
                worst, arg_x, arg_b = lam, float(x), b
    ratio, interval = 0.0, (0.0, 1.0)
    edges = np.linspace(0.0, 1.0, 65)
    for b, idx in enumerate(plan.groups):
        pts = np.sort(points[idx])
        for i, a1 in enumerate(edges):
            for a2 in edges[i + 1:]:
                count = np.searchsorted(pts, a2, side="right") - np.searchsorted(pts, a1, side="left")
                r = (count / plan.m0) / max(a2 - a1, 1.0 / plan.m0)
                if r > ratio:
                    ratio, interval = float(r), (float(a1), float(a2))
    return LPReport(min_eigenvalue=worst, argmin_x=arg_x, argmin_group=arg_b,
                    lp2_constant=ratio, lp2_interval=interval)


# ---------------------------------------------------------------------------
# full pipeline


@lru_cache(maxsize=8)
def _bagged_weight_matrix(zeta_bytes: bytes, m: int, groups_key: tuple,
                          config: LocalPolyConfig, xs_bytes: bytes,
                          n_x: int) -> np.ndarray:
    """(n_x, m) matrix mapping point means to the bagged estimate.

    Depends only on the design grid, the grouping, and the smoothing
    config, so it is shared across replications.
    """
    zeta = np.frombuffer(zeta_bytes).reshape(m)
    xs = np.frombuffer(xs_bytes).reshape(n_x)
    M = np.zeros((n_x, m))
    for idx in groups_key:
        cols = np.asarray(idx)
        M[:, cols] += _weights_grid(zeta[cols], xs, config)
    M /= len(groups_key)
    M.flags.writeable = False
    return M


class CommonEstimate:
    """Bagged local polynomial estimator; callable on points in [0, 1]."""

    def __init__(self, means: PrivatizedMeans, plan: BaggingPlan,
                 config: LocalPolyConfig, d_star: float):
        self.means = means
        self.plan = plan
        self.config = config
        self.d_star = d_star

    def __call__(self, x):
        scalar = np.isscalar(x) or np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        groups_key = tuple(tuple(int(i) for i in g) for g in self.plan.groups)
        M = _bagged_weight_matrix(self.means.zeta.tobytes(), len(self.means.zeta),
                                  groups_key, self.config, xs.tobytes(), len(xs))
        out = M @ self.means.values
        return float(out[0]) if scalar else out


def estimate(datasets: list[ServerDataset], fed: FederationConfig,
             seed: int, rep: int = 0, psi_sup: float | None = None,
             kernel: str = "gauss_trunc", L_star: int = 15,
             single_group: bool = False) -> CommonEstimate:
    """Full pipeline for a shared equispaced grid.

    ``psi_sup`` feeds the sup-norm bound in the clipping threshold; by
    default it is taken from the generator's wavelet family.
    ``single_group`` restricts smoothing to the first group.
    """
    if fed.design is not Design.COMMON:
        raise ValueError("common-design estimator needs a common design")
    zeta = datasets[0].points[0]
    for ds in datasets:
        if ds.design is not Design.COMMON:
            raise ValueError("datasets must all use the common design")
        if ds.config.m != len(zeta) or not np.allclose(ds.points[0], zeta):
            raise ValueError("servers must share one design grid")
    m = len(zeta)
    N = fed.total_individuals

    sol: RateSolution = solve_common(fed.servers, m, fed.alpha)
    m0 = int(min(max(round(sol.d_star), 1), m))
    if psi_sup is None:
        from .datagen import default_family
        from .wavelet import build_table
        psi_sup = build_table(default_family(fed.alpha), 12).sup_norm
    tau = tau_common(N, sup_norm_bound(psi_sup, fed.alpha, fed.R, L_star))

    sigmas = tuple(sigma_common(tau, s.m, s.n, s.epsilon, s.delta)
                   for s in fed.servers)
    server_means = [
        privatized_server_means(ds, tau, rngmod.make_rng(seed, rngmod.MECHANISM, rep, s))
        for s, ds in enumerate(datasets)
    ]
    means = aggregate_means(server_means, fed.servers, m0, zeta, tau, sigmas)
    plan = make_groups(m, m0)
    stride = plan.B  # spacing of points inside one group is stride/m
    degree = math.floor(fed.alpha)
    # remainder groups smaller than degree+1 cannot support the fit at all
    kept = tuple(g for g in plan.groups if len(g) >= degree + 1)
    if not kept:
        raise AssumptionViolation(
            f"(LP1) violated: groups of size {m0} cannot support a "
            f"degree-{degree} fit")
    if single_group:
        kept = (kept[0],)
    plan = BaggingPlan(m0=plan.m0, B=len(kept), groups=kept)
    config = LocalPolyConfig(degree=degree,
                             bandwidth=bandwidth_for(m, m0, degree, stride),
                             kernel=kernel)
    return CommonEstimate(means, plan, config, sol.d_star)


# ---------------------------------------------------------------------------
# CSV emission


def means_to_csv(means: PrivatizedMeans, path) -> None:
    """Per-server privatized means: (server, j, zeta, value)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["server", "j", "zeta", "value"])
        for s in range(means.server_values.shape[0]):
            for j in range(means.server_values.shape[1]):
                writer.writerow([s, j + 1, format(means.zeta[j], ".17g"),
                                 format(means.server_values[s, j], ".17g")])


def evaluations_to_csv(xs: np.ndarray, fhat: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "fhat"])
        for x, v in zip(xs, fhat):
            writer.writerow([format(x, ".17g"), format(v, ".17g")])
