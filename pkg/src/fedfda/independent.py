"""Private wavelet projection estimator for the independent design.

Each server clips the per-individual projection statistics

    U_{i,lk} = (1/m) sum_j Y_ij psi_lk(zeta_ij)

at a level-dependent threshold, averages them, and adds Gaussian noise
calibrated to the l2 sensitivity of the rescaled coefficient vector.  The
noise is added at the original coefficient scale with the equivalent
variance (one numerical pass; same distribution as rescale/noise/unscale).
The central server combines the per-server transcripts with level-wise
inverse-variance weights and reconstructs.

Father coefficients at the coarsest level are thresholded and privatized
exactly like mother coefficients at that level.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .datagen import Design, FederationConfig, ServerDataset
from .privacy import (ClipThresholdParams, DEFAULT_CONCENTRATION, clip,
                      sigma_independent, tau_independent)
from .rates import RateSolution, solve_independent
from .wavelet import (BasisIndex, WaveletCoeffs, WaveletTable,
                      default_coarsest_level, evaluate_phi, evaluate_psi,
                      overlap_constant, reconstruct)


@dataclass
class CoeffTranscript:
    """The DP message released by one server: noisy coefficients per level."""

    server_id: int
    l0: int
    L: int
    father: np.ndarray            # (2^l0,) noisy father coefficients
    levels: list[np.ndarray]      # levels[j]: (2^(l0+j),) for l = l0..L
    taus: list[float]             # clipping threshold per level l0..L
    sigmas: list[float]           # mechanism noise sd per level l0..L

    def level(self, l: int) -> np.ndarray:
        return self.levels[l - self.l0]


def individual_statistic(y_row, zeta_row, table: WaveletTable,
                         idx: BasisIndex) -> float:
    """U_{i,lk}: average of Y_ij psi_lk(zeta_ij) over one individual's points."""
    vals = evaluate_psi(table, idx, np.asarray(zeta_row, dtype=float))
    return float(np.mean(np.asarray(y_row, dtype=float) * vals))


def _statistics_block(dataset: ServerDataset, table: WaveletTable, level: int,
                      father: bool) -> np.ndarray:
    """U[i, k] for all individuals and translates at one level."""
    pts = dataset.points
    y = dataset.y
    n, m = pts.shape
    two_l = 2**level
    A = table.family.vanishing_moments
    base = np.floor(two_l * pts).astype(np.int64)
    frac = two_l * pts - base
    row_off = (np.arange(n) * two_l)[:, None]
    U = np.zeros(n * two_l)
    for o in range(table.family.support_width):
        if father:
            k = (base - o) % two_l
            vals = table.father_at(frac + o)
        else:
            k = (base - A + 1 + o) % two_l
            vals = table.mother_at(frac + A - 1 - o)
        U += np.bincount((row_off + k).ravel(), weights=(y * vals).ravel(),
                         minlength=n * two_l)
    return 2.0 ** (level / 2.0) / m * U.reshape(n, two_l)


def default_clip_params(fed: FederationConfig, table: WaveletTable,
                        c: float = DEFAULT_CONCENTRATION) -> ClipThresholdParams:
    return ClipThresholdParams(c=c, N=fed.total_individuals,
                               psi_sup=table.sup_norm, alpha=fed.alpha, R=fed.R)


def server_transcript(dataset: ServerDataset, fed: FederationConfig,
                      table: WaveletTable, L: int, rng: np.random.Generator,
                      params: ClipThresholdParams | None = None,
                      l0: int | None = None, server_id: int = 0) -> CoeffTranscript:
    """Clip, average, and privatize one server's coefficient statistics."""
    if dataset.design is not Design.INDEPENDENT:
        warnings.warn("running the independent-design estimator on a common design")
    if dataset.y.size == 0:
        raise ValueError("empty dataset")
    if l0 is None:
        l0 = default_coarsest_level(table.family)
    if L < l0:
        raise ValueError(f"need L >= l0, got L={L}, l0={l0}")
    if params is None:
        params = default_clip_params(fed, table)
    cfg = dataset.config
    c_a = overlap_constant(table.family)

    taus, sigmas, levels = [], [], []
    father = None
    for level in range(l0, L + 1):
        tau = tau_independent(level, cfg.m, params)
        sigma = sigma_independent(L, level, cfg.m, tau, cfg.n,
                                  cfg.epsilon, cfg.delta, c_a)
        taus.append(tau)
        sigmas.append(sigma)
        blocks = [("mother", _statistics_block(dataset, table, level, father=False))]
        if level == l0:
            blocks.insert(0, ("father", _statistics_block(dataset, table, level, father=True)))
        for kind, U in blocks:
            mean = clip(U, tau).mean(axis=0)
            noisy = mean + sigma * rng.standard_normal(size=mean.shape)
            if kind == "father":
                father = noisy
            else:
                levels.append(noisy)
    return CoeffTranscript(server_id=server_id, l0=l0, L=L, father=father,
                           levels=levels, taus=taus, sigmas=sigmas)


def rescaled_clipped_vector(dataset: ServerDataset, table: WaveletTable,
                            l0: int, L: int,
                            params: ClipThresholdParams) -> np.ndarray:
    """Pre-noise statistic vector at the rescaled (unit-sensitivity) scale.

    Concatenates clip-mean / (tau_l sqrt(2^l ^ m)) over the father block
    and all mother levels; the audit measures its l2 sensitivity.
    """
    cfg = dataset.config
    out = []
    for level in range(l0, L + 1):
        tau = tau_independent(level, cfg.m, params)
        scale = 1.0 / (tau * math.sqrt(min(2**level, cfg.m)))
        if level == l0:
            U = _statistics_block(dataset, table, level, father=True)
            out.append(clip(U, tau).mean(axis=0) * scale)
        U = _statistics_block(dataset, table, level, father=False)
        out.append(clip(U, tau).mean(axis=0) * scale)
    return np.concatenate(out)


def aggregation_weights(level: int, servers, alpha: float) -> np.ndarray:
    """Inverse-variance server weights at one resolution level."""
    if level < 0:
        raise ValueError("level must be >= 0")
    u = []
    for s in servers:
        terms = [s.n * s.m, s.m * 2.0 ** (level * (2.0 * alpha + 1.0))]
        if math.isfinite(s.epsilon):
            ne2 = s.n**2 * s.epsilon**2
            terms.append(2.0 ** (-level) * s.m * ne2)
            terms.append(2.0 ** (2.0 * level * alpha) * ne2)
        u.append(min(terms))
    u = np.asarray(u, dtype=float)
    total = u.sum()
    if total <= 0:
        raise ValueError("degenerate config: all aggregation weights vanish")
    return u / total


def aggregate(transcripts: list[CoeffTranscript], servers,
              alpha: float) -> WaveletCoeffs:
    """Level-wise convex combination of the transcripts."""
    first = transcripts[0]
    for t in transcripts[1:]:
        if (t.l0, t.L) != (first.l0, first.L):
            raise ValueError("transcripts cover different level ranges")
    l0, L = first.l0, first.L
    w0 = aggregation_weights(l0, servers, alpha)
    father = sum(w * t.father for w, t in zip(w0, transcripts))
    mothers = []
    for level in range(l0, L + 1):
        w = aggregation_weights(level, servers, alpha)
        mothers.append(sum(wi * t.level(level) for wi, t in zip(w, transcripts)))
    return WaveletCoeffs(l0, father, mothers)


def predicted_risk(L: int, servers, alpha: float, l0: int,
                   params: ClipThresholdParams, c_a: int) -> float:
    """A-priori risk proxy for truncating at L: noise + sampling + tail bias.

    Uses only public parameters: the planned noise scales, the standard
    variance bound 1/(mn) + R^2 2^{-l(2a+1)}/n per coefficient, and the
    Hölder-ball tail sum_{l>L} R^2 2^{-2al}.
    """
    two_a = 2.0 * alpha
    total = params.R**2 * 2.0 ** (-two_a * L) * 2.0**-two_a / (1.0 - 2.0**-two_a)
    for level in range(l0, L + 1):
        w = aggregation_weights(level, servers, alpha)
        var = 0.0
        for wi, s in zip(w, servers):
            tau = tau_independent(level, s.m, params)
            sig = sigma_independent(L, level, s.m, tau, s.n,
                                    s.epsilon, s.delta, c_a)
            samp = 1.0 / (s.m * s.n) \
                + params.R**2 * 2.0 ** (-level * (two_a + 1.0)) / s.n
            var += wi * wi * (sig * sig + samp)
        count = 2**level + (2**l0 if level == l0 else 0)
        total += count * var
    return total


def choose_resolution(servers, alpha: float, l0: int, max_level: int = 10,
                      params: ClipThresholdParams | None = None,
                      c_a: int | None = None) -> tuple[int, RateSolution]:
    """Truncation level round(log2 D*), floored at l0 and capped.

    With finite privacy budgets the theoretical level can leave the
    mechanism noise (which grows like L 4^L) far above the bias it buys,
    so when ``params`` is supplied the level is chosen to minimize the
    a-priori risk proxy over [l0, round(log2 D*)].  With all budgets
    infinite this reduces to the plain rule.
    """
    sol = solve_independent(servers, alpha)
    cap = min(max(round(math.log2(sol.d_star)), l0), max_level)
    if params is None or all(not math.isfinite(s.epsilon) for s in servers):
        return cap, sol
    if c_a is None:
        raise ValueError("noise-aware level choice needs the overlap constant")
    best_L, best_risk = cap, math.inf
    for L in range(l0, cap + 1):
        risk = predicted_risk(L, servers, alpha, l0, params, c_a)
        if risk <= best_risk:
            best_L, best_risk = L, risk
    return best_L, sol


class IndependentEstimate:
    """Aggregated estimator; callable on points in [0, 1]."""

    def __init__(self, coeffs: WaveletCoeffs, table: WaveletTable,
                 d_star: float, transcripts: list[CoeffTranscript]):
        self.coeffs = coeffs
        self.table = table
        self.d_star = d_star
        self.transcripts = transcripts

    @property
    def L(self) -> int:
        return self.coeffs.max_level

    def __call__(self, x):
        return reconstruct(self.table, self.coeffs, x)


def estimate(datasets: list[ServerDataset], fed: FederationConfig,
             table: WaveletTable, seed: int, rep: int = 0,
             L: int | None = None,
             params: ClipThresholdParams | None = None) -> IndependentEstimate:
    """Full pipeline: resolution choice, transcripts, weighted aggregation."""
    designs = {ds.design for ds in datasets}
    if len(designs) > 1:
        raise ValueError("datasets mix common and independent designs")
    l0 = default_coarsest_level(table.family)
    if params is None:
        params = default_clip_params(fed, table)
    if L is None:
        L, sol = choose_resolution(fed.servers, fed.alpha, l0, params=params,
                                   c_a=overlap_constant(table.family))
    else:
        sol = solve_independent(fed.servers, fed.alpha)
    transcripts = [
        server_transcript(ds, fed, table, L,
                          rngmod.make_rng(seed, rngmod.MECHANISM, rep, s),
                          params=params, l0=l0, server_id=s)
        for s, ds in enumerate(datasets)
    ]
    coeffs = aggregate(transcripts, fed.servers, fed.alpha)
    return IndependentEstimate(coeffs, table, sol.d_star, transcripts)


# ---------------------------------------------------------------------------
# transcript serialization: (server, l, k, value, tau, sigma); father rows
# carry l = -1 and the coarsest level's threshold and noise scale.


def transcripts_to_csv(transcripts: list[CoeffTranscript], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["server", "l", "k", "value", "tau", "sigma"])
        for t in transcripts:
            for k, v in enumerate(t.father):
                writer.writerow([t.server_id, -1, k, format(v, ".17g"),
                                 format(t.taus[0], ".17g"),
                                 format(t.sigmas[0], ".17g")])
            for level in range(t.l0, t.L + 1):
                j = level - t.l0
                for k, v in enumerate(t.level(level)):
                    writer.writerow([t.server_id, level, k, format(v, ".17g"),
                                     format(t.taus[j], ".17g"),
                                     format(t.sigmas[j], ".17g")])


def transcripts_from_csv(path, l0: int) -> list[CoeffTranscript]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["server", "l", "k", "value", "tau", "sigma"]:
            raise ValueError(f"bad transcript header {header!r}")
        for r in reader:
            rows.append((int(r[0]), int(r[1]), int(r[2]),
                         float(r[3]), float(r[4]), float(r[5])))
    out = []
    for sid in sorted({r[0] for r in rows}):
        mine = [r for r in rows if r[0] == sid]
        L = max(r[1] for r in mine)
        father = np.zeros(2**l0)
        levels = [np.zeros(2**l) for l in range(l0, L + 1)]
        taus = [0.0] * (L - l0 + 1)
        sigmas = [0.0] * (L - l0 + 1)
        for _, l, k, v, tau, sigma in mine:
            if l == -1:
                father[k] = v
            else:
                levels[l - l0][k] = v
                taus[l - l0] = tau
                sigmas[l - l0] = sigma
        out.append(CoeffTranscript(server_id=sid, l0=l0, L=L, father=father,
                                   levels=levels, taus=taus, sigmas=sigmas))
    return out
