"""Compactly supported orthonormal wavelet bases on [0, 1].

Daubechies extremal-phase filters are computed by spectral factorization,
the scaling function and wavelet are tabulated on a dyadic grid with the
cascade refinement (exact at dyadic rationals), and basis functions on
[0, 1] are obtained by periodization,

    psi_{lk}(x) = 2^{l/2} sum_n psi(2^l x - k + n 2^l),

which keeps the family exactly orthonormal on the unit interval at every
level.  Projection and reconstruction work against a table; evaluation in
between grid nodes is linear interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# filters


@lru_cache(maxsize=None)
def daubechies_filter(vanishing_moments: int) -> tuple[float, ...]:
    """Scaling filter of the Daubechies extremal-phase wavelet.

    Returns the ``2A`` low-pass coefficients normalized so that their sum
    is sqrt(2).  Roots of the Bernstein polynomial part are found and
    polished in 60-digit arithmetic so the orthonormality identities hold
    to essentially float64 rounding.
    """
    A = int(vanishing_moments)
    if A < 1:
        raise ValueError(f"vanishing_moments must be >= 1, got {A}")
    if A == 1:
        c = 1.0 / _SQRT2
        return (c, c)

    import mpmath as mp

    with mp.workdps(60):
        # P(y) = sum_k C(A-1+k, k) y^k ; highest power first for polyroots.
        pcoef = [mp.binomial(A - 1 + k, k) for k in range(A)][::-1]
        yroots = mp.polyroots(pcoef, maxsteps=200, extraprec=80)
        # q(z) = (1+z)^A * prod (z - z_i), z_i the root of
        # z^2 - (2 - 4y)z + 1 inside the unit disc (extremal phase).
        q = [mp.mpc(1)]
        for y in yroots:
            b = 2 - 4 * y
            disc = mp.sqrt(b * b - 4)
            z1 = (b + disc) / 2
            z2 = (b - disc) / 2
            z = z1 if abs(z1) < 1 else z2
            q = _polymul(q, [mp.mpc(1), -z])
        for _ in range(A):
            q = _polymul(q, [mp.mpc(1), mp.mpc(1)])
        real = [mp.re(c) for c in q]
        s = sum(real)
        h = tuple(float(c * mp.sqrt(2) / s) for c in real)
    return h


def _polymul(p, q):
    out = [p[0] * 0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


@dataclass(frozen=True)
class WaveletFamily:
    """A compactly supported orthonormal wavelet family.

    ``filter`` holds the 2A scaling coefficients; the mother support is
    [-A+1, A] and the father support [0, 2A-1].
    """

    name: str
    vanishing_moments: int
    filter: tuple[float, ...] = field(repr=False)

    @property
    def support_width(self) -> int:
        return 2 * self.vanishing_moments - 1

    @property
    def mother_support(self) -> tuple[float, float]:
        A = self.vanishing_moments
        return (1.0 - A, float(A))

    @property
    def father_support(self) -> tuple[float, float]:
        return (0.0, float(self.support_width))


_FAMILY_NAMES = {"haar": 1, **{f"db{a}": a for a in range(2, 11)}}


@lru_cache(maxsize=None)
def family(name: str) -> WaveletFamily:
    """Look up a family by name: ``haar`` or ``db2`` ... ``db10``."""
    key = name.strip().lower()
    if key not in _FAMILY_NAMES:
        raise ValueError(
            f"unsupported wavelet family {name!r}; expected 'haar' or 'db2'..'db10'"
        )
    A = _FAMILY_NAMES[key]
    return WaveletFamily(name=key, vanishing_moments=A, filter=daubechies_filter(A))


def overlap_constant(fam: WaveletFamily) -> int:
    """Largest number of same-level translates covering a single point."""
    return fam.support_width


def default_coarsest_level(fam: WaveletFamily) -> int:
    """Smallest level at which a periodized translate does not self-overlap."""
    if fam.vanishing_moments == 1:
        return 0
    return math.ceil(math.log2(fam.support_width))


@dataclass(frozen=True)
class BasisIndex:
    """Index (l, k) of psi_{lk}; 0 <= k < 2^l."""

    level: int
    shift: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"level must be >= 0, got {self.level}")
        if not 0 <= self.shift < 2**self.level:
            raise ValueError(
                f"shift {self.shift} out of range for level {self.level}"
            )


# ---------------------------------------------------------------------------
# tabulation


class WaveletTable:
    """Mother/father values sampled on the dyadic grid of step 2^-J.

    The cascade makes the tabulated values exact at dyadic rationals;
    between nodes, evaluation interpolates linearly.  Instances are
    immutable after construction and safe to share across workers.
    """

    def __init__(self, fam: WaveletFamily, refinement_depth: int,
                 mother_values: np.ndarray, father_values: np.ndarray):
        self.family = fam
        self.refinement_depth = int(refinement_depth)
        self.mother_values = mother_values
        self.father_values = father_values
        self.mother_values.flags.writeable = False
        self.father_values.flags.writeable = False
        self.sup_norm = float(np.max(np.abs(mother_values)))
        self._scale = float(2**refinement_depth)

    def mother_at(self, t):
        """psi(t) on the real line (0 outside [1-A, A])."""
        return _interp(self.mother_values, self.family.mother_support[0],
                       self._scale, t)

    def father_at(self, t):
        """phi(t) on the real line (0 outside [0, 2A-1])."""
        return _interp(self.father_values, 0.0, self._scale, t)


def _interp(values: np.ndarray, t0: float, scale: float, t):
    t = np.asarray(t, dtype=float)
    u = (t - t0) * scale
    inside = (u >= 0.0) & (u <= len(values) - 1)
    uc = np.clip(u, 0.0, len(values) - 1)
    i0 = np.minimum(uc.astype(np.int64), len(values) - 2)
    frac = uc - i0
    out = values[i0] * (1.0 - frac) + values[i0 + 1] * frac
    return np.where(inside, out, 0.0)


def build_table(fam: WaveletFamily, refinement_depth: int) -> WaveletTable:
    """Tabulate psi and phi by cascade refinement down to step 2^-J.

    ``refinement_depth`` must lie in [8, 20].  Deterministic for fixed
    inputs.
    """
    J = int(refinement_depth)
    if not 8 <= J <= 20:
        raise ValueError(f"refinement_depth must be in [8, 20], got {J}")
    if fam.vanishing_moments == 1:
        return _haar_table(fam, J)

    h = np.asarray(fam.filter)
    A = fam.vanishing_moments
    width = fam.support_width

    # phi at the integers: eigenvector of T[i, j] = sqrt(2) h_{2i-j} for
    # eigenvalue 1 over the interior points 1 .. 2A-2.
    interior = np.arange(1, width)
    T = np.zeros((len(interior), len(interior)))
    for a, i in enumerate(interior):
        for b, j in enumerate(interior):
            k = 2 * i - j
            if 0 <= k < len(h):
                T[a, b] = _SQRT2 * h[k]
    eigvals, eigvecs = np.linalg.eig(T)
    pick = int(np.argmin(np.abs(eigvals - 1.0)))
    v = np.real(eigvecs[:, pick])
    v = v / v.sum()

    phi = np.zeros(width + 1)
    phi[1:width] = v
    # refine: values on step 2^-j from step 2^-(j-1) via
    # phi(t) = sqrt(2) sum_k h_k phi(2t - k).
    for j in range(1, J + 1):
        size = width * 2**j + 1
        new = np.zeros(size)
        half = 2 ** (j - 1)
        for k in range(len(h)):
            shift = k * half
            lo = shift          # target index where source index 0 lands
            hi = min(size, len(phi) + shift)
            if lo < hi:
                new[lo:hi] += _SQRT2 * h[k] * phi[: hi - lo]
        phi = new

    # psi(x) = sqrt(2) sum_j (-1)^(j+1) h_j phi(2x + j - 1) on [1-A, A].
    n = width * 2**J + 1
    psi = np.zeros(n)
    for j in range(len(h)):
        # phi argument 2x + j - 1 at x-index i is phi-index 2i + (j+1-2A)*2^J
        off = (j + 1 - 2 * A) * 2**J
        src = np.arange(n) * 2 + off
        ok = (src >= 0) & (src < len(phi))
        psi[ok] += (-1.0) ** (j + 1) * _SQRT2 * h[j] * phi[src[ok]]
    return WaveletTable(fam, J, psi, phi)


def _haar_table(fam: WaveletFamily, J: int) -> WaveletTable:
    n = 2**J
    phi = np.ones(n + 1)
    phi[-1] = 0.0
    psi = np.ones(n + 1)
    psi[n // 2:] = -1.0
    psi[-1] = 0.0
    return WaveletTable(fam, J, psi, phi)


# ---------------------------------------------------------------------------
# periodized evaluation


def _periodized(table: WaveletTable, point_fn, support, level: int, shift: int, x):
    x = np.asarray(x, dtype=float)
    period = 2**level
    t = period * x - shift
    lo, hi = support
    # periods n with t + n*period intersecting the support, from the
    # extreme t values on [0, 1]
    n_lo = math.ceil((lo - (period - shift)) / period)
    n_hi = math.floor((hi + shift) / period)
    acc = np.zeros_like(t)
    for n in range(n_lo, n_hi + 1):
        acc += point_fn(t + n * period)
    return 2.0 ** (level / 2.0) * acc


def evaluate_psi(table: WaveletTable, idx: BasisIndex, x):
    """Periodized mother basis function psi_{lk} at x in [0, 1]."""
    out = _periodized(table, table.mother_at, table.family.mother_support,
                      idx.level, idx.shift, x)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def evaluate_phi(table: WaveletTable, idx: BasisIndex, x):
    """Periodized father basis function phi_{lk} at x in [0, 1]."""
    out = _periodized(table, table.father_at, table.family.father_support,
                      idx.level, idx.shift, x)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# coefficients, projection, reconstruction


class WaveletCoeffs:
    """Coefficients {father at l0} + {mothers at levels l0..L}."""

    def __init__(self, l0: int, father: np.ndarray, mothers: list[np.ndarray]):
        self.l0 = int(l0)
        self.father = np.asarray(father, dtype=float)
        self.mothers = [np.asarray(c, dtype=float) for c in mothers]
        if self.father.shape != (2**self.l0,):
            raise ValueError("father coefficient block has wrong length")
        for j, c in enumerate(self.mothers):
            if c.shape != (2 ** (self.l0 + j),):
                raise ValueError(f"mother block at level {self.l0 + j} has wrong length")

    @property
    def max_level(self) -> int:
        return self.l0 + len(self.mothers) - 1

    @classmethod
    def zeros(cls, l0: int, max_level: int) -> "WaveletCoeffs":
        return cls(l0, np.zeros(2**l0),
                   [np.zeros(2**l) for l in range(l0, max_level + 1)])

    def mother(self, level: int) -> np.ndarray:
        return self.mothers[level - self.l0]

    def norm2(self) -> float:
        """l2 norm of the coefficient vector."""
        s = float(np.dot(self.father, self.father))
        s += sum(float(np.dot(c, c)) for c in self.mothers)
        return math.sqrt(s)

    def copy(self) -> "WaveletCoeffs":
        return WaveletCoeffs(self.l0, self.father.copy(),
                             [c.copy() for c in self.mothers])


def quadrature_grid(depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes and weights on [0, 1] with 2^depth panels."""
    n = 2**depth
    x = np.arange(n + 1) / n
    w = np.full(n + 1, 1.0 / n)
    w[0] = w[-1] = 0.5 / n
    return x, w


def _basis_rows(table, level: int, x, father: bool) -> np.ndarray:
    """psi_{l,0} (or phi_{l,0}) sampled at x."""
    if father:
        return evaluate_phi(table, BasisIndex(level, 0), x)
    return evaluate_psi(table, BasisIndex(level, 0), x)


def project(table: WaveletTable, f, l0: int, L: int) -> WaveletCoeffs:
    """Trapezoid-quadrature projection of a callable onto the basis.

    Quadrature uses 2^max(L+6, 14) panels.  Returns the father block at
    level ``l0`` and the mother blocks for levels l0..L.
    """
    if not l0 <= L <= 12:
        raise ValueError(f"need l0 <= L <= 12, got l0={l0}, L={L}")
    depth = max(L + 6, 14)
    x, w = quadrature_grid(depth)
    n = len(x) - 1
    fv = np.asarray(f(x), dtype=float)
    # fold the duplicated endpoint (periodic basis values) into index 0
    g = fv * w
    g0 = g[:n].copy()
    g0[0] += g[n]
    G = np.fft.rfft(g0)

    def coeffs_at(level: int, father: bool) -> np.ndarray:
        row = _basis_rows(table, level, x[:n], father)
        # c_k = sum_i g_i row[(i - k * step) mod n]; circular correlation
        corr = np.fft.irfft(G * np.conj(np.fft.rfft(row)), n=n)
        step = n >> level
        return corr[::step][: 2**level].copy()

    father = coeffs_at(l0, father=True)
    mothers = [coeffs_at(l, father=False) for l in range(l0, L + 1)]
    return WaveletCoeffs(l0, father, mothers)


def reconstruct(table: WaveletTable, coeffs: WaveletCoeffs, x):
    """Finite expansion sum_{lk} c_lk psi_{lk}(x) + father terms."""
    scalar = np.isscalar(x) or np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    A = table.family.vanishing_moments
    width = table.family.support_width

    l0 = coeffs.l0
    base = np.floor(2**l0 * x).astype(np.int64)
    frac = 2**l0 * x - base
    for o in range(width):
        # phi(2^l0 x - k') nonzero for k' = base - o, argument frac + o
        k = (base - o) % 2**l0
        out += coeffs.father[k] * table.father_at(frac + o)
    out *= 2.0 ** (l0 / 2.0)

    for level in range(l0, coeffs.max_level + 1):
        c = coeffs.mother(level)
        if not np.any(c):
            continue
        base = np.floor(2**level * x).astype(np.int64)
        frac = 2**level * x - base
        acc = np.zeros_like(x)
        for o in range(width):
            # psi(2^l x - k') nonzero for k' = base - A + 1 + o
            k = (base - A + 1 + o) % 2**level
            acc += c[k] * table.mother_at(frac + A - 1 - o)
        out += 2.0 ** (level / 2.0) * acc
    return float(out[0]) if scalar else out
