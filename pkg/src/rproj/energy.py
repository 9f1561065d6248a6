"""
Frostman constants, the clipped alpha-energy of a finite set, and the
Frostman-to-energy conversion bound.

Distances are sup-norm distances between coordinate vectors.
"""

from dataclasses import asdict, dataclass
import json
import math

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DomainError, PreconditionError
from .partition_cover import PointSet


def _pts(f):
    return f.points if isinstance(f, PointSet) else np.atleast_2d(np.asarray(f, dtype=float))


def dyadic_radii(delta_min):
    k = int(math.floor(-math.log2(delta_min) + 1e-12))
    return [2.0 ** (-j) for j in range(k + 1)]


def _block_rows(n_cols, budget=4_000_000):
    return max(1, budget // max(1, n_cols))


def _mass_table(pts, weights, centers, kmax):
    """mu of open sup-norm balls of radius 2^-j, j = 0..kmax, per centre.

    d < 2^-j  iff  the binary exponent e of d (d = m 2^e, m in [1/2, 1))
    satisfies e <= -j, so the bucketing is exact.
    """
    w = np.full(len(pts), 1.0 / len(pts)) if weights is None else weights
    out = np.empty((len(centers), kmax + 1))
    block = _block_rows(len(pts))
    for s in range(0, len(centers), block):
        d = cdist(centers[s:s + block], pts, metric="chebyshev")
        _, e = np.frexp(d)
        lev = np.clip(-e, 0, kmax)
        lev[d == 0] = kmax
        rows = np.repeat(np.arange(len(d)), d.shape[1])
        hist = np.bincount(rows * (kmax + 1) + lev.ravel(), weights=np.tile(w, len(d)),
                           minlength=len(d) * (kmax + 1)).reshape(len(d), kmax + 1)
        out[s:s + block] = np.cumsum(hist[:, ::-1], axis=1)[:, ::-1]
    return out


def _centers(f, max_centers, seed):
    if max_centers is not None and len(f) > max_centers:
        idx = np.sort(np.random.default_rng(seed).choice(len(f), max_centers, replace=False))
        return f.points[idx]
    return f.points


def ball_masses(f, r, centers=None):
    """mu_F of the open sup-norm ball of dyadic radius r around each centre."""
    f = f if isinstance(f, PointSet) else PointSet(f)
    j = -math.log2(r)
    if j != int(j) or j < 0:
        raise DomainError("radius must be 2^-j with j >= 0")
    ctr = f.points if centers is None else np.atleast_2d(centers)
    return _mass_table(f.points, f.weights, ctr, int(j))[:, int(j)]


def frostman_profile(f, delta_min, max_centers=None, seed=0):
    """(radii, max ball mass per dyadic radius) so constants for many alphas are cheap."""
    f = f if isinstance(f, PointSet) else PointSet(f)
    radii = dyadic_radii(delta_min)
    tab = _mass_table(f.points, f.weights, _centers(f, max_centers, seed), len(radii) - 1)
    return np.array(radii), tab.max(axis=0)


def frostman_constant(f, alpha, delta_min, max_centers=None, seed=0):
    """max over centres w in F and dyadic r in [delta_min, 1] of mu_F(B_r(w)) / r^alpha.

    Balls are open.  With max_centers set, a seeded subsample of centres is
    used (the result is then a lower bound for the full maximum).
    """
    if not 0 < alpha <= 9:
        raise DomainError("alpha must lie in (0, 9]")
    if not 0 < delta_min < 1:
        raise DomainError("delta_min must lie in (0, 1)")
    radii, masses = frostman_profile(f, delta_min, max_centers, seed)
    return float(np.max(masses / radii ** alpha))


def frostman_exponent(f, delta_min, c_max=8.0, max_centers=None, seed=0):
    """Largest alpha (to 1e-6) with frostman_constant(F, alpha, delta_min) <= c_max."""
    radii, masses = frostman_profile(f, delta_min, max_centers, seed)
    lr, lm = np.log2(radii), np.log2(masses)

    def const(a):
        return float(np.max(lm - a * lr))

    lo, hi = 0.0, 9.0
    if const(hi) <= math.log2(c_max):
        return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if const(mid) <= math.log2(c_max):
            lo = mid
        else:
            hi = mid
    return lo


# -- energy -----------------------------------------------------------------

def _energy_rows(pts, rows, delta, alpha):
    out = np.empty(len(rows))
    block = _block_rows(len(pts))
    for s in range(0, len(rows), block):
        r = rows[s:s + block]
        d = np.maximum(cdist(pts[r], pts, metric="chebyshev"), delta)
        d = 1.0 / d if alpha == 1 else d ** (-alpha)
        d[np.arange(len(r)), r] = 0.0
        out[s:s + block] = d.sum(axis=1)
    return out


def energy_all(f, delta, alpha, rows=None):
    """G_{F,delta}(w) for every w in F (or for the listed row indices)."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    pts = _pts(f)
    rows = np.arange(len(pts)) if rows is None else np.asarray(rows)
    return _energy_rows(pts, rows, float(delta), float(alpha))


def alpha_energy(f, delta, alpha, w):
    """sum over w' in F, w' != w, of max(|w' - w|, delta)^(-alpha)."""
    pts = _pts(f)
    w = np.asarray(w, dtype=float)
    hit = np.nonzero(np.all(pts == w, axis=1))[0]
    if len(hit) == 0:
        raise PreconditionError("w is not a point of F")
    return float(energy_all(pts, delta, alpha, rows=hit[:1])[0])


def energy_brute(f, delta, alpha, i):
    """Definition-level double loop for one point (small sets only)."""
    pts = _pts(f)
    total = 0.0
    for j in range(len(pts)):
        if j == i:
            continue
        d = max(abs(a - b) for a, b in zip(pts[i], pts[j]))
        total += max(d, delta) ** (-alpha)
    return total


def frostman_to_energy_bound(c, alpha, beta, n_points):
    """2^9 C (1 + 1/(1 - 2^(beta - alpha))) #F."""
    if not 0 < beta < alpha:
        raise DomainError("need 0 < beta < alpha")
    return 2.0 ** 9 * c * (1.0 + 1.0 / (1.0 - 2.0 ** (beta - alpha))) * n_points


@dataclass
class EnergyReport:
    alpha: float
    delta: float
    per_point: list
    max: float
    mean: float

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def energy_report(f, delta, alpha):
    g = energy_all(f, delta, alpha)
    return EnergyReport(float(alpha), float(delta), [float(v) for v in g],
                        float(g.max()), float(g.mean()))
