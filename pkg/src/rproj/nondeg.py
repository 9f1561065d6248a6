"""
Transversality polynomials for the subspace families u^t.r^(1) and u^t.r^(0).

Everything is evaluated in the weight-orthonormal coordinates of r, where
Ad(u)^t is the matrix of Ad(u^t).  Sums of squared k x k minors are computed
as elementary symmetric functions of squared singular values; the explicit
minor enumeration is kept as a cross-check.
"""

from dataclasses import dataclass, field
from itertools import combinations
import math

import numpy as np
from scipy.optimize import minimize

from . import lie_core as lc
from . import weight_rep as wr
from .errors import DegeneratePairError, UnsupportedError

TAU_RANK = 1e-8


@dataclass(frozen=True)
class UPair:
    r1: float
    s1: float
    r2: float
    s2: float

    def astuple(self):
        return (self.r1, self.s1, self.r2, self.s2)


def _pair_arrays(pair):
    if isinstance(pair, UPair):
        pair = pair.astuple()
    r1, s1, r2, s2 = (np.asarray(v, dtype=float) for v in pair)
    return np.broadcast_arrays(r1, s1, r2, s2)


def _rows(lam):
    return np.nonzero(wr.WEIGHTS >= lam)[0]


def t_matrix(form, pair, lam=1, include_identity=False):
    """Stacked blocks pi^(lam) Ad(u_i); rows span sum_i u_i^t.r^(lam).

    Works on scalar or array pairs (trailing two axes are the matrix).
    """
    if lam not in (0, 1):
        raise ValueError("lam must be 0 or 1")
    r1, s1, r2, s2 = _pair_arrays(pair)
    rows = _rows(lam)
    blocks = []
    if include_identity:
        blocks.append(np.broadcast_to(np.eye(9)[rows], r1.shape + (len(rows), 9)))
    blocks.append(wr.ad_u_batch(form, r1, s1)[..., rows, :])
    blocks.append(wr.ad_u_batch(form, r2, s2)[..., rows, :])
    return np.concatenate(blocks, axis=-2)


def esym_sq_singular(m, k):
    """Sum of squares of all k x k minors = e_k of the squared singular values."""
    sv = np.linalg.svd(m, compute_uv=False)
    x = sv ** 2
    # e_k via the standard recurrence over the last axis
    e = np.zeros(x.shape[:-1] + (k + 1,))
    e[..., 0] = 1.0
    for j in range(x.shape[-1]):
        e[..., 1:] = e[..., 1:] + x[..., j:j + 1] * e[..., :-1]
    return e[..., k]


def minor_sum_sq(m, k):
    """Explicit enumeration of k x k minors (oracle; small matrices only)."""
    m = np.asarray(m, dtype=float)
    total = 0.0
    for ri in combinations(range(m.shape[0]), k):
        sub = m[list(ri)]
        for ci in combinations(range(m.shape[1]), k):
            total += np.linalg.det(sub[:, list(ci)]) ** 2
    return total


def p1(form, pair):
    """Vanishes exactly when dim u1^t.r^(1) + u2^t.r^(1) < 6."""
    return esym_sq_singular(t_matrix(form, pair, 1, False), 6)


def p2(form, pair):
    """Vanishes exactly when dim u1^t.r^(0) + u2^t.r^(0) < 9."""
    return esym_sq_singular(t_matrix(form, pair, 0, False), 9)


def r1(form, pair):
    """Vanishes exactly when dim r^(1) + u1^t.r^(1) + u2^t.r^(1) < 8."""
    return esym_sq_singular(t_matrix(form, pair, 1, True), 8)


def complement_matrix(form, pair):
    """Columns: bases of u_i^{-1}.r_{<=-1} for u_0 = id, u_1, u_2 (a 9 x 9 matrix).

    Its column space is the orthogonal complement of
    r^(0) cap u1^t.r^(0) cap u2^t.r^(0).
    """
    r1_, s1, r2_, s2 = _pair_arrays(pair)
    low = np.nonzero(wr.WEIGHTS <= -1)[0]
    blocks = [np.broadcast_to(np.eye(9)[:, low], r1_.shape + (9, len(low)))]
    blocks.append(wr.ad_u_batch(form, -r1_, -s1)[..., :, low])
    blocks.append(wr.ad_u_batch(form, -r2_, -s2)[..., :, low])
    return np.concatenate(blocks, axis=-1)


def r2(form, pair):
    """Vanishes exactly when dim r^(0) cap u1^t.r^(0) cap u2^t.r^(0) != 1."""
    return esym_sq_singular(complement_matrix(form, pair), 8)


# -- kernel vectors ---------------------------------------------------------

def adjugate(m):
    """Classical adjugate via the SVD, valid for singular matrices.

    adj(M) = det(U) det(V) V diag(prod_{k != i} s_k) U^t.
    """
    u, s, vt = np.linalg.svd(m)
    n = len(s)
    prods = np.array([np.prod(np.delete(s, i)) for i in range(n)])
    sign = np.linalg.det(u) * np.linalg.det(vt)
    return sign * (vt.T * prods) @ u.T


def _kernel_by_cofactor(m):
    c = adjugate(m)
    i, j = np.unravel_index(np.argmax(np.abs(c)), c.shape)
    return c[:, j]


def _check(value, what):
    if value <= TAU_RANK:
        raise DegeneratePairError(f"{what} = {value:.3g} below rank threshold {TAU_RANK}")


def v1(form, pair):
    """Normal vector to r^(1) + u1^t.r^(1) + u2^t.r^(1) (cofactor column of T)."""
    _check(float(r1(form, pair)), "R1")
    t = t_matrix(form, pair, 1, True)
    return _kernel_by_cofactor(t)


def s_matrix(form, pair):
    """(v1, v2) in r^(1) x r^(1) -> pi_{<=0}(u1^t v1 + u2^t v2), a 6 x 6 matrix."""
    r1_, s1, r2_, s2 = _pair_arrays(pair)
    top = _rows(1)
    low = np.nonzero(wr.WEIGHTS <= 0)[0]
    a1 = wr.ad_u_batch(form, r1_, s1)[..., top, :]
    a2 = wr.ad_u_batch(form, r2_, s2)[..., top, :]
    return np.concatenate([a1, a2], axis=-2)[..., low].swapaxes(-1, -2), a1, a2


def v2(form, pair):
    """Spanning vector of r^(1) cap (u1^t.r^(1) + u2^t.r^(1))."""
    _check(float(p1(form, pair) * r1(form, pair)), "P1*R1")
    s, a1, a2 = s_matrix(form, pair)
    ker = _kernel_by_cofactor(s)
    return ker[:3] @ a1 + ker[3:] @ a2


def w1(form, pair):
    """Spanning vector of r^(0) cap u1^t.r^(0) cap u2^t.r^(0)."""
    _check(float(r2(form, pair)), "R2")
    m = complement_matrix(form, pair)
    return _kernel_by_cofactor(m.T)


def w2(form, pair):
    """Normal vector to r^(0) + (u1^t.r^(0) cap u2^t.r^(0))."""
    _check(float(p2(form, pair) * r2(form, pair)), "P2*R2")
    r1_, s1, r2_, s2 = _pair_arrays(pair)
    low = np.nonzero(wr.WEIGHTS <= -1)[0]
    high = np.nonzero(wr.WEIGHTS >= 0)[0]
    b1 = wr.ad_u_batch(form, -r1_, -s1)[:, low]
    b2 = wr.ad_u_batch(form, -r2_, -s2)[:, low]
    s = np.concatenate([b1, b2], axis=1)[high]
    ker = _kernel_by_cofactor(s)
    return b1 @ ker[:3] + b2 @ ker[3:]


def s1_component(form, pair):
    return float(v1(form, pair)[0])


def s2_component(form, pair):
    return float(v2(form, pair)[8])


def l1_component(form, pair):
    return float(w1(form, pair)[8])


def l2_component(form, pair):
    return float(w2(form, pair)[0])


# -- batched scans ------------------------------------------------------------

def _batched_kernel_component(mats):
    """Cofactor-column kernel vectors for a stack of square matrices."""
    u, s, vt = np.linalg.svd(mats)
    n = s.shape[-1]
    prods = np.stack([np.prod(np.delete(s, i, axis=-1), axis=-1) for i in range(n)], axis=-1)
    sign = np.linalg.det(u) * np.linalg.det(vt)
    adj = sign[:, None, None] * np.einsum("bij,bi,bki->bjk", vt, prods, u)
    flat = np.abs(adj).reshape(len(adj), -1).argmax(axis=1)
    col = flat % n
    return adj[np.arange(len(adj)), :, col]


def scan_values(form, pairs):
    """P1, P2, R1, R2, |S1|, |S2|, |L1|, |L2| at an (n, 4) array of pairs."""
    pairs = np.asarray(pairs, dtype=float)
    p = (pairs[:, 0], pairs[:, 1], pairs[:, 2], pairs[:, 3])
    out = {
        "P1": p1(form, p), "P2": p2(form, p), "R1": r1(form, p), "R2": r2(form, p),
    }
    v1s = _batched_kernel_component(t_matrix(form, p, 1, True))
    out["S1"] = np.abs(v1s[:, 0])
    s, a1, a2 = s_matrix(form, p)
    k = _batched_kernel_component(s)
    v2s = np.einsum("bi,bij->bj", k[:, :3], a1) + np.einsum("bi,bij->bj", k[:, 3:], a2)
    out["S2"] = np.abs(v2s[:, 8])
    w1s = _batched_kernel_component(complement_matrix(form, p).swapaxes(-1, -2))
    out["L1"] = np.abs(w1s[:, 8])
    low = np.nonzero(wr.WEIGHTS <= -1)[0]
    high = np.nonzero(wr.WEIGHTS >= 0)[0]
    b1 = wr.ad_u_batch(form, -p[0], -p[1])[:, :, low]
    b2 = wr.ad_u_batch(form, -p[2], -p[3])[:, :, low]
    sm = np.concatenate([b1, b2], axis=2)[:, high, :]
    k2 = _batched_kernel_component(sm)
    w2s = np.einsum("bji,bi->bj", b1, k2[:, :3]) + np.einsum("bji,bi->bj", b2, k2[:, 3:])
    out["L2"] = np.abs(w2s[:, 0])
    return out


def grid_pairs(step=1.0 / 16, lo=-1.0, hi=1.0):
    n = int(round((hi - lo) / step)) + 1
    ax = np.linspace(lo, hi, n)
    g = np.stack(np.meshgrid(ax, ax, ax, ax, indexing="ij"), axis=-1)
    return g.reshape(-1, 4)


@dataclass
class NondegScan:
    form: str
    step: float
    n_points: int
    sup: dict
    inf: dict
    sublevel: dict = field(default_factory=dict)


def nondeg_scan(form, step=1.0 / 16, chunk=20000, eps_list=(1e-1, 1e-2, 1e-3, 1e-4)):
    """Grid sup/inf of the eight non-degeneracy quantities over [-1, 1]^4.

    sublevel[name][eps] is the grid fraction with value < eps * sup.
    """
    form = lc.get_form(form) if isinstance(form, str) else form
    pairs = grid_pairs(step)
    keys = ["P1", "P2", "R1", "R2", "S1", "S2", "L1", "L2"]
    sup = {k: 0.0 for k in keys}
    inf = {k: math.inf for k in keys}
    vals = {k: [] for k in keys}
    for s in range(0, len(pairs), chunk):
        v = scan_values(form, pairs[s:s + chunk])
        for k in keys:
            sup[k] = max(sup[k], float(v[k].max()))
            inf[k] = min(inf[k], float(v[k].min()))
            vals[k].append(v[k])
    sub = {}
    for k in keys:
        allv = np.concatenate(vals[k])
        sub[k] = {repr(e): float(np.mean(allv < e * sup[k])) for e in eps_list}
    return NondegScan(form.tag, step, len(pairs), sup, inf, sub)


def angle_ratio(form, pair):
    """(P1, d_angle(u1^t.r^(1), u2^t.r^(1))^2)."""
    t = t_matrix(form, pair, 1, False)
    a = wr.orthonormal_rows(t[:3])
    b = wr.orthonormal_rows(t[3:])
    # product of the principal-angle sines, from the singular values of the
    # off-span residual (the Gram determinant loses everything below ~1e-16)
    off = b - (b @ a.T) @ a
    d = float(np.prod(np.linalg.svd(off, compute_uv=False)))
    return float(p1(form, pair)), d * d


# -- moment curves ------------------------------------------------------------

def _poly(terms):
    """Coefficient array c[i, j] of x^i y^j from {(i, j): coeff}."""
    c = np.zeros((9, 3))
    for (i, j), v in terms.items():
        c[i, j] += v
    return c


_GAMMA22 = [
    _poly({(0, 0): 1}),
    _poly({(1, 0): 1}),
    _poly({(2, 0): 0.5}),
    _poly({(3, 0): 1, (0, 1): 1}),
    _poly({(4, 0): 1, (1, 1): 1}),
    _poly({(5, 0): 0.5, (2, 1): 0.5}),
    _poly({(6, 0): 0.5, (3, 1): 1, (0, 2): 0.5}),
    _poly({(7, 0): 0.5, (4, 1): 1, (1, 2): 0.5}),
    _poly({(8, 0): 0.5, (5, 1): 1, (2, 2): 0.5}),
]


def _gamma31_pre(r, s):
    q = r * r + s * s
    return np.array([np.ones_like(r), -2 * r, -2 * s, r * r + 3 * s * s, s * s - r * r,
                     -2 * r * s, r * q, s * q, (q / 2) ** 2])


def pre_vector(form, r, s):
    """Vector whose inner product with w gives the top-weight projection of Ad(u_{r,s}) w,
    in the coordinates used to display the curves."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if form.tag == lc.SIG22:
        return np.array([np.ones_like(r), r, r * r / 2, s, s * r, s * r * r / 2, s * s / 2,
                         s * s * r / 2, s * s * r * r / 4])
    return _gamma31_pre(r, s)


def _gamma31_coeffs():
    # substitute r = x, s = y + x^3 by products of coefficient arrays
    def mul(a, b):
        out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                if a[i, j]:
                    out[i:i + b.shape[0], j:j + b.shape[1]] += a[i, j] * b
        return out

    one = np.array([[1.0]])
    r = np.array([[0.0], [1.0]])
    s = np.zeros((4, 2))
    s[3, 0] = 1.0
    s[0, 1] = 1.0

    def add(*ts):
        sh = (max(t.shape[0] for t in ts), max(t.shape[1] for t in ts))
        out = np.zeros(sh)
        for t in ts:
            out[:t.shape[0], :t.shape[1]] += t
        return out

    rr, ss = mul(r, r), mul(s, s)
    q = add(rr, ss)
    comps = [one, -2 * r, -2 * s, add(rr, 3 * ss), add(ss, -rr), -2 * mul(r, s),
             mul(r, q), mul(s, q), mul(q, q) / 4]
    return comps


_GAMMA31 = None


def gamma_coeffs(form):
    """List of 9 coefficient arrays c[i, j] (x^i y^j) for the reparametrised curve."""
    global _GAMMA31
    if form.tag == lc.SIG22:
        return _GAMMA22
    if _GAMMA31 is None:
        _GAMMA31 = _gamma31_coeffs()
    return _GAMMA31


def _eval(c, x, y, dx=0):
    i = np.arange(c.shape[0])
    j = np.arange(c.shape[1])
    fall = np.ones(c.shape[0])
    for k in range(dx):
        fall = fall * np.clip(i - k, 0, None)
    xp = np.where(i - dx >= 0, np.power.outer(np.asarray(x, float), np.clip(i - dx, 0, None)), 0.0)
    yp = np.power.outer(np.asarray(y, float), j)
    return np.einsum("...i,ij,...j->...", xp * fall, c, yp)


def gamma_curve(form, x, y, order=0):
    """gamma_y(x) (order = 0) or its order-th x-derivative; a 9-vector."""
    form = lc.get_form(form) if isinstance(form, str) else form
    if abs(x) > 2 or abs(y) > 2:
        raise ValueError("need |x|, |y| <= 2")
    return np.array([_eval(c, x, y, order) for c in gamma_coeffs(form)])


def gamma_pre(form, r, s):
    form = lc.get_form(form) if isinstance(form, str) else form
    return pre_vector(form, r, s)


def jet_matrix(form, x, y):
    return np.array([gamma_curve(form, x, y, k) for k in range(9)])


def wronskian(form, x, y):
    return float(abs(np.linalg.det(jet_matrix(form, x, y))))


def wronskian_grid(form, n=33, lo=-1.0, hi=1.0):
    ax = np.linspace(lo, hi, n)
    return np.array([[wronskian(form, x, y) for y in ax] for x in ax])


# -- Remez-type sublevel scans ------------------------------------------------

def remez_scan(f, box, eps_list, n=None, samples=None, seed=0):
    """Fraction of the box where |f| < eps, per eps, plus the fitted power-law exponent.

    f takes an (m, d) array and returns m values.  Uses a midpoint grid with n
    points per axis, or `samples` seeded uniform points.
    """
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    d = len(lo)
    if samples is not None:
        pts = lo + (hi - lo) * np.random.default_rng(seed).random((samples, d))
    else:
        n = n or 1000
        axes = [lo[k] + (hi[k] - lo[k]) * (np.arange(n) + 0.5) / n for k in range(d)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    vals = np.abs(np.asarray(f(pts), dtype=float))
    eps = np.asarray(sorted(eps_list, reverse=True), dtype=float)
    frac = np.array([np.mean(vals < e) for e in eps])
    ok = frac > 0
    slope = float("nan")
    if ok.sum() >= 2:
        slope = float(np.polyfit(np.log(eps[ok]), np.log(frac[ok]), 1)[0])
    return {"eps": eps.tolist(), "fraction": frac.tolist(), "exponent": slope,
            "sup": float(vals.max())}


# -- obstructions -------------------------------------------------------------

def _sig22_block(b=None, c=None):
    z = np.zeros((2, 2))
    b = z if b is None else b
    c = z if c is None else c
    return np.block([[z, b], [c, z]])


def obstruction_witness(form):
    """(W_inv, W_meet) as orthonormal rows in weight coordinates (Sig22 only).

    W_inv: the B-block, U-invariant with 2-dim top-flag image.
    W_meet: B- and C-blocks, meeting every u^t.r^(1).
    """
    form = lc.get_form(form) if isinstance(form, str) else form
    if form.tag != lc.SIG22:
        raise UnsupportedError("explicit obstruction subspaces are only known for Sig22")
    wb = wr.build_weight_basis(form)
    units = [np.array([[0.0, 1.0], [0.0, 0.0]]), np.diag([1.0, -1.0]), np.array([[0.0, 0.0], [1.0, 0.0]])]
    inv = [wb.coords(_sig22_block(b=m)) for m in units]
    meet = inv + [wb.coords(_sig22_block(c=m)) for m in units]
    return wr.orthonormal_rows(np.array(inv)), wr.orthonormal_rows(np.array(meet))


def witness_vector(form, r, s):
    """The explicit element [[0, X], [s^2 X, 0]], X = u_r^t B^+ u_{-r}^t."""
    form = lc.get_form(form) if isinstance(form, str) else form
    if form.tag != lc.SIG22:
        raise UnsupportedError("witness only for Sig22")
    ur = np.array([[1.0, r], [0.0, 1.0]])
    umr = np.array([[1.0, -r], [0.0, 1.0]])
    x = ur.T @ np.array([[0.0, 1.0], [0.0, 0.0]]) @ umr.T
    return wr.build_weight_basis(form).coords(_sig22_block(b=x, c=s * s * x))


def _subspace_residual(v, rows):
    q = wr.orthonormal_rows(rows)
    return float(np.linalg.norm(v - (v @ q.T) @ q) / max(np.linalg.norm(v), 1e-300))


def obstruction_checks(form, n=100, seed=0):
    """Max invariance residual, rank of pi^(1)(W_inv), max sin of the smallest
    principal angle between u^t.r^(1) and W_meet, and the witness residuals."""
    form = lc.get_form(form) if isinstance(form, str) else form
    w_inv, w_meet = obstruction_witness(form)
    rng = np.random.default_rng(seed)
    rs = rng.uniform(-1, 1, size=(n, 2))
    inv_res, angle, wit = 0.0, 0.0, 0.0
    top = _rows(1)
    for r, s in rs:
        ad = wr.ad_u(form, r, s)
        img = w_inv @ ad.T
        resid = img - (img @ w_inv.T) @ w_inv
        inv_res = max(inv_res, float(np.max(np.abs(resid))))
        a = wr.orthonormal_rows(ad[top])           # rows span u^t.r^(1)
        # sin of the smallest principal angle, without cancellation
        off = a - (a @ w_meet.T) @ w_meet
        angle = max(angle, float(np.linalg.svd(off, compute_uv=False).min()))
        v = witness_vector(form, r, s)
        wit = max(wit, _subspace_residual(v, ad[top]), _subspace_residual(v, w_meet))
    sv = np.linalg.svd(w_inv[:, top], compute_uv=False)
    rank = int(np.sum(sv > 1e-8))
    return {"invariance": inv_res, "rank": rank, "angle": angle, "witness": wit}


def obstruction_search(form, restarts=4, grid=9, seed=0, maxiter=300):
    """Numerical search for a 6-dim W meeting every u^t.r^(1), u in a grid.

    Minimises the largest |det[basis(u^t.r^(1)); basis(W)]| over the grid
    (zero iff they intersect).  Returns the best objective and basis found.
    """
    form = lc.get_form(form) if isinstance(form, str) else form
    ax = np.linspace(-1, 1, grid)
    rr, ss = np.meshgrid(ax, ax, indexing="ij")
    ads = wr.ad_u_batch(form, rr.ravel(), ss.ravel())[:, _rows(1), :]
    qa = np.array([wr.orthonormal_rows(a) for a in ads])

    def objective(x):
        w, _ = np.linalg.qr(x.reshape(9, 6))
        d = np.linalg.det(np.concatenate([qa, np.broadcast_to(w.T, (len(qa), 6, 9))], axis=1))
        # smooth max of squared determinants
        t = d * d
        m = t.max()
        return float(m + np.log(np.mean(np.exp((t - m) * 50.0))) / 50.0)

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        res = minimize(objective, rng.standard_normal(54), method="L-BFGS-B",
                       options={"maxiter": maxiter})
        if best is None or res.fun < best.fun:
            best = res
    w, _ = np.linalg.qr(best.x.reshape(9, 6))
    d = np.linalg.det(np.concatenate([qa, np.broadcast_to(w.T, (len(qa), 6, 9))], axis=1))
    return {"max_abs_det": float(np.max(np.abs(d))), "basis": w.T}


# -- further checks -----------------------------------------------------------

def shah_ratio(form, v, w, grid=64):
    """sup_u |<v, Ad(u) w>| over a grid of B_1^U, divided by |pi_{r_2}(v)|^9."""
    ax = np.linspace(-1, 1, grid)
    rr, ss = np.meshgrid(ax, ax, indexing="ij")
    ads = wr.ad_u_batch(form, rr.ravel(), ss.ravel())
    vals = np.abs(np.einsum("i,bij,j->b", v, ads, w))
    top = abs(v[8]) ** 9
    return float(vals.max() / top) if top > 0 else math.inf


def projection_equivalence_cond(form, lam, grid=17):
    """Largest condition number of pi^(lam) (u u^t) restricted to r^(lam) over a u-grid."""
    ax = np.linspace(-1, 1, grid)
    rr, ss = np.meshgrid(ax, ax, indexing="ij")
    ads = wr.ad_u_batch(form, rr.ravel(), ss.ravel())
    rows = _rows(lam)
    blocks = ads[:, rows, :]
    g = blocks @ blocks.swapaxes(-1, -2)
    return float(np.max(np.linalg.cond(g)))
