"""
The 9-dimensional representation r in weight-orthonormal coordinates.

Coordinates are ordered by weight, lowest first:

    index   0     1  2    3  4  5    6  7    8
    weight -2    -1 -1    0  0  0    1  1    2

so the flag space r^(lam) (weights >= lam) is a trailing block of coordinates.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from . import lie_core as lc
from .errors import PreconditionError

WEIGHTS = np.array([-2, -1, -1, 0, 0, 0, 1, 1, 2])
MULTIPLICITY = (1, 2, 3, 2, 1)
FLAG_START = {-2: 0, -1: 1, 0: 3, 1: 6, 2: 8}
FLAG_DIM = {lam: 9 - FLAG_START[lam] for lam in FLAG_START}


def _sig22_coordinates():
    # r = [[A, B], [C, -A]], A, B, C in sl2; order A+, A0, A-, B+, B0, B-, C+, C0, C-
    z = np.zeros((2, 2))
    plus = np.array([[0.0, 1.0], [0.0, 0.0]])
    zero = np.diag([1.0, -1.0])
    minus = np.array([[0.0, 0.0], [1.0, 0.0]])
    out = []
    for slot in range(3):
        for m in (plus, zero, minus):
            a, b, c = [m if k == slot else z for k in range(3)]
            out.append(np.block([[a, b], [c, -a]]))
    return out


def _sig31_coordinates():
    out = []
    for k in range(9):
        a = np.zeros(9)
        a[k] = 1.0
        a1, a2, a3, a4, a5, a6, a7, a8, a9 = a
        out.append(np.array([[a4, a2, a3, a1],
                             [a7, a5, a6, -a2],
                             [a8, a6, -2 * a4 - a5, -a3],
                             [a9, -a7, -a8, a4]]))
    return out


def _weight_of(m):
    w = np.array([1.0, 0.0, 0.0, -1.0])
    lam = None
    for i, j in zip(*np.nonzero(m)):
        v = w[i] - w[j]
        if lam is None:
            lam = v
        elif lam != v:
            raise ValueError("coordinate matrix is not a weight vector")
    return int(lam)


@dataclass(frozen=True, eq=False)
class WeightBasis:
    form: lc.Form
    vectors: np.ndarray     # (9, 4, 4)
    weights: np.ndarray     # (9,)

    def to_matrix(self, c):
        return np.einsum("k,kij->ij", np.asarray(c, dtype=float), self.vectors)

    def coords(self, x):
        return np.einsum("kij,ij->k", self.vectors, np.asarray(x, dtype=float))


@lru_cache(maxsize=None)
def _build(tag):
    form = lc.get_form(tag)
    raw = _sig22_coordinates() if form.tag == lc.SIG22 else _sig31_coordinates()
    # stable grouping by weight, then Gram-Schmidt inside each weight space
    tagged = sorted(enumerate(raw), key=lambda p: (_weight_of(p[1]), p[0]))
    vecs, wts = [], []
    for lam in range(-2, 3):
        block = [m for _, m in tagged if _weight_of(m) == lam]
        done = []
        for m in block:
            v = m.copy()
            for q in done:
                v = v - lc.inner(v, q) * q
            v = v / math.sqrt(lc.inner(v, v))
            done.append(v)
        vecs.extend(done)
        wts.extend([lam] * len(done))
    v = np.array(vecs)
    v.setflags(write=False)
    w = np.array(wts)
    w.setflags(write=False)
    return WeightBasis(form, v, w)


def build_weight_basis(form) -> WeightBasis:
    if isinstance(form, str):
        form = lc.get_form(form)
    return _build(form.tag)


def _as_basis(form):
    if isinstance(form, WeightBasis):
        return form
    return build_weight_basis(form)


def conj_matrix(form, g):
    """Matrix of Ad(g) restricted to r, for g preserving r."""
    wb = _as_basis(form)
    ginv = np.linalg.inv(g)
    imgs = np.einsum("ab,kbc,cd->kad", g, wb.vectors, ginv)
    return np.einsum("iab,kab->ik", wb.vectors, imgs)


def ad_u(form, r, s):
    """Ad(u_{r,s}) on r, computed by conjugating the basis matrices."""
    wb = _as_basis(form)
    return conj_matrix(wb, lc.u_rs(wb.form, r, s))


def ad_a(form, t):
    return np.diag(np.exp(WEIGHTS * float(t)))


@lru_cache(maxsize=None)
def _nil_generators(tag):
    wb = build_weight_basis(tag)
    xr, xs = lc.u_generators(wb.form)
    out = []
    for x in (xr, xs):
        imgs = np.einsum("ab,kbc->kac", x, wb.vectors) - np.einsum("kab,bc->kac", wb.vectors, x)
        n = np.einsum("iab,kab->ik", wb.vectors, imgs)
        n.setflags(write=False)
        out.append(n)
    return tuple(out)


def nil_generators(form):
    """(N_r, N_s): ad of the u-generators on r; ad_u(r,s) = exp(r N_r + s N_s)."""
    wb = _as_basis(form)
    return _nil_generators(wb.form.tag)


def ad_u_batch(form, r, s):
    """Vectorised ad_u for arrays r, s via the terminating exponential series."""
    nr, ns = nil_generators(form)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    shape = np.broadcast(r, s).shape
    x = r.reshape(-1, 1, 1) * nr + s.reshape(-1, 1, 1) * ns
    out = np.broadcast_to(np.eye(9), x.shape).copy()
    term = out.copy()
    for k in range(1, 5):
        term = term @ x / k
        out += term
    return out.reshape(shape + (9, 9))


def ad_u_transpose(form, r, s):
    """Ad(u_{r,s}^t) on r via conjugation (equals ad_u(r,s)^t)."""
    wb = _as_basis(form)
    return conj_matrix(wb, lc.u_rs(wb.form, r, s).T)


def flag_mask(lam):
    return WEIGHTS >= lam


def pi_flag(lam, w):
    """Orthogonal projection onto r^(lam): zero coordinates of weight < lam."""
    w = np.array(w, dtype=float, copy=True)
    w[..., WEIGHTS < lam] = 0.0
    return w


def pi_u(form, lam, r, s, w):
    return pi_flag(lam, np.asarray(w, dtype=float) @ ad_u(form, r, s).T)


def projector(lam):
    return np.diag(flag_mask(lam).astype(float))


def subspace_angle(bases, tol=1e-10):
    """sqrt of the Gram determinant of concatenated orthonormal bases."""
    mats = []
    for b in bases:
        b = np.atleast_2d(np.asarray(b, dtype=float))
        g = b @ b.T
        if np.max(np.abs(g - np.eye(len(b)))) > tol:
            raise PreconditionError("subspace_angle needs orthonormal bases")
        mats.append(b)
    m = np.concatenate(mats)
    if len(m) > m.shape[1]:
        raise PreconditionError("total dimension exceeds ambient dimension")
    det = np.linalg.det(m @ m.T)
    return float(min(1.0, math.sqrt(max(det, 0.0))))


def orthonormal_rows(m, tol=1e-10):
    """Orthonormal basis (as rows) of the row space of m."""
    u, s, vt = np.linalg.svd(np.atleast_2d(m), full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0] if len(s) else 0.0)))
    return vt[:rank]


def weyl_element(form):
    """An element of H conjugating a_t to a_{-t} (longest Weyl element)."""
    form = _as_basis(form).form
    w = np.array(form.q_tilde, dtype=float)
    if np.linalg.det(w) < 0:
        w = np.diag([1.0, 1.0, -1.0, 1.0]) @ w
    return w


def weight_space_coords(lams):
    """Orthonormal coordinate rows spanning the given weights."""
    idx = [i for i, l in enumerate(WEIGHTS) if l in set(lams)]
    return np.eye(9)[idx]
