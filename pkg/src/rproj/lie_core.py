"""
4x4 linear algebra for the symmetric pairs (sl4, so(Q1)) and (sl4, so(Q2)).

Matrices are plain float64 numpy arrays of shape (4, 4).  The norm used for
all size statements is the entrywise maximum; the inner product is the trace
form <X, Y> = tr(X Y^t).
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .errors import DomainError, FormMismatchError, NoFactorizationError

SIG22 = "Sig22"
SIG31 = "Sig31"


@dataclass(frozen=True, eq=False)
class Form:
    tag: str
    q_matrix: np.ndarray
    q_tilde: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.q_matrix @ x)

    def __repr__(self):
        return f"Form({self.tag})"


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def get_form(tag) -> Form:
    """Return the form for `tag` ('Sig22'/'sig22' or 'Sig31'/'sig31')."""
    key = str(tag).lower()
    if key == "sig22":
        # Q1(x) = x2 x3 - x1 x4
        q = [[0, 0, 0, -0.5], [0, 0, 0.5, 0], [0, 0.5, 0, 0], [-0.5, 0, 0, 0]]
        qt = [[0, 0, 0, 1], [0, 0, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]]
        return Form(SIG22, _frozen(q), _frozen(qt))
    if key == "sig31":
        # Q2(x) = x2^2 + x3^2 - 2 x1 x4
        q = [[0, 0, 0, -1], [0, 1, 0, 0], [0, 0, 1, 0], [-1, 0, 0, 0]]
        return Form(SIG31, _frozen(q), _frozen(q))
    raise ValueError(f"unknown form tag {tag!r}")


def norm(x):
    return float(np.max(np.abs(x)))


def inner(x, y):
    return float(np.sum(np.asarray(x) * np.asarray(y)))


def sigma(form, x):
    """The involution x -> -Q x^t Q^{-1} (Q~ squares to the identity)."""
    qt = form.q_tilde
    return -qt @ np.asarray(x, dtype=float).T @ qt


def split_h_r(form, x):
    x = np.asarray(x, dtype=float)
    sx = sigma(form, x)
    return (x + sx) / 2.0, (x - sx) / 2.0


def bracket(x, y):
    return x @ y - y @ x


def killing(x, y):
    return 8.0 * float(np.trace(x @ y))


def sl4_basis():
    """Standard basis of sl4: off-diagonal units then diag(e_i - e_{i+1})."""
    out = []
    for i in range(4):
        for j in range(4):
            if i != j:
                m = np.zeros((4, 4))
                m[i, j] = 1.0
                out.append(m)
    for i in range(3):
        m = np.zeros((4, 4))
        m[i, i] = 1.0
        m[i + 1, i + 1] = -1.0
        out.append(m)
    return out


def _orthonormal_span(mats, tol=1e-10):
    a = np.array([m.ravel() for m in mats])
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return [vt[k].reshape(4, 4) for k in range(rank)]


@lru_cache(maxsize=None)
def _hr_bases(tag):
    form = get_form(tag)
    hs, rs = [], []
    for b in sl4_basis():
        h, r = split_h_r(form, b)
        hs.append(h)
        rs.append(r)
    h = _orthonormal_span(hs)
    r = _orthonormal_span(rs)
    return tuple(h), tuple(r)


def h_basis(form):
    """Orthonormal (trace form) basis of Fix(sigma)."""
    return [m.copy() for m in _hr_bases(form.tag)[0]]


def r_basis(form):
    """Orthonormal basis of the (-1)-eigenspace of sigma (no weight ordering)."""
    return [m.copy() for m in _hr_bases(form.tag)[1]]


def sigma_matrix(form):
    """Matrix of sigma on the 15 standard sl4 coordinates."""
    basis = sl4_basis()
    flat = np.array([b.ravel() for b in basis]).T
    cols = [np.linalg.lstsq(flat, sigma(form, b).ravel(), rcond=None)[0] for b in basis]
    return np.array(cols).T


# -- group elements ---------------------------------------------------------

A_GEN = np.diag([1.0, 0.0, 0.0, -1.0])


def a_t(t):
    return np.diag([math.exp(t), 1.0, 1.0, math.exp(-t)])


def u_generators(form):
    """Commuting nilpotent generators (X_r, X_s) with u_{r,s} = exp(r X_r + s X_s)."""
    e = lambda i, j: np.eye(4)[:, [i]] @ np.eye(4)[[j], :]
    if form.tag == SIG22:
        return e(0, 1) + e(2, 3), e(0, 2) + e(1, 3)
    return e(0, 1) + e(1, 3), e(0, 2) + e(2, 3)


def u_rs(form, r, s):
    """Explicit horospherical element u_{r,s}."""
    if form.tag == SIG22:
        return np.array([[1.0, r, s, s * r], [0, 1, 0, s], [0, 0, 1, r], [0, 0, 0, 1]])
    return np.array([[1.0, r, s, (r * r + s * s) / 2], [0, 1, 0, r], [0, 0, 1, s], [0, 0, 0, 1]])


def in_h_group(form, h, tol=1e-10):
    q = form.q_matrix
    return norm(h.T @ q @ h - q) <= tol


def so22_ideals(form):
    """Bases of the two sl2 ideals of so(2,2) (coefficient order a, b, c)."""
    if form.tag != SIG22:
        raise FormMismatchError("the ideal decomposition exists only for Sig22")

    def x1(a, b, c):
        return np.array([[a, b, 0, 0], [c, -a, 0, 0], [0, 0, a, b], [0, 0, c, -a]], dtype=float)

    def x2(a, b, c):
        return np.array([[a, 0, b, 0], [0, a, 0, b], [c, 0, -a, 0], [0, c, 0, -a]], dtype=float)

    units = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    return [x1(*v) for v in units], [x2(*v) for v in units]


# -- exp / log --------------------------------------------------------------

_PADE6 = [math.factorial(12 - k) * math.factorial(6)
          / (math.factorial(12) * math.factorial(k) * math.factorial(6 - k)) for k in range(7)]


def mat_exp(x):
    """Matrix exponential: Pade(6,6) with scaling and squaring.

    Nilpotent inputs (x^4 == 0 exactly) use the terminating series.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    eye = np.eye(n)
    x2 = x @ x
    x3 = x2 @ x
    if n == 4 and not np.any(x3 @ x):
        return eye + x + x2 / 2.0 + x3 / 6.0
    nrm = np.max(np.sum(np.abs(x), axis=0))
    s = 0
    if nrm > 0.5:
        s = int(math.ceil(math.log2(nrm / 0.5)))
    y = x / (2.0 ** s)
    y2 = y @ y
    y4 = y2 @ y2
    y6 = y4 @ y2
    c = _PADE6
    even = c[0] * eye + c[2] * y2 + c[4] * y4 + c[6] * y6
    odd = y @ (c[1] * eye + c[3] * y2 + c[5] * y4)
    f = np.linalg.solve(even - odd, even + odd)
    for _ in range(s):
        f = f @ f
    return f


def mat_log(g):
    """Principal logarithm for ||g - Id||_2 < 0.5.

    Uses log g = 2 atanh((g - I)(g + I)^{-1}); exact terminating series when
    g - I is nilpotent.
    """
    g = np.asarray(g, dtype=float)
    eye = np.eye(g.shape[0])
    d = g - eye
    if np.linalg.norm(d, 2) >= 0.5:
        raise DomainError("mat_log needs ||g - Id|| < 0.5 in operator norm")
    d2 = d @ d
    d3 = d2 @ d
    if g.shape[0] == 4 and not np.any(d3 @ d):
        return d - d2 / 2.0 + d3 / 3.0
    y = np.linalg.solve((g + eye).T, d.T).T
    y2 = y @ y
    term = y.copy()
    acc = y.copy()
    k = 1
    while True:
        term = term @ y2
        k += 2
        step = term / k
        acc += step
        if np.max(np.abs(step)) < 1e-19 or k > 201:
            break
    return 2.0 * acc


# -- BCH-type factorization -------------------------------------------------

def _dexp_right(x, e, terms=10):
    """sum_k (-ad_x)^k (e) / (k+1)!  so that d/de exp(x + e) = exp(x) * this."""
    acc = e.copy()
    t = e
    for k in range(1, terms):
        t = -(x @ t - t @ x)
        acc = acc + t / math.factorial(k + 1)
    return acc


def bch_factorize(form, g, eta0=0.05, max_iter=100, tol=1e-9):
    """Solve g = h exp(w) with log h in the fixed space and w in the (-1)-space.

    Damped Newton iteration on (coordinates of log h, coordinates of w).
    Returns (h, w) as 4x4 arrays.
    """
    g = np.asarray(g, dtype=float)
    eye = np.eye(4)
    if norm(g - eye) > eta0:
        raise DomainError(f"||g - Id|| = {norm(g - eye):.3g} exceeds eta0 = {eta0}")
    hb = np.array(h_basis(form))
    rb = np.array(r_basis(form))
    basis = np.concatenate([hb, rb])
    x0 = mat_log(g)
    coef = np.einsum("kij,ij->k", basis, x0)

    def build(c):
        hx = np.einsum("k,kij->ij", c[:6], hb)
        wx = np.einsum("k,kij->ij", c[6:], rb)
        return hx, wx

    def resid(c):
        hx, wx = build(c)
        eh = mat_exp(hx)
        ew = mat_exp(wx)
        return eh, ew, eh @ ew - g

    eh, ew, res = resid(coef)
    rn = norm(res)
    for _ in range(max_iter):
        if rn <= 1e-14:
            break
        hx, wx = build(coef)
        cols = []
        for k in range(6):
            cols.append((eh @ _dexp_right(hx, hb[k]) @ ew).ravel())
        ehw = eh @ ew
        for k in range(9):
            cols.append((ehw @ _dexp_right(wx, rb[k])).ravel())
        jac = np.array(cols).T
        step = np.linalg.lstsq(jac, -res.ravel(), rcond=None)[0]
        lam = 1.0
        improved = False
        for _ in range(40):
            trial = coef + lam * step
            teh, tew, tres = resid(trial)
            tn = norm(tres)
            if tn < rn:
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
        coef, eh, ew, res, rn = trial, teh, tew, tres, tn
    if rn > tol:
        raise NoFactorizationError(f"Newton did not converge (residual {rn:.3g})")
    hx, wx = build(coef)
    return eh, wx
