"""
Finite point sets in r and axis-aligned (possibly anisotropic) grid partitions.

Every grid scale is an exact power of 2^(1/64).  A grid is described by nine
integer exponents e_i: coordinate i is cut into half-open cells of side
2^(-e_i / 64), anchored at the origin.  A tube partition D_delta^r with
delta = 2^-n and r_j in (1/64)Z uses e_i = n * 64 * r_{weight(i) + 3}.
"""

from dataclasses import dataclass
from fractions import Fraction
import csv
import io
import math

import numpy as np

from .errors import PreconditionError
from .weight_rep import WEIGHTS

DIM = 9


class PointSet:
    """A finite weighted multiset of points of r (rows of an (n, 9) array)."""

    def __init__(self, points, weights=None):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if len(pts) == 0:
            raise ValueError("PointSet must be nonempty")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite coordinates")
        self.points = pts
        if weights is None:
            self.weights = None
        else:
            w = np.asarray(weights, dtype=float).reshape(-1)
            if len(w) != len(pts) or np.any(w <= 0):
                raise ValueError("weights must be positive, one per point")
            total = w.sum()
            # already-normalised input (e.g. read back from CSV) is kept bit for bit
            self.weights = w if abs(total - 1.0) <= 1e-15 * len(w) else w / total

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def uniform(self):
        return self.weights is None

    def mass_vector(self):
        if self.weights is None:
            return np.full(len(self), 1.0 / len(self))
        return self.weights

    def subset(self, idx):
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.nonzero(idx)[0]
        if len(idx) == 0:
            raise ValueError("empty subset")
        w = None if self.weights is None else self.weights[idx]
        return PointSet(self.points[idx], w)

    def transform(self, mat):
        """Apply a linear map (given as a 9x9 matrix acting on columns)."""
        return PointSet(self.points @ np.asarray(mat).T, self.weights)

    def to_csv(self, path=None):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        header = [f"c{i}" for i in range(self.dim)]
        if self.weights is not None:
            header.append("weight")
        wr.writerow(header)
        for k, row in enumerate(self.points):
            vals = [repr_float(v) for v in row]
            if self.weights is not None:
                vals.append(repr_float(self.weights[k]))
            wr.writerow(vals)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text):
        if "\n" in str(path_or_text):
            text = str(path_or_text)
        else:
            with open(path_or_text) as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        has_w = header[-1] == "weight"
        data = np.array([[float(v) for v in r] for r in body])
        if has_w:
            return cls(data[:, :-1], data[:, -1])
        return cls(data)


def repr_float(v):
    return format(float(v), ".17g")


# -- tuples and partitions --------------------------------------------------

@dataclass(frozen=True)
class RTuple:
    """Five exponents r_1 <= ... <= r_5 in [0, 1], stored in units of 1/64."""
    r64: tuple

    def __post_init__(self):
        r = tuple(int(v) for v in self.r64)
        if len(r) != 5:
            raise ValueError("RTuple needs 5 entries")
        if any(v < 0 or v > 64 for v in r) or any(r[i] > r[i + 1] for i in range(4)):
            raise ValueError(f"RTuple entries must satisfy 0 <= r1 <= ... <= r5 <= 1: {r}")
        object.__setattr__(self, "r64", r)

    @classmethod
    def of(cls, values):
        out = []
        for v in values:
            f = Fraction(v).limit_denominator(1 << 20) if isinstance(v, float) else Fraction(v)
            q = f * 64
            if q.denominator != 1:
                raise ValueError(f"RTuple entry {v} is not a multiple of 1/64")
            out.append(int(q))
        return cls(tuple(out))

    @property
    def values(self):
        return tuple(Fraction(v, 64) for v in self.r64)

    def floats(self):
        return tuple(v / 64 for v in self.r64)

    def join(self, other):
        return RTuple(tuple(max(a, b) for a, b in zip(self.r64, other.r64)))

    def meet(self, other):
        return RTuple(tuple(min(a, b) for a, b in zip(self.r64, other.r64)))

    @classmethod
    def constant(cls, v):
        return cls.of([v] * 5)


MULT = (1, 2, 3, 2, 1)


@dataclass(frozen=True)
class Grid:
    """Axis-aligned grid; coordinate i has cell side 2^(-exps[i]/64)."""
    exps: tuple

    def __post_init__(self):
        object.__setattr__(self, "exps", tuple(int(e) for e in self.exps))
        if any(e < 0 for e in self.exps):
            raise ValueError("grid exponents must be >= 0 (cells no larger than 1)")

    def scales(self):
        return np.array([_pow2_64(-e) for e in self.exps])

    def log2_volume(self):
        return -Fraction(sum(self.exps), 64)

    def grid(self):
        return self


@dataclass(frozen=True)
class TubePartition:
    """D_delta^r with delta = 2^-log2_inv_delta."""
    log2_inv_delta: int
    rt: RTuple

    def __post_init__(self):
        if int(self.log2_inv_delta) < 1:
            raise ValueError("delta must be 2^-n with n >= 1")

    @property
    def delta(self):
        return 2.0 ** (-self.log2_inv_delta)

    def grid(self):
        n = int(self.log2_inv_delta)
        return Grid(tuple(n * self.rt.r64[w + 2] for w in WEIGHTS))

    @property
    def exps(self):
        return self.grid().exps

    def log2_volume(self):
        """log2 vol(T) = -n * sum_i d_i r_i, exactly."""
        n = int(self.log2_inv_delta)
        return -n * sum(Fraction(m * r, 64) for m, r in zip(MULT, self.rt.r64))

    @classmethod
    def cube(cls, n):
        return cls(n, RTuple((64,) * 5))


def cube_grid(n, dim=DIM):
    return Grid((64 * n,) * dim)


def as_grid(p):
    return p.grid()


def _pow2_64(e):
    q, r = divmod(int(e), 64)
    return math.ldexp(2.0 ** (r / 64.0), q)


def atom_keys(p, x):
    """Integer cell indices floor(c_i / side_i) for each row of x."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    exps = as_grid(p).exps
    if len(exps) != x.shape[1]:
        raise ValueError("dimension mismatch between grid and points")
    out = np.empty(x.shape, dtype=np.int64)
    for i, e in enumerate(exps):
        q, r = divmod(e, 64)
        col = np.ldexp(x[:, i], q)
        if r:
            col = col * (2.0 ** (r / 64.0))
        out[:, i] = np.floor(col)
    return out


def atom_key(p, w):
    return tuple(int(k) for k in atom_keys(p, w)[0])


def unique_rows(keys, return_inverse=False):
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    view = keys.view(np.dtype((np.void, keys.dtype.itemsize * keys.shape[1]))).ravel()
    res = np.unique(view, return_inverse=return_inverse)
    if return_inverse:
        u, inv = res
        return u.view(np.int64).reshape(-1, keys.shape[1]), inv.reshape(-1)
    return res.view(np.int64).reshape(-1, keys.shape[1])


def _points(a):
    return a.points if isinstance(a, PointSet) else np.asarray(a, dtype=float)


def covering_number(a, p):
    """Number of atoms of p meeting the point set a."""
    return len(unique_rows(atom_keys(p, _points(a))))


def atom_labels(a, p):
    """(number of atoms, label per point) with labels 0..k-1 in key order."""
    u, inv = unique_rows(atom_keys(p, _points(a)), return_inverse=True)
    return len(u), inv


def _same_base(p, q):
    if isinstance(p, TubePartition) and isinstance(q, TubePartition):
        if p.log2_inv_delta != q.log2_inv_delta:
            raise ValueError("join/meet need the same delta")
        return True
    return False


def join(p, q):
    """Common refinement: componentwise max of exponents."""
    if _same_base(p, q):
        return TubePartition(p.log2_inv_delta, p.rt.join(q.rt))
    return Grid(tuple(max(a, b) for a, b in zip(as_grid(p).exps, as_grid(q).exps)))


def meet(p, q):
    """Coarsest grid refined by both: componentwise min of exponents."""
    if _same_base(p, q):
        return TubePartition(p.log2_inv_delta, p.rt.meet(q.rt))
    return Grid(tuple(min(a, b) for a, b in zip(as_grid(p).exps, as_grid(q).exps)))


def refines(p, q):
    """True if every atom of q is a union of atoms of p."""
    ep, eq = as_grid(p).exps, as_grid(q).exps
    return all(a >= b and (a - b) % 64 == 0 for a, b in zip(ep, eq))


def refinement_constant(p, q):
    """max over atoms Q of q of |Q|_p, for q coarser than or equal to p."""
    ep, eq = as_grid(p).exps, as_grid(q).exps
    if any(a < b for a, b in zip(ep, eq)):
        raise PreconditionError("refinement_constant needs q coarser than p in every coordinate")
    total = 1
    for a, b in zip(ep, eq):
        d = a - b
        if d % 64 == 0:
            total *= 1 << (d // 64)
        else:
            total *= math.ceil(2.0 ** (d / 64.0))
    return total
