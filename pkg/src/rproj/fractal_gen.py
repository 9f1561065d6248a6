"""
Seeded generators of finite test sets.

The Cantor generator is a lazy dyadic tree: whether a child cube is kept is
decided by a counter-based hash of (seed, level, cube coordinates), so any
subtree can be materialised on its own and agrees with the full tree.
"""

import math

import numpy as np

from .errors import SizeError, UnsupportedError
from .partition_cover import PointSet

CAP = 10_000_000

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _mix(x):
    """splitmix64 finaliser on a uint64 array."""
    x = x.copy()
    x ^= x >> np.uint64(30)
    x *= _M1
    x ^= x >> np.uint64(27)
    x *= _M2
    x ^= x >> np.uint64(31)
    return x


def _node_hash(seed, level, coords):
    with np.errstate(over="ignore"):
        h = np.full(len(coords), np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _GOLD)
        h = _mix(h ^ np.uint64(level + 1) * _GOLD)
        for j in range(coords.shape[1]):
            h = _mix(h ^ (coords[:, j].astype(np.uint64) + np.uint64(j + 1) * _GOLD))
    return h


def _child_offsets(dim):
    j = np.arange(1 << dim)
    return ((j[:, None] >> np.arange(dim)[None, ::-1]) & 1).astype(np.int64)


def _expand(nodes, level, seed, alpha, dim, chunk=2048):
    """Kept children of every node (integer coords at level + 1)."""
    nchild = 1 << dim
    base = 2.0 ** alpha
    lo = int(math.floor(base))
    frac = base - lo
    offs = _child_offsets(dim)
    out = []
    for start in range(0, len(nodes), chunk):
        blk = nodes[start:start + chunk]
        h = _node_hash(seed, level, blk)
        with np.errstate(over="ignore"):
            u = (_mix(h ^ np.uint64(0xA5A5A5A5)) >> np.uint64(11)).astype(np.float64) / 2.0 ** 53
            counts = np.minimum(lo + (u < frac), nchild)
            keys = _mix(h[:, None] ^ (np.arange(1, nchild + 1, dtype=np.uint64)[None, :] * _GOLD))
        order = np.argsort(keys, axis=1, kind="stable")
        kmax = int(counts.max())
        pick = order[:, :kmax]
        mask = np.arange(kmax)[None, :] < counts[:, None]
        parent = np.repeat(np.arange(len(blk)), kmax).reshape(len(blk), kmax)[mask]
        child = pick[mask]
        out.append(2 * blk[parent] + offs[child])
    return np.concatenate(out) if out else np.zeros((0, dim), dtype=np.int64)


def expected_size(alpha, levels):
    return 2.0 ** (alpha * levels)


def cantor_cubes(alpha, depth, seed=0, dim=9, window=None, cap=CAP):
    """Integer coordinates of the kept level-`depth` cubes.

    window=k restricts to the subtree below the lexicographically first kept
    level-k cube; the cap then applies to the expected size of that subtree.
    """
    if not 0 < alpha < dim and not (alpha == dim):
        raise ValueError(f"alpha must lie in (0, {dim}]")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    free = depth if window is None else depth - int(window)
    if window is not None and not 0 <= int(window) <= depth:
        raise ValueError("window level must lie in [0, depth]")
    if expected_size(alpha, free) > cap:
        raise SizeError(f"expected {expected_size(alpha, free):.3g} points exceeds cap {cap:.3g}")
    nodes = np.zeros((1, dim), dtype=np.int64)
    for level in range(depth):
        if window is not None and level == int(window):
            nodes = nodes[np.lexsort(nodes.T[::-1])][:1]
        nodes = _expand(nodes, level, seed, alpha, dim)
        if len(nodes) > 4 * cap:
            raise SizeError("materialised tree exceeds the cap")
    if window is not None and int(window) == depth:
        nodes = nodes[np.lexsort(nodes.T[::-1])][:1]
    return nodes[np.lexsort(nodes.T[::-1])]


def gen_cantor(alpha, depth, seed=0, window=None, dim=9, cap=CAP):
    """Centres of the kept cubes of a random dyadic Cantor set in [0, 1)^dim.

    Every occupied cube keeps floor(2^alpha) or ceil(2^alpha) of its 2^dim
    children (rounded at random with the right mean), chosen uniformly.
    """
    cubes = cantor_cubes(alpha, depth, seed, dim=dim, window=window, cap=cap)
    pts = (cubes + 0.5) / float(1 << depth)
    return PointSet(pts)


def gen_obstructed(form, alpha, depth, seed=0, window=None):
    """A 3-dim Cantor set inside the U-invariant obstruction subspace."""
    from .nondeg import obstruction_witness
    if str(getattr(form, "tag", form)).lower() != "sig22":
        raise UnsupportedError("obstructed sets are only available for Sig22")
    w_inv, _ = obstruction_witness(form)
    coef = gen_cantor(alpha, depth, seed, window=window, dim=3).points
    return PointSet(coef @ w_inv)


def gen_subspace_net(dims, delta, cap=CAP):
    """All points k*delta (k = 0..1/delta) on the coordinates in `dims`, zero elsewhere."""
    dims = sorted(set(int(d) for d in dims))
    n = int(round(1.0 / delta))
    if abs(n * delta - 1.0) > 1e-12:
        raise ValueError("delta must be 1/n")
    total = (n + 1) ** len(dims)
    if total > cap:
        raise SizeError(f"net of {total} points exceeds cap {cap}")
    axes = np.meshgrid(*[np.arange(n + 1) * delta for _ in dims], indexing="ij")
    pts = np.zeros((total, 9))
    for k, d in enumerate(dims):
        pts[:, d] = axes[k].ravel()
    return PointSet(pts)


gen_grid = gen_subspace_net
