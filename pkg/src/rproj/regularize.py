"""
Regular sets and measures along a filtration, Bourgain regularization,
the exhaustion into regular blocks, and the submodular subset selection.
"""

from dataclasses import dataclass, field
from itertools import combinations
import math

import numpy as np

from .errors import InternalError, PreconditionError
from .partition_cover import (PointSet, as_grid, atom_keys, covering_number, join, meet,
                              refinement_constant, refines, unique_rows)


class Filtration:
    """Nested partitions P_0 < P_1 < ... < P_n (each level refines the previous)."""

    def __init__(self, levels):
        self.levels = list(levels)
        if len(self.levels) < 2:
            raise ValueError("a filtration needs at least two levels")
        for i in range(1, len(self.levels)):
            if not refines(self.levels[i], self.levels[i - 1]):
                raise PreconditionError(f"level {i} does not refine level {i - 1} with nested atoms")

    @property
    def n(self):
        return len(self.levels) - 1

    def branching(self):
        """d_i = log2 max_P |P|_{P_i} for P in P_{i-1}, i = 1..n."""
        return [math.log2(refinement_constant(self.levels[i], self.levels[i - 1]))
                for i in range(1, len(self.levels))]

    def loss_factor(self):
        return math.prod(1.0 / (2.0 * (1.0 + d)) for d in self.branching())

    def labels(self, points):
        """Atom label of every point at every level (list of int arrays)."""
        out = []
        for p in self.levels:
            _, inv = unique_rows(atom_keys(p, points), return_inverse=True)
            out.append(inv)
        return out


def _pts(a):
    return a.points if isinstance(a, PointSet) else np.asarray(a, dtype=float)


def _parent_map(child_lab, parent_lab):
    k = child_lab.max() + 1
    par = np.empty(k, dtype=np.int64)
    par[child_lab] = parent_lab
    return par


def _counts_per_parent(child_lab, parent_lab, alive_pts):
    """Number of distinct alive children under each parent (indexed by parent label)."""
    pairs = np.stack([parent_lab[alive_pts], child_lab[alive_pts]], axis=1)
    u = unique_rows(pairs)
    size = parent_lab.max() + 1
    return np.bincount(u[:, 0], minlength=size)


def set_sigma_profile(a, filt):
    """Per level, the sorted list of child counts over occupied parents."""
    pts = _pts(a)
    labs = filt.labels(pts)
    alive = np.ones(len(pts), dtype=bool)
    out = []
    for i in range(1, filt.n + 1):
        cnt = _counts_per_parent(labs[i], labs[i - 1], alive)
        out.append(cnt[cnt > 0])
    return out


def is_regular_set(a, filt, sigma):
    """2^(s_i - 1) <= |A cap P|_{P_i} < 2^(s_i) for every occupied P in P_{i-1}."""
    if len(sigma) != filt.n:
        raise ValueError("sigma length must equal the number of refinement steps")
    for cnt, s in zip(set_sigma_profile(a, filt), sigma):
        lo = 2.0 ** (s - 1)
        hi = 2.0 ** s
        if np.any(cnt < lo) or np.any(cnt >= hi):
            return False
    return True


def _dyadic_class(n):
    # j with 2^(j-1) <= n < 2^j
    return np.floor(np.log2(n)).astype(np.int64) + 1 if np.ndim(n) else int(math.floor(math.log2(n))) + 1


@dataclass
class RegularizeResult:
    subset: PointSet
    indices: np.ndarray
    sigma: tuple
    info: dict = field(default_factory=dict)

    def __iter__(self):
        # allows  sub, sigma = bourgain_regularize_set(...)
        yield self.subset
        yield self.sigma


def bourgain_regularize_set(a, filt):
    """Regular A' subset of A, a union of finest atoms, with the pigeonhole count bound.

    Levels are processed finest first; at each level the dyadic class of
    child counts that retains the most finest atoms is kept (ties go to the
    smaller class).
    """
    a = a if isinstance(a, PointSet) else PointSet(a)
    pts = a.points
    labs = filt.labels(pts)
    leaf = labs[-1]
    alive = np.ones(len(pts), dtype=bool)
    sig = [0] * filt.n
    for i in range(filt.n, 0, -1):
        child, parent = labs[i], labs[i - 1]
        cnt = _counts_per_parent(child, parent, alive)
        # finest atoms alive under each parent
        pairs = unique_rows(np.stack([parent[alive], leaf[alive]], axis=1))
        leaves_under = np.bincount(pairs[:, 0], minlength=len(cnt))
        occupied = cnt > 0
        cls = np.zeros(len(cnt), dtype=np.int64)
        cls[occupied] = np.floor(np.log2(cnt[occupied])).astype(np.int64) + 1
        best, best_val = None, -1
        for j in np.unique(cls[occupied]):
            val = int(leaves_under[cls == j].sum())
            if val > best_val:
                best, best_val = int(j), val
        keep_parent = cls == best
        alive &= keep_parent[parent]
        sig[i - 1] = best
    idx = np.nonzero(alive)[0]
    sub = a.subset(idx)
    full = covering_number(a, filt.levels[-1])
    kept = covering_number(sub, filt.levels[-1])
    bound = full * filt.loss_factor()
    if kept < bound - 1e-9:
        raise InternalError(f"set regularization kept {kept} < bound {bound}")
    if not is_regular_set(sub, filt, sig):
        raise InternalError("set regularization output is not regular")
    return RegularizeResult(sub, idx, tuple(sig), {"kept_atoms": kept, "atoms": full, "bound": bound})


# -- measures ---------------------------------------------------------------

def _masses(a, idx=None):
    """Point masses; integer multiplicities when uniform so sums are exact."""
    if a.uniform:
        m = np.ones(len(a), dtype=np.int64)
    else:
        m = a.weights
    return m if idx is None else m[idx]


def measure_ratio_profile(a, filt):
    """Per level: array of mu(P)/mu(parent) over occupied pairs, for mu = mu_A."""
    pts = _pts(a)
    labs = filt.labels(pts)
    m = _masses(a)
    out = []
    for i in range(1, filt.n + 1):
        child, parent = labs[i], labs[i - 1]
        cm = np.bincount(child, weights=m)
        pm = np.bincount(parent, weights=m)
        par = _parent_map(child, parent)
        occ = np.nonzero(cm > 0)[0]
        out.append(cm[occ] / pm[par[occ]])
    return out


def is_regular_measure(a, filt, sigma):
    """2^-s_i < mu(P)/mu(P^) <= 2^(-s_i + 1) for all occupied nested pairs."""
    if len(sigma) != filt.n:
        raise ValueError("sigma length must equal the number of refinement steps")
    for ratios, s in zip(measure_ratio_profile(a, filt), sigma):
        if np.any(ratios <= 2.0 ** (-s)) or np.any(ratios > 2.0 ** (1 - s)):
            return False
    return True


def _level_bands(parent_of_child, cmass, max_band=64):
    """Candidate contiguous bands (in mass order) of children for every parent.

    Returns arrays (parent, lo, hi, mass, members) where a band with total
    mass M and extreme masses m_max, m_min is valid for every s in
    (log2(M/m_min), 1 + log2(M/m_max)].
    """
    order = np.lexsort((-cmass, parent_of_child))
    par_sorted = parent_of_child[order]
    bounds = np.flatnonzero(np.diff(par_sorted)) + 1
    groups = np.split(order, bounds)
    P, LO, HI, MS, MEM = [], [], [], [], []
    for g in groups:
        ms = cmass[g]
        csum = np.concatenate([[0.0], np.cumsum(ms, dtype=float)])
        k = len(g)
        for a in range(k):
            top = ms[a]
            for b in range(a, min(k, a + max_band)):
                if not top < 2.0 * ms[b]:
                    break
                tot = csum[b + 1] - csum[a]
                P.append(parent_of_child[g[0]])
                LO.append(math.log2(tot / ms[b]))
                HI.append(1.0 + math.log2(tot / top))
                MS.append(tot)
                MEM.append(g[a:b + 1])
    return np.array(P), np.array(LO), np.array(HI), np.array(MS), MEM


# log-space margin so that float ties between bands never pass as valid
_TOL = 1e-9


def _choose_sigma(par, lo, hi, ms, max_candidates=4000):
    cands = np.unique(hi)
    if len(cands) > max_candidates:
        cands = cands[np.linspace(0, len(cands) - 1, max_candidates).astype(int)]
    size = par.max() + 1
    best_s, best_val = None, -1.0
    for s in cands:
        ok = (lo + _TOL < s) & (s <= hi)
        if not np.any(ok):
            continue
        per = np.zeros(size)
        np.maximum.at(per, par[ok], ms[ok])
        val = per.sum()
        if val > best_val * (1 + 1e-12):
            best_s, best_val = float(s), val
    return best_s


def bourgain_regularize_measure(f, filt):
    """F' subset of F, a union of finest atoms, with mu_{F'} regular.

    Levels are processed finest first.  Inside each parent atom the kept
    children form a contiguous band in mass order; the exponent s_i is
    chosen to maximise the retained mass over all parents.  The result is
    verified against the regularity predicate before returning.
    """
    f = f if isinstance(f, PointSet) else PointSet(f)
    pts = f.points
    labs = filt.labels(pts)
    m = _masses(f).astype(float)
    alive = np.ones(len(pts), dtype=bool)
    sig = [0.0] * filt.n
    dvals = filt.branching()
    for i in range(filt.n, 0, -1):
        child, parent = labs[i], labs[i - 1]
        cmass = np.bincount(child, weights=np.where(alive, m, 0.0))
        par = _parent_map(child, parent)
        occ = np.nonzero(cmass > 0)[0]
        P, LO, HI, MS, MEM = _level_bands(par[occ], cmass[occ])
        s_star = _choose_sigma(P, LO, HI, MS)
        ok = (LO + _TOL < s_star) & (s_star <= HI)
        # per parent best band; ties to the first candidate in enumeration order
        chosen = {}
        for k in np.nonzero(ok)[0]:
            p = int(P[k])
            if p not in chosen or MS[k] > MS[chosen[p]] * (1 + 1e-12):
                chosen[p] = k
        lo_all = max(LO[k] for k in chosen.values())
        hi_all = min(HI[k] for k in chosen.values())
        # any s in (lo_all, hi_all] works; prefer [1, d_i + 1] and stay off the endpoints
        lo2, hi2 = max(lo_all, 1.0), min(hi_all, dvals[i - 1] + 1.0)
        if hi2 - lo2 > _TOL:
            s_mid = 0.5 * (lo2 + hi2)
        elif lo_all < 1.0 <= hi_all and 1.0 - lo_all > _TOL:
            s_mid = 1.0
        else:
            s_mid = 0.5 * (lo_all + hi_all)
        keep_child = np.zeros(len(cmass), dtype=bool)
        for k in chosen.values():
            keep_child[occ[MEM[k]]] = True
        alive &= keep_child[child]
        sig[i - 1] = float(s_mid)
    idx = np.nonzero(alive)[0]
    sub = f.subset(idx)
    mass = float(f.mass_vector()[idx].sum())
    bound = filt.loss_factor()
    if not is_regular_measure(sub, filt, sig):
        raise InternalError("measure regularization output is not regular")
    return RegularizeResult(sub, idx, tuple(sig), {"mass": mass, "bound": bound,
                                                   "bound_ok": mass >= bound})


def regular_exhaust(f, filt, c):
    """Disjoint regular blocks F_j covering at least 1 - c of the mass.

    Iterates the measure regularization on the residual B_j while
    mu(B_j) >= c, at most N times with N the least integer such that
    (1 - lambda)^N < c.  Returns (blocks, report); blocks are index arrays
    into f and report["sigmas"] holds the exponent tuple of each block.
    """
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    f = f if isinstance(f, PointSet) else PointSet(f)
    lam = filt.loss_factor()
    n_steps = 1
    while (1 - lam) ** n_steps >= c:
        n_steps += 1
    mvec = f.mass_vector()
    residual = np.arange(len(f))
    blocks, sigmas = [], []
    for _ in range(n_steps):
        if len(residual) == 0 or mvec[residual].sum() < c:
            break
        res = bourgain_regularize_measure(f.subset(residual), filt)
        taken = residual[res.indices]
        blocks.append(taken)
        sigmas.append(res.sigma)
        residual = np.setdiff1d(residual, taken, assume_unique=True)
    covered = float(sum(mvec[b].sum() for b in blocks))
    report = {
        "lambda": lam,
        "steps_allowed": n_steps,
        "blocks": len(blocks),
        "sigmas": sigmas,
        "covered": covered,
        "block_masses": [float(mvec[b].sum()) for b in blocks],
        "cover_ok": covered >= 1 - c - 1e-12,
        "block_mass_ok": all(float(mvec[b].sum()) >= c * lam * (1 - 1e-12) for b in blocks),
    }
    return blocks, report


# -- submodularity ----------------------------------------------------------

@dataclass
class SubmodularReport:
    indices: np.ndarray
    count_p: int
    count_q: int
    count_r: int
    count_r_sub: int
    count_s_sub: int
    c: float
    retained_ok: bool
    product_ok: bool
    method: str


def submodular_select(a, p, q, c, exhaustive_limit=20):
    """A' = A cap (union of S-atoms) with |A'|_R >= (1-c)|A|_R and
    |A|_P |A|_Q >= (c^2/4) |A|_R |A'|_S, R = P v Q, S = P ^ Q.

    S-atoms are taken in decreasing order of their R-count until the retained
    R-count reaches (1-c)|A|_R.  Both inequalities are checked; on failure an
    exhaustive search over S-atom subsets is used when there are few atoms.
    """
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    a = a if isinstance(a, PointSet) else PointSet(a)
    pts = a.points
    r_part, s_part = join(p, q), meet(p, q)
    cp, cq = covering_number(pts, p), covering_number(pts, q)
    r_keys = atom_keys(r_part, pts)
    r_u, r_lab = unique_rows(r_keys, return_inverse=True)
    cr = len(r_u)
    n_s, s_lab = unique_rows(atom_keys(s_part, pts), return_inverse=True)
    n_s = len(n_s)
    pairs = unique_rows(np.stack([s_lab, r_lab], axis=1))
    r_per_s = np.bincount(pairs[:, 0], minlength=n_s)
    members = [pairs[pairs[:, 0] == k, 1] for k in range(n_s)] if n_s <= 4096 else None
    if members is None:
        order_pairs = np.argsort(pairs[:, 0], kind="stable")
        splits = np.flatnonzero(np.diff(pairs[order_pairs, 0])) + 1
        members = [pairs[g, 1] for g in np.split(order_pairs, splits)]

    def check(sel):
        seen = np.zeros(cr, dtype=bool)
        for k in sel:
            seen[members[k]] = True
        rs = int(seen.sum())
        ss = len(sel)
        return rs, ss, rs >= (1 - c) * cr, cp * cq >= (c * c / 4.0) * cr * ss

    order = sorted(range(n_s), key=lambda k: (-r_per_s[k], k))
    seen = np.zeros(cr, dtype=bool)
    sel = []
    for k in order:
        sel.append(k)
        seen[members[k]] = True
        if seen.sum() >= (1 - c) * cr:
            break
    rs, ss, ok1, ok2 = check(sel)
    method = "greedy"
    if not (ok1 and ok2):
        found = None
        if n_s <= exhaustive_limit:
            for size in range(1, n_s + 1):
                for combo in combinations(range(n_s), size):
                    t = check(combo)
                    if t[2] and t[3]:
                        found = (list(combo), t)
                        break
                if found:
                    break
        if found is None:
            raise InternalError("submodular selection failed verification")
        sel, (rs, ss, ok1, ok2) = found
        method = "exhaustive"
    keep = np.isin(s_lab, np.array(sel))
    return SubmodularReport(np.nonzero(keep)[0], cp, cq, cr, rs, ss, c, ok1, ok2, method)
