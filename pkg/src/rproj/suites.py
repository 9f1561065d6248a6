"""
Invariant suites shared by the CLI and the acceptance tests.

Each suite returns a list of SuiteCheck rows (name, value, threshold, pass).
"""

from dataclasses import asdict, dataclass
import math

import numpy as np

from . import lie_core as lc
from . import nondeg as nd
from . import weight_rep as wr


@dataclass
class SuiteCheck:
    name: str
    value: float
    threshold: float
    passed: bool
    relation: str = "<="

    def to_dict(self):
        return asdict(self)


def _le(name, value, thr):
    return SuiteCheck(name, float(value), float(thr), bool(value <= thr), "<=")


def _ge(name, value, thr):
    return SuiteCheck(name, float(value), float(thr), bool(value >= thr), ">=")


def _eq(name, value, target):
    value = value.item() if isinstance(value, np.generic) else value
    ok = tuple(value) == tuple(target) if isinstance(target, (tuple, list)) else value == target
    return SuiteCheck(name, value if not isinstance(value, tuple) else list(value),
                      target if not isinstance(target, tuple) else list(target), bool(ok), "==")


def _form(form):
    return lc.get_form(form) if isinstance(form, str) else form


def _random_r(form, rng, n):
    rb = np.array(lc.r_basis(form))
    c = rng.normal(size=(n, len(rb)))
    return np.einsum("nk,kij->nij", c, rb)


def rep_suite(form, n_samples=1000, seed=0):
    """Involution, eigenspaces, weights, a_t rates, flag invariance, u additivity."""
    form = _form(form)
    rng = np.random.default_rng(seed)
    out = []
    s = lc.sigma_matrix(form)
    out.append(_le("sigma_squared", np.max(np.abs(s @ s - np.eye(15))), 1e-12))
    ev = np.linalg.eigvals(s).real
    out.append(_eq("eigenspace_dims", (int(np.sum(ev > 0)), int(np.sum(ev < 0))), (6, 9)))
    wb = wr.build_weight_basis(form)
    ad_gen = np.array([wb.coords(lc.bracket(lc.A_GEN, v)) for v in wb.vectors]).T
    wts = np.round(np.diag(ad_gen)).astype(int)
    mult = tuple(int(np.sum(wts == l)) for l in range(-2, 3))
    out.append(_eq("weight_multiplicities", mult, (1, 2, 3, 2, 1)))
    out.append(_le("ad_a_generator_offdiag", np.max(np.abs(ad_gen - np.diag(np.diag(ad_gen)))),
                   1e-12))
    rel = 0.0
    for t in np.linspace(-3, 3, 13):
        m = wr.conj_matrix(wb, lc.a_t(t))
        target = np.diag(np.exp(wr.WEIGHTS * t))
        rel = max(rel, float(np.max(np.abs(m - target)) / np.max(np.abs(target))))
    out.append(_le("ad_a_rates_rel", rel, 1e-9))
    inv, add = 0.0, 0.0
    rs = rng.uniform(-1, 1, size=(n_samples, 4))
    for r1, s1, r2, s2 in rs:
        m = wr.ad_u(wb, r1, s1)
        for lam, start in wr.FLAG_START.items():
            inv = max(inv, float(np.max(np.abs(m[:start, start:]), initial=0.0)))
        prod = m @ wr.ad_u(wb, r2, s2)
        add = max(add, float(np.max(np.abs(prod - wr.ad_u(wb, r1 + r2, s1 + s2)))))
    out.append(_le("flag_invariance", inv, 1e-12))
    out.append(_le("u_additivity", add, 1e-13))
    return out


def symmetric_pair_suite(form, n_samples=1000, seed=0):
    """[r, r] inside h, a large bracket in r, and commuting so(2,2) ideals (Sig22)."""
    form = _form(form)
    rng = np.random.default_rng(seed)
    xs = _random_r(form, rng, 2 * n_samples)
    worst, best = 0.0, 0.0
    for x1, x2 in zip(xs[:n_samples], xs[n_samples:]):
        x1 = x1 / lc.norm(x1)
        x2 = x2 / lc.norm(x2)
        b = lc.bracket(x1, x2)
        worst = max(worst, lc.norm(lc.split_h_r(form, b)[1]))
        best = max(best, lc.norm(b))
    out = [_le("rr_in_h", worst, 1e-12), _ge("max_bracket", best, 0.5)]
    if form.tag == lc.SIG22:
        b1, b2 = lc.so22_ideals(form)
        comm = max(lc.norm(lc.bracket(x, y)) for x in b1 for y in b2)
        inh = max(lc.norm(lc.split_h_r(form, x)[1]) for x in b1 + b2)
        out.append(_le("ideals_commute", comm, 1e-13))
        out.append(_le("ideals_in_h", inh, 1e-13))
    return out


def bch_suite(form, n_samples=1000, eta=0.02, seed=0):
    """exp(w1) exp(-w2) = h exp(w_bar) round trips and the norm sandwich."""
    form = _form(form)
    rng = np.random.default_rng(seed)
    xs = _random_r(form, rng, 2 * n_samples)
    rt, lo_ratio, hi_ratio, hres = 0.0, math.inf, 0.0, 0.0
    for w1, w2 in zip(xs[:n_samples], xs[n_samples:]):
        w1 = w1 * (eta * rng.uniform() / lc.norm(w1))
        w2 = w2 * (eta * rng.uniform() / lc.norm(w2))
        g = lc.mat_exp(w1) @ lc.mat_exp(-w2)
        h, wbar = lc.bch_factorize(form, g, eta0=0.2)
        rt = max(rt, lc.norm(h @ lc.mat_exp(wbar) - g))
        hres = max(hres, lc.norm(h.T @ form.q_matrix @ h - form.q_matrix))
        ratio = lc.norm(wbar) / lc.norm(w1 - w2)
        lo_ratio, hi_ratio = min(lo_ratio, ratio), max(hi_ratio, ratio)
    return [_le("bch_roundtrip", rt, 1e-9), _le("h_in_H", hres, 1e-9),
            _ge("wbar_lower_ratio", lo_ratio, 0.5), _le("wbar_upper_ratio", hi_ratio, 1.5)]


def obstruction_suite(form="sig22", n=100, seed=0):
    c = nd.obstruction_checks(form, n, seed)
    return [_le("obstruction_invariance", c["invariance"], 1e-12),
            _eq("obstruction_rank", c["rank"], 2),
            _le("obstruction_angle", c["angle"], 1e-8),
            _le("obstruction_witness", c["witness"], 1e-12)]


def all_pass(rows):
    return all(r.passed for r in rows)


# -- finite-set suites ------------------------------------------------------

def random_filtration(rng, n_levels=3, dims=(6, 7, 8)):
    """Nested grids refining a few coordinates by a factor 2 or 4 per level."""
    from .partition_cover import Grid
    from .regularize import Filtration
    e = np.zeros(9, dtype=int)
    levels = [Grid(tuple(int(x) for x in e))]
    for _ in range(n_levels):
        step = np.zeros(9, dtype=int)
        k = rng.integers(1, len(dims) + 1)
        for d in rng.choice(dims, size=k, replace=False):
            step[d] = 64 * rng.integers(1, 3)
        e = e + step
        levels.append(Grid(tuple(int(x) for x in e)))
    return Filtration(levels)


def random_clustered_set(rng, n_max=5000, dims=(6, 7, 8), weighted=False):
    """Points on a fine lattice in a few coordinates, clustered so branching varies."""
    from .partition_cover import PointSet
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(1, 6))
    centres = rng.uniform(0, 1, size=(k, len(dims)))
    spread = rng.uniform(0.01, 0.5, size=k)
    c = rng.integers(0, k, size=n)
    x = centres[c] + spread[c, None] * rng.uniform(-1, 1, size=(n, len(dims)))
    pts = np.full((n, 9), 0.5)
    pts[:, list(dims)] = np.floor(np.mod(x, 1) * 256) / 256
    w = rng.uniform(0.01, 1, size=n) ** 3 if weighted else None
    return PointSet(pts, w)


def regularize_suite(n_sets=100, n_max=5000, c=0.1, seed=0):
    """Exact regularity and the counting and mass bounds over random sets."""
    from .partition_cover import covering_number
    from .regularize import (bourgain_regularize_measure, bourgain_regularize_set,
                             is_regular_measure, is_regular_set, regular_exhaust)
    rng = np.random.default_rng(seed)
    bad = {"set_regular": 0, "set_count": 0, "measure_regular": 0, "measure_mass": 0,
           "exhaust_regular": 0, "exhaust_cover": 0, "exhaust_block_mass": 0}
    for _ in range(n_sets):
        filt = random_filtration(rng)
        a = random_clustered_set(rng, n_max, weighted=bool(rng.integers(0, 2)))
        lam = filt.loss_factor()
        rs = bourgain_regularize_set(a, filt)
        bad["set_regular"] += not is_regular_set(rs.subset, filt, rs.sigma)
        full = covering_number(a, filt.levels[-1])
        bad["set_count"] += covering_number(rs.subset, filt.levels[-1]) < full * lam
        rm = bourgain_regularize_measure(a, filt)
        bad["measure_regular"] += not is_regular_measure(rm.subset, filt, rm.sigma)
        bad["measure_mass"] += bool(a.mass_vector()[rm.indices].sum() < lam * (1 - 1e-12))
        blocks, rep = regular_exhaust(a, filt, c)
        for b, sig in zip(blocks, rep["sigmas"]):
            bad["exhaust_regular"] += not is_regular_measure(a.subset(b), filt, sig)
        bad["exhaust_cover"] += not rep["cover_ok"]
        bad["exhaust_block_mass"] += not rep["block_mass_ok"]
    return [_eq(k, v, 0) for k, v in bad.items()]


def submodular_suite(n_instances=100, n_max=500, seed=0):
    """Both postconditions of the submodular selection on random tube partitions."""
    from .errors import InternalError
    from .partition_cover import PointSet, RTuple, TubePartition
    from .regularize import submodular_select
    rng = np.random.default_rng(seed)
    fails = errors = 0
    for _ in range(n_instances):
        n = int(rng.integers(1, n_max + 1))
        k = int(rng.integers(1, 4))
        pts = rng.uniform(0, 1, size=(n, 9)) ** rng.uniform(1, 4)
        pts = np.floor(pts * 2 ** (k + 2)) / 2 ** (k + 2)
        rts = [RTuple(tuple(sorted(rng.integers(0, 65, size=5)))) for _ in range(2)]
        p, q = TubePartition(k, rts[0]), TubePartition(k, rts[1])
        c = float(rng.uniform(0.05, 0.95))
        try:
            rep = submodular_select(PointSet(pts), p, q, c)
        except InternalError:
            errors += 1
            continue
        fails += not (rep.retained_ok and rep.product_ok)
    return [_eq("submodular_postconditions", fails, 0), _eq("internal_errors", errors, 0)]


def energy_suite(n_sets=50, n_max=2000, seed=0, alphas=(1.0, 2.0, 3.0, 4.5),
                 betas_frac=(0.25, 0.5, 0.9)):
    """Accelerated energy against the double loop, and the Frostman-to-energy bound."""
    from . import energy as en
    from .regularize import bourgain_regularize_measure
    rng = np.random.default_rng(seed)
    worst_rel, violations, checked = 0.0, 0, 0
    for _ in range(n_sets):
        filt = random_filtration(rng)
        f = random_clustered_set(rng, n_max)
        f = bourgain_regularize_measure(f, filt).subset
        f = type(f)(f.points)
        delta = 2.0 ** -int(rng.integers(3, 10))
        for alpha in alphas:
            g = en.energy_all(f, delta, alpha)
            for i in rng.choice(len(f), size=min(5, len(f)), replace=False):
                ref = en.energy_brute(f, delta, alpha, int(i))
                if ref > 0:
                    worst_rel = max(worst_rel, abs(g[i] - ref) / ref)
            c = en.frostman_constant(f, alpha, delta)
            for bf in betas_frac:
                beta = bf * alpha
                bound = en.frostman_to_energy_bound(c, alpha, beta, len(f))
                violations += float(en.energy_all(f, delta, beta).max()) > bound
                checked += 1
    return [_le("energy_vs_bruteforce_rel", worst_rel, 1e-10),
            _eq("frostman_bound_violations", violations, 0),
            _ge("frostman_bound_cases", checked, 1)]


# frozen regression baselines for the non-degeneracy suite (grid step 1/8)
NONDEG_SUP = {
    lc.SIG22: {"P1": 65536.0, "P2": 2260992.0, "R1": 17280.0, "R2": 17280.0,
              "S1": 11.313708498984791, "S2": 7.002014415265229,
              "L1": 11.313708498984793, "L2": 7.002014415265227},
    lc.SIG31: {"P1": 65536.0, "P2": 2260992.0, "R1": 17280.0, "R2": 17280.0,
              "S1": 22.62741699796957, "S2": 6.801433675155129,
              "L1": 22.627416997969554, "L2": 6.801433675155122},
}
WRONSKIAN_MIN = {lc.SIG22: 158018273279999.84, lc.SIG31: 8.090535591936013e16}
ANGLE_A = 2.5e4


def nondeg_suite(form, step=1.0 / 8, n_angle=500, wronskian_n=33, seed=0, rel=1e-6):
    """P1 on the diagonal, positive grid sups, the P1 / angle^2 ratio, the
    Wronskian minimum and (Sig22) the obstruction witnesses."""
    form = _form(form)
    rng = np.random.default_rng(seed)
    out = []
    diag = max(float(nd.p1(form, nd.UPair(r, s, r, s))) for r, s in rng.uniform(-1, 1, (100, 2)))
    out.append(_le("P1_diagonal", diag, 1e-12))
    scan = nd.nondeg_scan(form, step=step)
    base = NONDEG_SUP[form.tag]
    for k in ("P1", "R1", "S1", "S2"):
        out.append(_ge(f"sup_{k}", scan.sup[k], 1e-6))
        out.append(_le(f"sup_{k}_regression", abs(scan.sup[k] - base[k]) / base[k], rel))
    ratios = []
    for u in rng.uniform(-1, 1, size=(n_angle, 4)):
        p, d = nd.angle_ratio(form, nd.UPair(*u))
        ratios.append(p / d)
    out.append(_ge("angle_ratio_min", min(ratios), 1.0 / ANGLE_A))
    out.append(_le("angle_ratio_max", max(ratios), ANGLE_A))
    w = nd.wronskian_grid(form, wronskian_n)
    out.append(SuiteCheck("wronskian_min_positive", float(w.min()), 0.0, bool(w.min() > 0), ">"))
    out.append(_le("wronskian_min_regression",
                   abs(w.min() - WRONSKIAN_MIN[form.tag]) / WRONSKIAN_MIN[form.tag], rel))
    if form.tag == lc.SIG22:
        out.extend(obstruction_suite(form))
    return out
