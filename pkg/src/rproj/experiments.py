"""
Monte-Carlo drivers: projection, multislicing, slab and energy-improvement
experiments on finite sets, sampling u = u_{r,s} uniformly on [-1, 1]^2.

Each driver returns an ExperimentReport.  The theorems quantify over all
large subsets A'; here A' ranges over F and a few adversarial subsets, so
reported exceptional fractions are lower bounds.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
import csv
import io
import json
import math
import time

import numpy as np
from scipy.spatial import cKDTree

from . import lie_core as lc
from . import weight_rep as wr
from .energy import energy_all, frostman_exponent
from .errors import ConfigError, PreconditionError
from .partition_cover import (Grid, PointSet, RTuple, TubePartition, atom_keys, covering_number,
                              unique_rows)
from .regularize import Filtration, bourgain_regularize_set

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PhiValue:
    alpha: float
    phi_hat: float
    phi: float


def phi(alpha) -> PhiValue:
    """phi_hat = min(alpha, 1) - alpha/9 and phi = phi_hat/36 (exact for rational input)."""
    a = Fraction(alpha) if not isinstance(alpha, float) else Fraction(alpha).limit_denominator(10 ** 12)
    if not 0 < a <= 9:
        raise ValueError("alpha must lie in (0, 9]")
    ph = min(a, Fraction(1)) - a / 9
    return PhiValue(float(alpha), float(ph), float(ph / 36))


@dataclass
class ExperimentReport:
    name: str
    config: dict
    records: list
    exceptional_fraction: float
    fitted: dict = field(default_factory=dict)
    runtime: float = 0.0

    def summary(self):
        """JSON-ready dict without the runtime (kept out for reproducibility)."""
        d = asdict(self)
        d.pop("runtime")
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self):
        return json.dumps(_clean(self.summary()), sort_keys=True, indent=1)

    def detail_csv(self):
        if not self.records:
            return ""
        keys = sorted({k for r in self.records for k in r})
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow({k: _fmt(r.get(k)) for k in keys})
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return " ".join(str(_fmt(x)) for x in v)
    return v


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _form(form):
    return lc.get_form(form) if isinstance(form, str) else form


def sample_u(n, seed=0):
    """n seeded (r, s) pairs uniform on [-1, 1]^2."""
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, 2))


def _pmap(fn, items, threads=1):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def cube_count(pts, n):
    """Number of 2^-n cubes met by the rows of pts (any dimension)."""
    return len(unique_rows(atom_keys(Grid((64 * n,) * pts.shape[1]), pts)))


def brute_cube_count(pts, delta):
    """Definition-level oracle: distinct floor(x / delta) tuples."""
    return len({tuple(math.floor(c / delta) for c in row) for row in pts})


def _log2_inv(delta):
    n = -math.log2(delta)
    if abs(n - round(n)) > 1e-12 or n < 1:
        raise ConfigError(f"scale {delta} is not 2^-n with n >= 1")
    return int(round(n))


def adversarial_subsets(f, n_cells, k, seed=0):
    """F, the densest half (by 2^-n_cells cube mass) and k - 1 random halves; index arrays."""
    pts = f.points if isinstance(f, PointSet) else f
    out = [("full", np.arange(len(pts)))]
    if k <= 0 or len(pts) < 2:
        return out
    keys = atom_keys(Grid((64 * n_cells,) * pts.shape[1]), pts)
    _, lab = unique_rows(keys, return_inverse=True)
    cnt = np.bincount(lab)
    order = np.argsort(-cnt, kind="stable")
    cum = np.cumsum(cnt[order])
    ncell = int(np.searchsorted(cum, len(pts) / 2.0)) + 1
    out.append(("dense", np.nonzero(np.isin(lab, order[:ncell]))[0]))
    rng = np.random.default_rng(seed)
    half = (len(pts) + 1) // 2
    for j in range(k - 1):
        out.append((f"half{j}", np.sort(rng.choice(len(pts), half, replace=False))))
    return out


def projected_counts(form, pts, lam, r, s, n):
    rows = np.nonzero(wr.WEIGHTS >= lam)[0]
    proj = pts @ wr.ad_u(form, r, s)[rows].T
    return cube_count(proj, n)


def exp_subcritical(f, form="sig22", lam=1, delta=2 ** -7, eps=0.1, n_samples=100,
                    adversarial_k=2, slack_exponent=None, seed=0, threads=1, u_samples=None):
    """Projection counts |pi^(lam)_u(A')|_delta against slack * |F|_delta^(m/9).

    slack = delta^slack_exponent (default eps).
    """
    t0 = time.perf_counter()
    form = _form(form)
    if lam not in (2, 1, 0, -1):
        raise ConfigError("lam must be one of 2, 1, 0, -1")
    n = _log2_inv(delta)
    f = f if isinstance(f, PointSet) else PointSet(f)
    pts = f.points
    m = wr.FLAG_DIM[lam]
    sl = eps if slack_exponent is None else slack_exponent
    base = cube_count(pts, n)
    thresh = delta ** sl * base ** (m / 9.0)
    subsets = adversarial_subsets(f, max(1, n // 2), adversarial_k, seed + 1)
    us = sample_u(n_samples, seed) if u_samples is None else np.atleast_2d(u_samples)

    def one(rs):
        r, s = rs
        counts = {name: projected_counts(form, pts[idx], lam, r, s, n) for name, idx in subsets}
        worst = min(counts.values())
        return {"r": float(r), "s": float(s), **{f"count_{k}": v for k, v in counts.items()},
                "threshold": thresh, "pass": bool(worst >= thresh)}

    recs = _pmap(one, list(map(tuple, us)), threads)
    exc = float(np.mean([not r["pass"] for r in recs]))
    # reported constant: smallest slack exponent making every sample pass
    worst = min(min(v for k, v in r.items() if k.startswith("count_")) for r in recs)
    need = math.log(base ** (m / 9.0) / worst) / math.log(1 / delta) if worst > 0 else math.inf
    fitted = {"covering_F": base, "m": m, "required_slack_exponent": max(0.0, need),
              "M_report": max(0.0, need) / eps if eps > 0 else None}
    cfg = {"form": form.tag, "lam": lam, "delta": delta, "eps": eps, "n_samples": len(us),
           "adversarial_k": adversarial_k, "slack_exponent": sl, "seed": seed, "n_points": len(pts)}
    return ExperimentReport("subcritical", cfg, recs, exc, fitted, time.perf_counter() - t0)


def projected_covering_exponent(f, form="sig22", lam=1, levels=range(4, 10), n_samples=20,
                                seed=0, u_samples=None):
    """Median over u of the slope of log2 |pi^(lam)_u(F)|_{2^-n} against n."""
    form = _form(form)
    pts = f.points if isinstance(f, PointSet) else np.asarray(f)
    us = sample_u(n_samples, seed) if u_samples is None else np.atleast_2d(u_samples)
    levels = list(levels)
    slopes = []
    for r, s in us:
        rows = np.nonzero(wr.WEIGHTS >= lam)[0]
        proj = pts @ wr.ad_u(form, r, s)[rows].T
        c = [math.log2(cube_count(proj, n)) for n in levels]
        slopes.append(float(np.polyfit(levels, c, 1)[0]))
    return float(np.median(slopes)), slopes


def exp_optimal_hw(f, rho=2 ** -8, c=0.05, n_samples=100, form="sig22", alpha_hat=None,
                   rho_list=None, seed=0, threads=1, u_samples=None):
    """Top-weight projection counts against rho^c * rho^(-min(alpha_hat, 1))."""
    t0 = time.perf_counter()
    form = _form(form)
    n = _log2_inv(rho)
    f = f if isinstance(f, PointSet) else PointSet(f)
    pts = f.points
    if alpha_hat is None:
        alpha_hat = frostman_exponent(f, rho, max_centers=2000, seed=seed)
    target = rho ** c * rho ** (-min(alpha_hat, 1.0))
    us = sample_u(n_samples, seed) if u_samples is None else np.atleast_2d(u_samples)
    levels = [_log2_inv(x) for x in (rho_list or [2.0 ** -k for k in range(max(1, n - 4), n + 1)])]

    def one(rs):
        r, s = rs
        col = pts @ wr.ad_u(form, r, s)[8]
        cnt = cube_count(col[:, None], n)
        lc_ = [math.log2(cube_count(col[:, None], k)) for k in levels]
        slope = float(np.polyfit(levels, lc_, 1)[0]) if len(levels) > 1 else float("nan")
        return {"r": float(r), "s": float(s), "count": cnt, "threshold": target,
                "rate": slope, "pass": bool(cnt >= target)}

    recs = _pmap(one, list(map(tuple, us)), threads)
    exc = float(np.mean([not r["pass"] for r in recs]))
    fitted = {"alpha_hat": alpha_hat, "median_rate": float(np.median([r["rate"] for r in recs])),
              "target_rate": min(alpha_hat, 1.0)}
    cfg = {"form": form.tag, "rho": rho, "c": c, "n_samples": len(us), "seed": seed,
           "n_points": len(pts), "levels": levels}
    return ExperimentReport("optimal_hw", cfg, recs, exc, fitted, time.perf_counter() - t0)


def tube_count(pts, n, rt):
    return covering_number(pts, TubePartition(n, rt))


def exp_multislice(f, rt, rho=2 ** -8, eps=0.01, n_samples=100, form="sig22", alpha_hat=None,
                   slack_exponent=None, seed=0, threads=1, u_samples=None):
    """|u.F|_{D_rho^r} against vol(T)^(-alpha/9) (baseline) and the improved bound."""
    t0 = time.perf_counter()
    form = _form(form)
    rt = rt if isinstance(rt, RTuple) else RTuple.of(rt)
    n = _log2_inv(rho)
    gap = (rt.r64[4] - rt.r64[3]) / 64.0
    if gap > 0 and not eps <= gap / 10.0:
        raise ConfigError(f"eps = {eps} is not small compared with r5 - r4 = {gap}")
    f = f if isinstance(f, PointSet) else PointSet(f)
    pts = f.points
    if alpha_hat is None:
        alpha_hat = frostman_exponent(f, rho, max_centers=2000, seed=seed)
    top_only = rt.r64[0] == rt.r64[3]
    ph = phi(min(max(alpha_hat, 1e-9), 9.0))
    rate = ph.phi_hat if top_only else ph.phi
    log2_vol = float(TubePartition(n, rt).log2_volume())
    sl = eps if slack_exponent is None else slack_exponent
    base = 2.0 ** (-log2_vol * alpha_hat / 9.0) * rho ** sl
    improved = base * rho ** (-gap * rate)
    us = sample_u(n_samples, seed) if u_samples is None else np.atleast_2d(u_samples)

    def one(rs):
        r, s = rs
        cnt = tube_count(pts @ wr.ad_u(form, r, s).T, n, rt)
        return {"r": float(r), "s": float(s), "count": cnt, "baseline": base, "improved": improved,
                "pass_baseline": bool(cnt >= base), "pass_improved": bool(cnt >= improved)}

    recs = _pmap(one, list(map(tuple, us)), threads)
    exc = float(np.mean([not r["pass_baseline"] for r in recs]))
    fitted = {"alpha_hat": alpha_hat, "log2_vol": log2_vol, "rate_used": rate,
              "rate_kind": "phi_hat" if top_only else "phi",
              "exceptional_improved": float(np.mean([not r["pass_improved"] for r in recs]))}
    cfg = {"form": form.tag, "rt": list(rt.floats()), "rho": rho, "eps": eps,
           "n_samples": len(us), "seed": seed, "n_points": len(pts)}
    return ExperimentReport("multislice", cfg, recs, exc, fitted, time.perf_counter() - t0)


def rt_filtration(rt, n):
    """Cube partitions at the distinct scales rho^{r_i} (coarse to fine) plus the unit cube."""
    exps = sorted(set([0] + [n * v for v in rt.r64]))
    if any((b - a) % 64 for a, b in zip(exps, exps[1:])):
        raise ConfigError("the r-filtration is not nested; choose n * r_i integral")
    return Filtration([Grid((e,) * 9) for e in exps])


def exp_slab_subcritical(f, rt, rho=2 ** -8, iota=0.05, n_samples=100, form="sig22",
                         regularize=True, seed=0, threads=1, u_samples=None):
    """|u.A'|_{D_rho^r} against rho^iota * prod_i |A'|_{rho^{r_i}}^{d_i/9}, A' regularized."""
    t0 = time.perf_counter()
    form = _form(form)
    rt = rt if isinstance(rt, RTuple) else RTuple.of(rt)
    n = _log2_inv(rho)
    f = f if isinstance(f, PointSet) else PointSet(f)
    sigma = None
    if regularize:
        res = bourgain_regularize_set(f, rt_filtration(rt, n))
        a, sigma = res.subset, list(res.sigma)
    else:
        a = f
    pts = a.points
    log2_prod = 0.0
    for m, r in zip(wr.MULTIPLICITY, rt.r64):
        c = covering_number(pts, Grid((n * r,) * 9))
        log2_prod += m / 9.0 * math.log2(c)
    thresh = rho ** iota * 2.0 ** log2_prod
    us = sample_u(n_samples, seed) if u_samples is None else np.atleast_2d(u_samples)

    def one(rs):
        r, s = rs
        cnt = tube_count(pts @ wr.ad_u(form, r, s).T, n, rt)
        return {"r": float(r), "s": float(s), "count": cnt, "product": 2.0 ** log2_prod,
                "threshold": thresh, "pass": bool(cnt >= thresh)}

    recs = _pmap(one, list(map(tuple, us)), threads)
    exc = float(np.mean([not r["pass"] for r in recs]))
    worst = min(r["count"] for r in recs)
    need = (log2_prod - math.log2(worst)) / n
    fitted = {"log2_product": log2_prod, "sigma": sigma, "n_regularized": len(pts),
              "M2_report": max(0.0, need) / iota if iota > 0 else None}
    cfg = {"form": form.tag, "rt": list(rt.floats()), "rho": rho, "iota": iota,
           "n_samples": len(us), "seed": seed, "n_points": len(f)}
    return ExperimentReport("slab_subcritical", cfg, recs, exc, fitted, time.perf_counter() - t0)


# -- energy improvement -------------------------------------------------------

def flowed(form, pts, ell, r, s):
    """Rows a_ell u.w for the rows w of pts."""
    m = wr.ad_a(form, ell) @ wr.ad_u(form, r, s)
    return pts @ m.T


def post_energy(y, idx, ell, delta_new, alpha):
    """G^(alpha)_{F_u(w), delta'}(y_w) for the rows idx of the flowed set y.

    F_u(w) keeps the flowed points within sup-distance e^(-2 ell) of y_w.
    """
    tree = cKDTree(y)
    rad = math.exp(-2.0 * ell)
    nbrs = tree.query_ball_point(y[idx], rad * (1 + 1e-12), p=np.inf)
    out = np.empty(len(idx))
    sizes = np.empty(len(idx), dtype=np.int64)
    for k, (i, nb) in enumerate(zip(idx, nbrs)):
        nb = np.asarray(nb)
        nb = nb[nb != i]
        sizes[k] = len(nb)
        if len(nb) == 0:
            out[k] = 0.0
            continue
        d = np.max(np.abs(y[nb] - y[i]), axis=1)
        out[k] = float(np.sum(np.maximum(d, delta_new) ** (-alpha)))
    return out, sizes


def energy_scales(n_points, alpha, delta, ell):
    delta_new = math.exp(2 * ell) * max(delta, n_points ** (-1.0 / alpha))
    return delta_new, delta_new < math.exp(-2 * ell)


def exp_energy_improvement(f, alpha=1.0, delta=2 ** -20, ell=1.0, n_samples=100, form="sig22",
                           n_points=50, slack_exponent=0.0, strict=True, seed=0, threads=1,
                           u_samples=None, upsilon=None):
    """Post-flow energies G_{F_u(w), delta'}(a_ell u.w) relative to Upsilon = max_w G_{F,delta}(w).

    `ratio` is post / Upsilon; a sample u passes when every sampled w has
    post <= e^(-phi(alpha) ell) delta^(-slack_exponent) Upsilon.
    """
    t0 = time.perf_counter()
    form = _form(form)
    f = f if isinstance(f, PointSet) else PointSet(f)
    pts = f.points
    delta_new, ok = energy_scales(len(pts), alpha, delta, ell)
    if strict and not ok:
        raise ConfigError(f"scale precondition fails: delta' = {delta_new:.4g} >= e^(-2 ell) = "
                          f"{math.exp(-2 * ell):.4g}")
    if upsilon is None:
        upsilon = float(energy_all(pts, delta, alpha).max())
    rng = np.random.default_rng(seed + 7)
    widx = np.sort(rng.choice(len(pts), min(n_points, len(pts)), replace=False))
    us = sample_u(n_samples, seed) if u_samples is None else np.atleast_2d(u_samples)
    bound = math.exp(-phi(alpha).phi * ell) * delta ** (-slack_exponent) * upsilon

    def one(rs):
        r, s = rs
        y = flowed(form, pts, ell, r, s)
        post, sizes = post_energy(y, widx, ell, delta_new, alpha)
        return {"r": float(r), "s": float(s), "median_ratio": float(np.median(post / upsilon)),
                "max_ratio": float(np.max(post / upsilon)), "mean_neighbours": float(sizes.mean()),
                "pass": bool(np.all(post <= bound)), "ratios": (post / upsilon).tolist()}

    recs = _pmap(one, list(map(tuple, us)), threads)
    allr = np.concatenate([r.pop("ratios") for r in recs])
    exc = float(np.mean([not r["pass"] for r in recs]))
    fitted = {"upsilon": upsilon, "delta_new": delta_new, "median_ratio": float(np.median(allr)),
              "mean_ratio": float(np.mean(allr)),
              "bound_ratio": bound / upsilon, "precondition": ok}
    cfg = {"form": form.tag, "alpha": alpha, "delta": delta, "ell": ell, "n_samples": len(us),
           "n_points": int(len(widx)), "seed": seed, "set_size": len(pts)}
    return ExperimentReport("energy_improvement", cfg, recs, exc, fitted, time.perf_counter() - t0)


def two_point_oracle(alpha, delta, ell, delta_new):
    """Closed form for F = {w, w + e/2}, e the weight -2 unit vector, u = id:
    pre = max(1/2, delta)^-alpha and post = max(e^(-2 ell)/2, delta')^-alpha."""
    pre = max(0.5, delta) ** (-alpha)
    post = max(0.5 * math.exp(-2 * ell), delta_new) ** (-alpha)
    return pre, post


def energy_trend(f, ells, **kw):
    """Median post/pre ratio for each ell (same u and w samples)."""
    out = []
    ups = None
    for ell in ells:
        rep = exp_energy_improvement(f, ell=ell, upsilon=ups, **kw)
        ups = rep.fitted["upsilon"]
        out.append(rep)
    return out


def check_precondition_ell(n_points, alpha, delta, ell):
    dn, ok = energy_scales(n_points, alpha, delta, ell)
    if not ok:
        raise PreconditionError(f"delta' = {dn} too large for ell = {ell}")
    return dn
