"""Acceptance criteria 1 to 11, one PASS/FAIL line each."""

import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from rproj import cli, experiments as ex, fractal_gen as fg, ledger, suites
from rproj.partition_cover import PointSet


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def failing(rows):
    return [r.name for r in rows if not r.passed]


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def cantor():
    return fg.gen_cantor(4.5, 7, seed=0, window=4)


def test_criterion_1_representation():
    rows, dt = timed(lambda: suites.rep_suite("sig22") + suites.rep_suite("sig31"))
    bad = failing(rows)
    assert report(1, not bad and dt < 5, f"{len(rows)} checks, failures={bad}, {dt:.2f}s")


def test_criterion_2_symmetric_pair():
    rows, dt = timed(lambda: suites.symmetric_pair_suite("sig22")
                     + suites.symmetric_pair_suite("sig31"))
    bad = failing(rows)
    assert report(2, not bad and dt < 5, f"{len(rows)} checks, failures={bad}, {dt:.2f}s")


def test_criterion_3_bch():
    rows, dt = timed(lambda: suites.bch_suite("sig22") + suites.bch_suite("sig31"))
    bad = failing(rows)
    assert report(3, not bad, f"{len(rows)} checks, failures={bad}, {dt:.2f}s")


def test_criterion_4_regularization():
    rows, dt = timed(lambda: suites.regularize_suite(n_sets=100, n_max=5000))
    bad = failing(rows)
    assert report(4, not bad and dt < 60, f"{len(rows)} checks, failures={bad}, {dt:.1f}s")


def test_criterion_5_submodular():
    rows, dt = timed(lambda: suites.submodular_suite(n_instances=100, n_max=500))
    bad = failing(rows)
    assert report(5, not bad, f"{len(rows)} checks, failures={bad}, {dt:.2f}s")


def test_criterion_6_energy():
    rows, dt = timed(lambda: suites.energy_suite(n_sets=50, n_max=2000))
    bad = failing(rows)
    vals = {r.name: r.value for r in rows}
    assert report(6, not bad, f"failures={bad}, {vals}, {dt:.1f}s")


def test_criterion_7_nondegeneracy():
    rows, dt = timed(lambda: suites.nondeg_suite("sig22") + suites.nondeg_suite("sig31"))
    bad = failing(rows)
    assert report(7, not bad and dt < 120, f"{len(rows)} checks, failures={bad}, {dt:.1f}s")


def test_criterion_8_projection_contrast(cantor):
    t0 = time.perf_counter()
    sub = ex.exp_subcritical(cantor, "sig22", lam=1, delta=2 ** -7, eps=0.1, n_samples=400)
    obs = fg.gen_obstructed("sig22", 2.5, 7, seed=0)
    expo, _ = ex.projected_covering_exponent(obs, "sig22", lam=1, levels=range(3, 8),
                                             n_samples=20)
    # the obstructed set still meets the delta^(m/9) bound: the collapse is invisible to it
    obs_sub = ex.exp_subcritical(obs, "sig22", lam=1, delta=2 ** -7, eps=0.1, n_samples=40)
    dt = time.perf_counter() - t0
    ok = (sub.exceptional_fraction <= 0.1 and expo <= 2.2
          and obs_sub.exceptional_fraction <= 0.1 and dt < 600)
    assert report(8, ok, f"exceptional={sub.exceptional_fraction:.3f} (|F|={len(cantor)}), "
                  f"obstructed exponent={expo:.3f}, obstructed exceptional="
                  f"{obs_sub.exceptional_fraction:.3f}, {dt:.1f}s")


def test_criterion_9_energy_improvement(cantor):
    reps = ex.energy_trend(cantor, [1.0, 1.5, 2.0], alpha=1.0, delta=2 ** -20, n_samples=200,
                           n_points=50)
    med = [r.fitted["median_ratio"] for r in reps]
    decreasing = all(a > b for a, b in zip(med, med[1:]))
    w = np.full(9, 0.25)
    e = np.zeros(9)
    e[0] = 0.5
    pair = PointSet(np.array([w, w + e]))
    errs = []
    for alpha, ell in ((1.0, 0.5), (2.0, 1.0), (4.5, 0.25)):
        r = ex.exp_energy_improvement(pair, alpha=alpha, delta=2 ** -20, ell=ell,
                                      u_samples=[(0.0, 0.0)], n_points=2, strict=False)
        pre, post = ex.two_point_oracle(alpha, 2 ** -20, ell, r.fitted["delta_new"])
        errs.append(abs(r.fitted["upsilon"] - pre) / pre)
        errs.append(abs(r.records[0]["max_ratio"] * r.fitted["upsilon"] - post) / post)
    ok = decreasing and max(errs) <= 1e-9
    assert report(9, ok, f"medians={[round(m, 5) for m in med]}, oracle err={max(errs):.1e}")


def test_criterion_10_ledger():
    rep, dt = timed(lambda: ledger.run(Fraction(4, 5), Fraction(4, 5), "1e6"))
    c = {k.name: k.passed for k in rep.checks}
    theta = Fraction(1, 10000)
    ok = (rep.theta == theta and rep.p_fin == 531353520
          and 9 - theta <= rep.alpha_pfin < 9
          and c["alpha_pfin_lower"] and c["alpha_pfin_upper"]
          and c["log_roundtrip"] and c["delta_pfin_le_delta_fin"] and c["chain_final"]
          and dt < 1)
    assert report(10, ok, f"theta={rep.theta}, p_fin={rep.p_fin}, alpha={rep.alpha_pfin}, "
                  f"{dt:.2f}s")


def _run_twice(tmp_path, argv):
    out = []
    for k in range(2):
        d = tmp_path / f"{argv[0]}-{k}"
        code = cli.main(argv + ["--outdir", str(d)])
        (run,) = os.listdir(d)
        out.append((code, (d / run / "summary.json").read_bytes()))
    return out[0][0] in (0, 1) and out[0] == out[1]


def test_criterion_11_determinism(tmp_path):
    cfg = tmp_path / "p.json"
    cfg.write_text('{"set": {"generator": "cantor", "alpha": 3.0, "depth": 4, "seed": 5},'
                   ' "delta": 4, "n_samples": 16}')
    runs = {
        "rep-check": ["rep-check", "--form", "sig31", "--n-samples", "100"],
        "project-exp": ["project-exp", "--config", str(cfg), "--seed", "3"],
        "ledger": ["ledger", "--eps0", "0.8", "--kappa1", "0.8", "--logR", "1e6"],
        "gen": ["gen", "--generator", "cantor", "--alpha", "2", "--depth", "3", "--seed", "4"],
    }
    res = {k: _run_twice(tmp_path, v) for k, v in runs.items()}
    assert report(11, all(res.values()), f"identical={res}")
