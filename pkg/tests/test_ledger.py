import json
import time
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import iv

from rproj import ledger as lg
from rproj.errors import PrecisionError


@pytest.fixture(scope="module")
def rep08():
    return lg.run(0.8, 0.8, "1e6")


def checks(rep):
    return {c.name: c for c in rep.checks}


def test_headline_constants(rep08):
    assert rep08.theta == Fraction(1, 10000)
    assert rep08.p_fin == 531353520
    assert rep08.p_fin == 6480 * 81999
    assert rep08.alpha_step == Fraction(1, 10000) / 6480
    assert 9 - rep08.theta <= rep08.alpha_pfin < 9
    assert rep08.alpha_pfin_minus1 < 9 - rep08.theta


def test_alpha_pfin_hits_lower_end(rep08):
    # 6480 (9 - eps0)/theta is an integer here, so alpha_pfin = 9 - theta exactly
    assert rep08.alpha_pfin == 9 - rep08.theta
    c = checks(rep08)
    assert c["alpha_pfin_lower"].passed and c["alpha_pfin_upper"].passed
    assert not c["alpha_pfin_strict_variant"].passed


def test_log_epsilon_oracle(rep08):
    with mpmath.workprec(400):
        ref = (-10 * mpmath.log(10) + 531353520 * mpmath.log(mpmath.mpf(3) / 4)
               + mpmath.log(mpmath.mpf(1) / 10000))
        lo = rep08.logs["epsilon"].ln.a
        hi = rep08.logs["epsilon"].ln.b
        assert mpmath.mpf(lo) <= ref <= mpmath.mpf(hi)
    assert float(ref) == pytest.approx(-1.5286e8, rel=1e-4)


def test_n1_and_d_intervals(rep08):
    assert rep08.n1["exact"] is None
    with mpmath.workprec(rep08.prec):
        ln_x = mpmath.log(12.5) - rep08.logs["epsilon"].mid()
        tol = mpmath.mpf(2) ** (40 - rep08.prec)
        assert abs(rep08.n1["ln_lo"] - ln_x) <= tol * ln_x
        lo, hi = rep08.d_bounds
        # q^p is negligible, so d is 4X up to the additive p
        assert lo - tol * ln_x <= mpmath.log(4) + ln_x <= hi + tol * ln_x
        assert hi - lo < 1e-30


def test_roundtrips(rep08):
    assert all(v.roundtrip_ok() for v in rep08.logs.values())
    assert checks(rep08)["log_roundtrip"].passed


def test_chain_and_steps(rep08):
    c = checks(rep08)
    for name in ("chain_final", "delta_pfin_le_delta_fin", "chain_sum_bound",
                 "chain_e8N1ell_delta0", "telescoping", "number_of_steps", "scale_order",
                 "phibar_lower_bound", "pfin_le_1e6_over_theta"):
        assert c[name].passed, name
    assert c["chain_final"].margin_lo == Fraction(10 ** 12) - (Fraction(1, 10000) * (2 * 531353520 + 8) + 200)


def test_scale_consequences_pass_literal_fails(rep08):
    c = checks(rep08)
    for name in ("beta_pow_e2_le_e20ell", "e_theta_ell_le_beta29", "beta29d_ge_delta0_eps0_6",
                 "delta0_eps0_2_le_beta29", "R_ge_eta_pow_e1"):
        assert c[name].passed, name
    lit = c["much_smaller_scale"]
    assert not lit.passed
    assert float(lit.margin_hi) == pytest.approx(-1.5286e8, rel=1e-3)


def test_r_dependence(rep08):
    c = checks(rep08)
    assert not c["R_large_enough"].passed
    assert c["delta0_lt_1"].passed
    closed = lg.closed_form_min_ln_ln_R(rep08.inp, rep08)
    assert float(rep08.min_log_R.mid()) == pytest.approx(float(closed), rel=1e-12)
    assert float(closed) == pytest.approx(152860938.627, rel=1e-10)
    big = lg.run(0.8, 0.8, mpmath.nstr(mpmath.exp(closed + 1), 30))
    assert checks(big)["R_large_enough"].passed


def test_r_equal_one_fails():
    rep = lg.run(0.8, 0.8, "0")
    c = checks(rep)
    assert not c["R_large_enough"].passed and not c["delta0_lt_1"].passed
    assert c["R_large_enough"].margin_hi == -mpmath.inf


def test_min_log_r_monotone_in_eps0(rep08):
    low = lg.run(0.5, 0.8, "1e6")
    assert low.min_log_R.mid() >= rep08.min_log_R.mid()


def test_runtime():
    t0 = time.perf_counter()
    lg.run(0.8, 0.8, "1e6")
    assert time.perf_counter() - t0 < 1.0


def test_certified_ceil():
    with lg._precision(128):
        assert lg.certified_ceil(iv.log(iv.mpf(2.5)), 128)["exact"] == 3
        with pytest.raises(PrecisionError):
            lg.certified_ceil(iv.mpf([mpmath.log(2.9), mpmath.log(3.1)]), 128)
        big = lg.certified_ceil(iv.mpf(10 ** 6), 128)
        assert big["exact"] is None and big["ln_hi"] >= big["ln_lo"]


def test_low_precision_retries():
    rep = lg.derive_constants(lg.LedgerInput(0.8, 0.8), prec=16)
    assert rep.prec >= 16 and rep.p_fin == 531353520


def test_input_validation():
    with pytest.raises(ValueError):
        lg.LedgerInput(1.2, 0.5)
    with pytest.raises(ValueError):
        lg.LedgerInput(0.5, 0.5, a=1)
    with pytest.raises(ValueError):
        lg.LedgerInput(0.5, 0.5, log_R="-1")


def test_json(rep08):
    d = json.loads(rep08.to_json())
    assert d["p_fin"] == 531353520 and d["theta"] == "1/10000"
    assert d["pass"] is False
    assert {c["name"] for c in d["checks"]} == set(checks(rep08))


rationals = st.fractions(min_value=Fraction(1, 20), max_value=Fraction(19, 20), max_denominator=100)


@settings(max_examples=25)
@given(eps0=rationals, kappa1=rationals)
def test_progression_properties(eps0, kappa1):
    rep = lg.derive_constants(lg.LedgerInput(eps0, kappa1))
    theta = (min(eps0, kappa1) / 80) ** 2
    assert rep.theta == theta
    assert 9 - theta <= rep.alpha_pfin < 9
    assert rep.alpha_pfin_minus1 < 9 - theta
    assert rep.alpha(1) - rep.alpha(0) == theta / 6480
    assert all(v.roundtrip_ok() for v in rep.logs.values())
