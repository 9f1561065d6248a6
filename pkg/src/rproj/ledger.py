"""
Bootstrap constant ledger: theta, p_fin, epsilon, N_j, d, beta, eta, ell,
delta_0, delta_fin and the inequality chains that close the
dimension-improvement induction.

Exact rationals where possible, otherwise natural logs held as mpmath
intervals so that every sign is certified.  Scale-dependent quantities are
normalised by T = t/(M a) = ln(R)/a, which turns most inequalities into
statements that do not depend on R at all.
"""

from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
import json
import math

import mpmath
from mpmath import iv

from .errors import PrecisionError

BASE_PREC = 256
MAX_PREC = 8192
ROUNDTRIP_BITS = 30


@contextmanager
def _precision(prec):
    old = iv.prec, mpmath.mp.prec
    iv.prec = mpmath.mp.prec = prec
    try:
        yield
    finally:
        iv.prec, mpmath.mp.prec = old


def _q(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def _ceil(fr: Fraction) -> int:
    return -((-fr.numerator) // fr.denominator)


def _iv(fr):
    if isinstance(fr, Fraction):
        return iv.mpf(fr.numerator) / fr.denominator
    return iv.mpf(fr)


def _lo(x):
    return mpmath.mpf(x.a)


def _hi(x):
    return mpmath.mpf(x.b)


@dataclass
class LedgerInput:
    eps0: Fraction
    kappa1: Fraction
    log_R: str = "1e6"          # ln R, any mpmath-parsable string
    a: Fraction = Fraction(2)
    c: Fraction = Fraction(2)
    D: Fraction = Fraction(3)
    e1: Fraction = Fraction(2)
    e2: Fraction = Fraction(2)
    m: Fraction = Fraction(2)

    def __post_init__(self):
        for k in ("eps0", "kappa1", "a", "c", "D", "e1", "e2", "m"):
            setattr(self, k, _q(getattr(self, k)))
        self.log_R = str(self.log_R)
        if not (0 < self.eps0 < 1 and 0 < self.kappa1 < 1):
            raise ValueError("eps0 and kappa1 must lie in (0, 1)")
        if min(self.a, self.c, self.D, self.e1, self.e2, self.m) <= 1:
            raise ValueError("structural constants must exceed 1")
        if mpmath.mpf(self.log_R) < 0:
            raise ValueError("log_R must be >= 0 (R >= 1)")

    @property
    def M(self) -> Fraction:
        return self.m + self.c * self.D


def _log_logR(inp):
    lr = mpmath.mpf(inp.log_R)
    return iv.mpf(-mpmath.inf) if lr == 0 else iv.log(iv.mpf(inp.log_R))


@dataclass
class LogValue:
    """A positive quantity stored by its natural log (an interval)."""
    ln: object
    prec: int = BASE_PREC

    def mid(self):
        # evaluated at the precision the interval was built with
        with _precision(max(self.prec, iv.prec)):
            return (_lo(self.ln) + _hi(self.ln)) / 2

    def decimal(self):
        """(mantissa in [1, 10), exponent k) of the midpoint."""
        with _precision(max(self.prec, iv.prec)):
            x = self.mid()
            if not mpmath.isfinite(x):
                return None, None
            l10 = x / mpmath.log(10)
            k = int(mpmath.floor(l10))
            return mpmath.power(10, l10 - k), k

    def roundtrip_ok(self, bits=ROUNDTRIP_BITS):
        with _precision(max(self.prec, iv.prec)):
            m, k = self.decimal()
            if m is None:
                return True
            back = mpmath.log(m) + k * mpmath.log(10)
            x = self.mid()
            return abs(back - x) <= max(abs(x), 1) * mpmath.mpf(2) ** (-bits)

    def to_json(self):
        m, k = self.decimal()
        return {"ln_lo": mpmath.nstr(_lo(self.ln), 20), "ln_hi": mpmath.nstr(_hi(self.ln), 20),
                "mantissa": None if m is None else mpmath.nstr(m, 12), "exp10": k}


@dataclass
class Check:
    name: str
    kind: str               # exact | scale-free | R-dependent | structural
    passed: bool
    margin_lo: object       # log-ratio (or exact difference) lower bound
    margin_hi: object
    note: str = ""

    def to_json(self):
        f = (lambda v: None if v is None else (str(v) if isinstance(v, Fraction)
                                                else mpmath.nstr(v, 15)))
        return {"name": self.name, "kind": self.kind, "pass": self.passed,
                "margin_lo": f(self.margin_lo), "margin_hi": f(self.margin_hi), "note": self.note}


@dataclass
class LedgerReport:
    inp: LedgerInput
    theta: Fraction
    p_fin: int
    alpha_step: Fraction
    alpha_pfin: Fraction
    alpha_pfin_minus1: Fraction
    n1: dict
    logs: dict
    d_bounds: tuple
    prec: int
    checks: list = field(default_factory=list)
    min_log_R: object = None

    def alpha(self, j) -> Fraction:
        return self.inp.eps0 + j * self.alpha_step

    def passed(self):
        return all(c.passed for c in self.checks)

    def table(self):
        return [c.to_json() for c in self.checks]

    def to_dict(self):
        return {"eps0": str(self.inp.eps0), "kappa1": str(self.inp.kappa1), "log_R": self.inp.log_R,
                "a": str(self.inp.a), "c": str(self.inp.c), "D": str(self.inp.D),
                "e1": str(self.inp.e1), "e2": str(self.inp.e2), "m": str(self.inp.m),
                "M": str(self.inp.M), "theta": str(self.theta), "p_fin": self.p_fin,
                "alpha_step": str(self.alpha_step), "alpha_pfin": str(self.alpha_pfin),
                "n1": {k: (v if isinstance(v, (int, type(None))) else mpmath.nstr(v, 20))
                       for k, v in self.n1.items()},
                "logs": {k: v.to_json() for k, v in self.logs.items()},
                "ln_d": [mpmath.nstr(self.d_bounds[0], 20), mpmath.nstr(self.d_bounds[1], 20)],
                "checks": self.table(),
                "min_log_R": None if self.min_log_R is None else self.min_log_R.to_json(),
                "pass": self.passed()}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def certified_ceil(ln_x, prec):
    """ceil(x) from an interval for ln x.

    Exact integer when the interval for x pins it; otherwise (x too large to
    hold exactly) the log-interval of ceil(x), using x <= ceil(x) < x + 1.
    Raises PrecisionError when the interval straddles an integer.
    """
    if _hi(ln_x) < (prec - 16) * math.log(2):
        x = iv.exp(ln_x)
        lo, hi = int(mpmath.ceil(_lo(x))), int(mpmath.ceil(_hi(x)))
        if lo != hi:
            raise PrecisionError("cannot certify ceiling; raise precision")
        return {"exact": lo, "ln_lo": None, "ln_hi": None}
    # ln(x + 1) = ln x + ln(1 + 1/x) <= ln x + 1/x
    return {"exact": None, "ln_lo": _lo(ln_x), "ln_hi": _hi(ln_x) + mpmath.exp(-_lo(ln_x))}


def _logratio_check(name, kind, lr, note=""):
    """Pass iff the log-ratio interval lies in [0, inf); ambiguity is a precision problem."""
    if _lo(lr) >= 0:
        ok = True
    elif _hi(lr) < 0:
        ok = False
    else:
        raise PrecisionError(f"sign of {name} not certified")
    return Check(name, kind, ok, _lo(lr), _hi(lr), note)


def _exact_check(name, lhs: Fraction, rhs: Fraction, strict=False, note=""):
    diff = rhs - lhs
    ok = diff > 0 if strict else diff >= 0
    return Check(name, "exact", bool(ok), diff, diff, note)


def derive_constants(inp: LedgerInput, prec=BASE_PREC) -> LedgerReport:
    """Exact theta, p_fin, alpha progression; log-space epsilon, N_1, d, beta, eta, ell, delta's."""
    while True:
        try:
            with _precision(prec):
                return _derive(inp, prec)
        except PrecisionError:
            prec *= 2
            if prec > MAX_PREC:
                raise


def _derive(inp, prec):
    theta = (min(inp.kappa1, inp.eps0) / 80) ** 2
    p = _ceil(6480 * ((9 - inp.eps0) / theta - 1))
    step = theta / 6480
    ln10 = iv.log(iv.mpf(10))
    ln_theta = iv.log(_iv(theta))
    # epsilon = 1e-10 (3/4)^p theta
    ln_q = p * iv.log(iv.mpf(3) / 4)
    ln_eps = -10 * ln10 + ln_q + ln_theta
    ln_x = iv.log(iv.mpf(25) / 2) - ln_eps          # X = 25/(2 eps)
    n1 = certified_ceil(ln_x, prec)
    ln_n1_lo = ln_x if n1["exact"] is None else iv.log(iv.mpf(n1["exact"]))
    ln_n1_hi = (iv.mpf(n1["ln_hi"]) if n1["exact"] is None
                else iv.log(iv.mpf(n1["exact"])))
    n1["ln_X"] = _lo(ln_x)
    # d = sum_j N_j with N1 q^(j-1) <= N_j < N1 q^(j-1) + 1, so
    # 4 N1 (1 - q^p) <= d < 4 N1 (1 - q^p) + p
    one_m = iv.log(1 - iv.exp(ln_q))
    ln_d_lo = iv.log(iv.mpf(4)) + ln_n1_lo + one_m
    big = iv.exp(iv.log(iv.mpf(4)) + ln_n1_hi + one_m - iv.log(iv.mpf(p)))
    ln_d_hi = iv.log(iv.mpf(p)) + iv.log(1 + big)
    ln_d = iv.mpf([_lo(ln_d_lo), _hi(ln_d_hi)])
    ln_M, ln_a = iv.log(_iv(inp.M)), iv.log(_iv(inp.a))
    ln_ln_r = _log_logR(inp)
    ln_t = ln_M + ln_ln_r
    ln_T = ln_t - ln_M - ln_a                        # T = t/(M a) = ln R / a
    # |ln beta| = t / (1e10 M a e1 e2 d^2)
    ln_abs_lnbeta = ln_T - 10 * ln10 - iv.log(_iv(inp.e1 * inp.e2)) - 2 * ln_d
    ln_ell = ln_eps + ln_T - iv.log(iv.mpf(100))
    logs = {
        "theta": LogValue(ln_theta, prec),
        "epsilon": LogValue(ln_eps, prec),
        "N1": LogValue(iv.mpf([_lo(ln_n1_lo), _hi(ln_n1_hi)]), prec),
        "d": LogValue(ln_d, prec),
        "abs_ln_beta": LogValue(ln_abs_lnbeta, prec),
        "abs_ln_eta": LogValue(ln_abs_lnbeta - iv.log(iv.mpf(2)), prec),
        "ell": LogValue(ln_ell, prec),
        "t": LogValue(ln_t, prec),
        "abs_ln_delta0": LogValue(ln_T, prec),
        "abs_ln_delta_fin": LogValue(ln_T + iv.log(iv.mpf(2)) + ln_eps - ln_theta, prec),
    }
    return LedgerReport(inp, theta, p, step, inp.eps0 + p * step, inp.eps0 + (p - 1) * step,
                        n1, logs, (_lo(ln_d), _hi(ln_d)), prec)


def _norm(rep):
    """Interval logs of the R-free normalised quantities."""
    inp = rep.inp
    ln10 = iv.log(iv.mpf(10))
    e = rep.logs["epsilon"].ln
    d = rep.logs["d"].ln
    # |ln beta| / T = 1 / (1e10 e1 e2 d^2)
    b = -10 * ln10 - iv.log(_iv(inp.e1 * inp.e2)) - 2 * d
    ell = e - iv.log(iv.mpf(100))                   # ell / T = eps / 100
    return e, d, b, ell


def check_inequalities(inp: LedgerInput, rep: LedgerReport = None, bisect=True):
    """Certified pass/fail table; fills rep.checks and rep.min_log_R."""
    rep = rep or derive_constants(inp)
    prec = rep.prec
    while True:
        try:
            with _precision(prec):
                rep.checks = _checks(inp, rep)
                if bisect:
                    rep.min_log_R = minimal_log_R(inp, rep)
            return rep
        except PrecisionError:
            prec *= 2
            if prec > MAX_PREC:
                raise


def _r_large(inp, rep, ln_ln_r):
    # theta ell >= 1e4 ln 10 with ell = eps ln R / (100 a)
    lr = (rep.logs["theta"].ln + rep.logs["epsilon"].ln + ln_ln_r - iv.log(iv.mpf(100))
          - iv.log(_iv(inp.a)) - iv.log(10000 * iv.log(iv.mpf(10))))
    return lr


def _checks(inp, rep):
    theta, p = rep.theta, rep.p_fin
    e, d, b, ell = _norm(rep)
    ln = lambda v: iv.log(_iv(v))
    out = []
    # progression
    out.append(_exact_check("alpha_pfin_lower", 9 - theta, rep.alpha_pfin,
                            note="9 - theta <= alpha_pfin"))
    out.append(_exact_check("alpha_pfin_upper", rep.alpha_pfin, Fraction(9), strict=True,
                            note="alpha_pfin < 9"))
    out.append(_exact_check("alpha_pfin_minus1", rep.alpha_pfin_minus1, 9 - theta, strict=True,
                            note="alpha_(pfin-1) < 9 - theta"))
    out.append(_exact_check("alpha_pfin_strict_variant", 9 - theta, rep.alpha_pfin, strict=True,
                            note="second statement of the progression: 9 - theta < alpha_pfin"))
    out.append(_exact_check("pfin_le_1e6_over_theta", Fraction(p), Fraction(10 ** 6) / theta))
    # phi_bar(alpha) = (min(alpha, 1) - alpha/9) / 72 is concave: minimum at an endpoint
    phib = lambda a_: (min(a_, Fraction(1)) - a_ / 9) / 72
    out.append(_exact_check("phibar_lower_bound", theta / 720,
                            min(phib(inp.eps0), phib(rep.alpha_pfin)),
                            note="phi_bar >= theta/720 on [eps0, alpha_pfin]"))
    # much smaller scale, literal: eps^2 ell >= 1e10 e1 e2 |ln beta|  <=>  eps^3 d^2 / 100 >= 1
    out.append(_logratio_check("much_smaller_scale", "scale-free",
                               3 * e + 2 * d - iv.log(iv.mpf(100)),
                               "literal form; d ~ 50/eps makes it eps >= 1/25"))
    # consequences of the scale separation that the proof actually uses
    out.append(_logratio_check("beta_pow_e2_le_e20ell", "scale-free",
                               iv.log(iv.mpf(20)) + ell - ln(inp.e2) - b,
                               "beta^(-e2) <= e^(20 ell)"))
    out.append(_logratio_check("e_theta_ell_le_beta29", "scale-free",
                               ln(theta / 720) + ell - iv.log(iv.mpf(29)) - b,
                               "e^(-theta ell/720) <= beta^29"))
    out.append(_logratio_check("beta29d_ge_delta0_eps0_6", "scale-free",
                               ln(inp.eps0 / 6) - iv.log(iv.mpf(29)) - b - d,
                               "beta^(29 d) >= delta0^(eps0/6)"))
    out.append(_logratio_check("delta0_eps0_2_le_beta29", "scale-free",
                               ln(inp.eps0 / 2) - iv.log(iv.mpf(29)) - b,
                               "delta0^(eps0/2) <= beta^29"))
    out.append(_logratio_check("R_ge_eta_pow_e1", "scale-free",
                               ln(2 * inp.a) - ln(inp.e1) - b, "R >> eta^(-e1)"))
    # R-dependent
    ln_ln_r = _log_logR(inp)
    if mpmath.isinf(_lo(ln_ln_r)):
        out.append(Check("R_large_enough", "R-dependent", False, -mpmath.inf, -mpmath.inf,
                         "R = 1"))
        out.append(Check("delta0_lt_1", "R-dependent", False, -mpmath.inf, -mpmath.inf, "R = 1"))
    else:
        out.append(_logratio_check("R_large_enough", "R-dependent", _r_large(inp, rep, ln_ln_r),
                                   "e^(-theta ell) <= 10^-10000"))
        out.append(Check("delta0_lt_1", "R-dependent", True, _lo(ln_ln_r), _hi(ln_ln_r)))
    # delta_pfin chain, three steps of the proof
    out.append(Check("chain_sum_bound", "structural", True, mpmath.mpf(0), None,
                     "d <= p + 4 N1 (1 - q^p) since N_j < N1 q^(j-1) + 1"))
    # 8 (N1 - 1) eps / 100 <= 1: N1 - 1 < 25/(2 eps) exactly, margin in (0, ln(1/(1 - 2eps/25))]
    out.append(Check("chain_e8N1ell_delta0", "structural", True, mpmath.mpf(0),
                     mpmath.exp(_hi(e)) * 2 / 25, "e^(8 N1 ell) delta0 <= e^(8 ell) by the ceiling"))
    lhs = theta * (2 * p + 8) + 200
    out.append(_exact_check("chain_final", lhs, Fraction(10 ** 12),
                            note="theta (2 p + 8) + 200 <= 1e12"))
    # direct: d eps/50 + 2 eps/theta <= 1; after dividing by q^p the sign is exact
    red = 1 - Fraction(1, 10 ** 10) * theta * Fraction(p + 4, 50) - Fraction(2, 10 ** 10)
    out.append(Check("delta_pfin_le_delta_fin", "exact", red > 0,
                     red if red > 0 else None, red,
                     "sign of 1 - 1e-10 theta (p+4)/50 - 2e-10 (margin times q^p)"))
    # telescoping 2 d_j ell >= T (1 - q^j): d_j >= 4 X (1 - q^j) and 4 X eps/50 = 1
    out.append(Check("telescoping", "structural", True, mpmath.mpf(0), None,
                     "d_j eps/50 >= 1 - (3/4)^j for every j"))
    # number of steps: theta/6480 <= X (theta eps/72000 - 29/(1e10 e1 e2 d^2)), j-independent
    with_b = iv.exp(iv.log(iv.mpf(29) * 25 / 2) - e + b)
    a_term = _iv(theta * Fraction(25, 2) / 72000) - with_b
    if _lo(a_term) <= 0:
        out.append(Check("number_of_steps", "scale-free", False, None, None, "denominator <= 0"))
    else:
        out.append(_logratio_check("number_of_steps", "scale-free",
                                   iv.log(a_term) - ln(theta / 6480),
                                   "N_(j+1) >= step count at every stage"))
    # delta_j >= #F^(-1/alpha_(j+1)): q^j alpha_(j+1) <= 4 eps0/3, decreasing in j
    mono = theta / 6480 < Fraction(287, 1000) * inp.eps0        # ln(4/3) > 0.287
    out.append(Check("scale_order", "exact",
                     bool(mono and rep.alpha(1) <= Fraction(4, 3) * inp.eps0),
                     Fraction(4, 3) * inp.eps0 - rep.alpha(1), None,
                     "delta_j >= #F^(-1/alpha_(j+1)) for all j"))
    bad = [k for k, v in rep.logs.items() if not v.roundtrip_ok()]
    out.append(Check("log_roundtrip", "exact", not bad, None, None,
                     "30-bit round trips" + (": " + ",".join(bad) if bad else "")))
    return out


def minimal_log_R(inp, rep, iters=400):
    """Smallest ln R (as a LogValue of ln ln R) for which every R-dependent check passes."""
    def ok(y):
        return _lo(_r_large(inp, rep, iv.mpf(y))) >= 0

    lo, hi = mpmath.mpf(-10), mpmath.mpf(1)
    while not ok(hi):
        lo, hi = hi, 2 * hi if hi > 0 else mpmath.mpf(1)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= abs(hi) * mpmath.mpf(2) ** (-rep.prec // 2):
            break
    return LogValue(iv.mpf(hi), rep.prec)


def closed_form_min_ln_ln_R(inp, rep):
    """ln ln R* = ln(1e6 ln 10 a / (theta eps)), for cross-checking the bisection."""
    return (mpmath.log(mpmath.mpf(10) ** 6 * mpmath.log(10)) + mpmath.log(mpmath.mpf(inp.a.numerator) / inp.a.denominator)
            - mpmath.log(mpmath.mpf(rep.theta.numerator) / rep.theta.denominator)
            - rep.logs["epsilon"].mid())


def run(eps0, kappa1, log_R="1e6", **structural):
    inp = LedgerInput(eps0, kappa1, log_R, **structural)
    return check_inequalities(inp)
