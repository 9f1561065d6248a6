"""Energy decay under the a_ell flow, then the constant ledger at (0.8, 0.8).

Run: python3 demos/energy_and_ledger.py
"""

from fractions import Fraction

from rproj import experiments as ex, fractal_gen as fg, ledger


def main():
    f = fg.gen_cantor(4.5, 7, seed=0, window=4)
    reps = ex.energy_trend(f, [0.5, 1.0, 1.5, 2.0], alpha=1.0, delta=2 ** -20, n_samples=50,
                           n_points=50)
    print(f"Upsilon = {reps[0].fitted['upsilon']:.6g}")
    for r in reps:
        print(f"ell={r.config['ell']:.1f}  delta'={r.fitted['delta_new']:.3g}  "
              f"median post/pre={r.fitted['median_ratio']:.5f}")

    rep = ledger.run(Fraction(4, 5), Fraction(4, 5), "1e6")
    print(f"\ntheta={rep.theta}  p_fin={rep.p_fin}  alpha_pfin={rep.alpha_pfin}")
    for c in rep.checks:
        print(f"  {c.name:28s} {'ok' if c.passed else 'FAILS'}")


if __name__ == "__main__":
    main()
