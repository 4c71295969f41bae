"""Model integrals near double points and the two-body blow-up sweep.

Reproduces the closed form of the orthogonal-sheet model, locates the
finiteness onsets of the tangential and cone models by cutoff scans, and
runs the two-sphere sweep showing the measured cross energy dominating the
annulus-cascade lower bound while blowing up strictly faster.
"""

from rieszlab import (cone_model_scan, orthogonal_model_closed_form,
                      orthogonal_model_integral, tangent_model_scan,
                      two_body_sweep)


def main():
    print("orthogonal sheets: numeric vs closed form")
    for alpha in (-3.5, -3.0, -1.0):
        res = orthogonal_model_integral(alpha, 1.0)
        print(f"  alpha={alpha}: {res.value:.6f}  closed form "
              f"{orthogonal_model_closed_form(alpha, 1.0):.6f}")
    res = orthogonal_model_integral(-4.0, 1.0)
    print(f"  alpha=-4.0: diverged={res.diverged} "
          f"(cutoff law: {res.cutoff_fit.law})")

    print("tangential contact (onset at -3):")
    for alpha in (-2.5, -3.0, -4.0):
        fit = tangent_model_scan(alpha, 0.5)
        extra = (f"exponent {fit.exponent:.2f}" if fit.law == "power"
                 else f"limit {fit.limit:.5f}" if fit.law == "finite" else "")
        print(f"  alpha={alpha}: {fit.law} {extra}")

    print("double cone (onset at -4):")
    for alpha in (-3.5, -4.0, -5.0):
        fit = cone_model_scan(alpha)
        extra = (f"exponent {fit.exponent:.2f}" if fit.law == "power"
                 else f"limit {fit.limit:.5f}" if fit.law == "finite" else "")
        print(f"  alpha={alpha}: {fit.law} {extra}")

    print("two unit spheres, alpha=-4, shrinking gap:")
    res = two_body_sweep(2, -4.0, 1.0, [0.1, 0.05, 0.025, 0.0125])
    for g, e, lam in zip(res.gaps, res.energies, res.lambda_sums):
        print(f"  gap {g:7.4f}: cross energy {e:10.3f}  "
              f"annulus bound {lam:7.4f}  E*gap = {e * g:.4f}")
    print("  E*gap tends to pi^2 = 9.8696: the energy grows like 1/gap, "
          "strictly above the log-counting lower bound")


if __name__ == "__main__":
    main()
