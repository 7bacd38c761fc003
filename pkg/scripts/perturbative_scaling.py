"""How the first-order perturbative steady state misses the exact one.

Prints the max-entry deviation divided by delta^2 and by (delta/alpha)^2 for
left and right driving on the optimal slice. A constant second ratio means
the truncation error is governed by delta/alpha rather than by delta alone.
"""
import numpy as np

from qdiode import liouville as lv
from qdiode import slh


def deviation(p):
    exact = lv.steady_state(lv.assemble(slh.build_cascade(p))).rho
    return float(np.max(np.abs(lv.perturbative_steady_state(p).rho - exact)))


def main():
    print(f"{'side':5s} {'amp':>7s} {'delta':>8s} {'dev':>10s} {'dev/d^2':>9s} {'dev/(d/a)^2':>12s}")
    for side in ("alpha", "beta"):
        for amp in (0.03, 0.05, 0.1, 0.2, 0.3):
            for d in (1e-4, 1e-3, 3e-3):
                p = slh.DiodeParams.optimal(d, **{side: amp})
                dev = deviation(p)
                print(f"{side:5s} {amp:7.3f} {d:8.1e} {dev:10.3e} {dev / d**2:9.2f} "
                      f"{dev / (d / amp) ** 2:12.4f}")


if __name__ == "__main__":
    main()
