"""Largest relative gap between full, eliminated and flapping-mirror traces.

Holds delta/alpha fixed and shrinks alpha. A gap proportional to alpha^2
points at the drive strength, not delta/alpha, as the controlling parameter.
"""
import numpy as np

from qdiode import correlations as corr
from qdiode import flapper as fl
from qdiode import slh


def gaps(alpha, ratio, exact_rates=False):
    d = alpha * ratio
    m = fl.RateModel.from_diode(d, alpha, exact_rates)
    taus = np.concatenate([[0.0], np.geomspace(1e-2, 20 / m.gamma_tot, 120)])
    p = slh.DiodeParams.optimal(d, alpha=alpha)
    full = corr.driven_correlators(p, taus, "full")
    elim = corr.driven_correlators(p, taus, "eliminated")
    an = fl.analytic_correlators(m, alpha, taus)
    tr = {"full": {k: (full[k].g1.real, full[k].g2) for k in full},
          "elim": {k: (elim[k].g1.real, elim[k].g2) for k in elim},
          "flap": {k: (an.g1[k], an.g2[k]) for k in ("ref", "trans")}}
    out = {}
    for x, y in (("full", "elim"), ("full", "flap"), ("elim", "flap")):
        out[f"{x}-{y}"] = max(float(np.max(np.abs(u - v) / np.abs(v)))
                              for k in ("ref", "trans") for u, v in zip(tr[x][k], tr[y][k]))
    return out


def main():
    ratio = 1e-3
    print(f"delta/alpha = {ratio:g}, target (delta/alpha)^2 = {ratio**2:g}")
    for exact in (False, True):
        print(f"flapper rates: {'exact' if exact else 'limit'}")
        for alpha in (0.1, 0.03, 0.01, 3e-3, 1e-3):
            g = gaps(alpha, ratio, exact)
            cols = " ".join(f"{k}={v:.2e} ({v / alpha**2:.2f} a^2)" for k, v in g.items())
            print(f"  alpha={alpha:<6g} {cols}")


if __name__ == "__main__":
    main()
