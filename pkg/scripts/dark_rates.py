"""Dark-state decay rate at several detunings, four ways.

Columns: the rate of |D> computed from the bare decay matrix ("direct"), the
quoted delta^2, the eliminated-model rate and the slowest Liouvillian rate.
"""
from qdiode import liouville as lv


def main():
    keys = ("direct", "quoted", "eliminated", "liouvillian")
    print(f"{'delta':>8s} " + " ".join(f"{k:>12s}" for k in keys))
    for d in (1e-3, 1e-2, 0.03, 0.1, 0.2):
        rates = lv.dark_decay_rates(d)
        print(f"{d:8.3f} " + " ".join(f"{rates[k] / d**2:12.6f}" for k in keys) + "   (/delta^2)")


if __name__ == "__main__":
    main()
