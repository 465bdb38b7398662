"""Watch the certified product Lip**HD approach the entropy for toral automorphisms.

For each matrix the script prints the exact entropy, then the analytic
product for a shrinking sequence of eta. A final empirical pass on the cat
map estimates the box dimension of the torus under the constructed metric.

    python demos/toral_products.py
"""
import numpy as np
from mpmath import mp

from hauslip.estimators import box_dimension, empirical_lip
from hauslip.exact_linalg import IntegerMatrix, char_poly, eigenvalues, entropy, real_jordan
from hauslip.torus_metric import analytic_certificate, build_torus_metric, torus_sample

MATRICES = {
    "cat map": [[2, 1], [1, 1]],
    "diag(2, 3)": [[2, 0], [0, 3]],
    "Jordan block at 2": [[2, 1], [0, 2]],
    "rotation": [[0, -1], [1, 0]],
}
ETAS = ["0.3", "0.1", "0.01", "0.001"]


def sweep(name, rows):
    A = IntegerMatrix.from_rows(rows)
    sp = eigenvalues(char_poly(A))
    h = entropy(sp)
    rjf = real_jordan(A, spectrum=sp)
    print(f"\n{name}: char poly {char_poly(A)}, entropy {mp.nstr(h, 12)}")
    print(f"  {'eta':>6}  {'HD':>10}  {'Lip':>10}  {'product':>12}  {'gap':>10}")
    for eta in ETAS:
        tm = build_torus_metric(rjf, eta)
        c = analytic_certificate(tm.pm, h)
        with mp.workprec(tm.pm.precision):
            print(f"  {eta:>6}  {mp.nstr(c.hd, 8):>10}  {mp.nstr(c.lip, 8):>10}  "
                  f"{mp.nstr(c.product, 10):>12}  {mp.nstr(c.product - h, 4):>10}")


def empirical_cat(eta="0.3", n=3000, seed=0):
    A = IntegerMatrix.from_rows(MATRICES["cat map"])
    tm = build_torus_metric(real_jordan(A), eta)
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2 ** 30, size=(n, 2)) / 2 ** 30
    ms = torus_sample(tm, X).with_random_pairs(5000, seed)
    Af = np.array(MATRICES["cat map"], dtype=float)
    lip = empirical_lip(ms, lambda P: np.mod(P @ Af.T, 1))
    fit = box_dimension(ms)
    c = analytic_certificate(tm.pm, 0)
    print(f"\ncat map at eta={eta}, {n} points:")
    print(f"  box dimension {fit.slope:.3f} against analytic HD {float(c.hd):.3f}")
    print(f"  empirical Lip {lip:.4f} against analytic Lip {float(c.lip):.4f}")


if __name__ == "__main__":
    for name, rows in MATRICES.items():
        sweep(name, rows)
    empirical_cat()
