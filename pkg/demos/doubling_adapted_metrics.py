"""From separation times to an adapted metric for the doubling map on the circle.

Steps, all on the closed sample of dyadic rationals k/2**bits:
separation times give the quasi-metric rho = alpha**-n(x, y); shortest
chains turn it into a metric D within a factor 4 of rho; the orbit
maximum over n steps gives d_n. For each n the script prints the
Lipschitz constant of the map, the box dimension of the sample, and their
product dimension * log Lip next to the entropy log 2.

    python demos/doubling_adapted_metrics.py [bits]
"""
import math
import sys
from fractions import Fraction

from hauslip.expansive import (build_rho, choose_alpha, doubling_system,
                               expansive_certificate, frink_metrize, resolve_m, sample_closure,
                               sandwich_violations, separation_table)

bits = int(sys.argv[1]) if len(sys.argv) > 1 else 9
system = doubling_system(Fraction(1, 4))
sample = sample_closure(system, [Fraction(k, 2 ** bits) for k in range(2 ** bits)])
ntab = separation_table(system, sample)
m, source = resolve_m(system, sample, ntab)
alpha = choose_alpha(m)
q = build_rho(system, sample, alpha, m, ntab=ntab)
fm = frink_metrize(q)

print(f"{len(sample)} points, weak-triangle exponent m={m} ({source}), alpha={alpha:.6f}")
print(f"D <= rho <= 4 D violations: {sandwich_violations(q, fm)}")
print(f"{'n':>3}  {'Lip_D(f^n)':>10}  {'Lip_dn(f)':>10}  {'box dim':>8}  {'product':>8}  entropy {math.log(2):.6f}")
for n in (1, 2, 4, 6):
    rep = expansive_certificate(system, sample, q, fm, n)
    print(f"{n:>3}  {rep.L:>10.4f}  {rep.lip_d:>10.4f}  {rep.boxdim.slope:>8.4f}  {rep.product:>8.4f}"
          f"  HD bound {rep.hd_bound:.4f}")
