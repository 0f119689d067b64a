"""Order 2s, whatever the number of quadrature nodes.

Global errors of LIM(s, k, s) on the dipole problem for h = 0.4 / 2^i,
measured against a much finer LIM(5, 9, 5) solution. The observed rate
settles at 2s once h is in the asymptotic regime.
"""

from gyrolim import convergence_table

methods = [(1, 1, 7), (2, 2, 8), (3, 3, 9)]
report = convergence_table("dipole", 0.4, 4, (0.0, 40.0), methods)

for s, k1, k2 in methods:
    print(f"LIM({k1},{k2},{s})")
    for c in report.select(s=s, k1=k1, k2=k2):
        rate = "" if c.empirical_rate is None else f"rate {c.empirical_rate:5.2f}"
        print(f"  h = {c.params['h']:<8.4g} error {c.final_error:.3e}  {rate}")
