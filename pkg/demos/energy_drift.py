"""Energy drift of LIM(s, k, s) on the dipole problem.

With k = s the method is a Gauss collocation scheme and the Hamiltonian
drifts visibly. Adding quadrature nodes for the gradient (k > s) drives the
drift down geometrically until it reaches round-off, without changing the
order of the method.

    python3 demos/energy_drift.py            # [0, 100], a few seconds
    python3 demos/energy_drift.py --full     # [0, 1000], the full table
"""

import sys

from gyrolim import get_problem, hamiltonian_error_table

full = "--full" in sys.argv
t_end = 1e3 if full else 1e2
s_list = [1, 2, 3, 4, 5]
k_list = list(range(1, 10))

report = hamiltonian_error_table(get_problem("dipole"), 0.4, (0.0, t_end), s_list, k_list)

print(f"max |H(y_n) - H(y_0)|, dipole, h = 0.4, t in [0, {t_end:g}]")
print("k \\ s " + "".join(f"{s:>12d}" for s in s_list))
for k in k_list:
    row = []
    for s in s_list:
        c = report.cell(s=s, k=k)
        row.append(f"{c.max_energy_drift:12.3e}" if c.status == "ok" else f"{c.status:>12}")
    print(f"{k:5d} " + "".join(row))
