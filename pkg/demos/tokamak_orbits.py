"""Transit and banana orbits in a tokamak field, with very large steps.

A transit particle circulates around the torus, so its poloidal trace in
(R, x3) is a closed loop. A trapped (banana) particle bounces between two
mirror points and its trace is a crescent. Both are integrated here with
h ~ 1e4, i.e. a handful of steps per poloidal turn, which only works
because s is large: the step becomes a spectral approximation in time.
"""

import numpy as np

from gyrolim import cylindrical_coords, get_problem, integrate
from gyrolim.harness import SPECTRAL_SOLVER, steps_for

for name, h, s in (("tokamak_transit", 8e3, 12), ("tokamak_banana", 1e4, 12)):
    prob = get_problem(name)
    n = steps_for(2e5, h)
    rec = integrate(prob.system, prob.y0, h, n, (s, s, 20), SPECTRAL_SOLVER)
    R, x3 = cylindrical_coords(rec.states[:, :3])
    u = rec.states[:, 3]
    print(f"{name}: LIM(20,20,{s}) h = {h:g}, {n} steps, "
          f"{rec.total_iterations / n:.0f} fixed-point iterations per step")
    print(f"  R in [{R.min():.4f}, {R.max():.4f}], x3 in [{x3.min():.4f}, {x3.max():.4f}]")
    print(f"  parallel velocity changes sign: {bool(np.any(u > 0) and np.any(u < 0))}")
    print(f"  max energy drift {rec.max_abs_drift:.2e}")
