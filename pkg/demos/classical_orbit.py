"""Classical co-rotating orbit: period shift with detuning and one-period averages."""

import numpy as np

from photon_lattice.semiclassical import (integrate, measure_period, solve_circulating_point,
                                          trajectory_averages)

T_inf = 4 * np.pi / np.sqrt(3)
for eps in (0.0, 0.2, -0.2):
    fp = solve_circulating_point(50, eps)
    tr = integrate(fp.initial_state(), fp.params, 3 * fp.period)
    print(f"eps = {eps:+.1f}: predicted T/T_inf = {fp.period / T_inf:.6f}, "
          f"measured {measure_period(tr) / T_inf:.6f}")

fp = solve_circulating_point(50, 0.0)
d, c = trajectory_averages(integrate(fp.initial_state(), fp.params, 1.1 * fp.period), fp.period)
print(f"<d>/N = {d:.6f}, <C>/gN^2 = {c:.6f}")
