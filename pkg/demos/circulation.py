"""Fock-state circulation: populations at thirds of the period, and the revival period."""

import numpy as np

from photon_lattice.dynamics import circulate_fock, crossing_period, default_times
from photon_lattice.operators import ModelParams, circulation_period

N, g = 40, 1.0
T = circulation_period(g)
ts = circulate_fock(ModelParams(g=g, N=N), N, default_times(g, 3, 120))

print(f"T = {T:.6f}")
print(" t/T     n1/N    n2/N    n3/N")
for k in range(0, len(ts.times), 40):
    n = ts.n_exp[:, k] / N
    print(f"{ts.times[k] / T:5.2f}  {n[0]:6.3f}  {n[1]:6.3f}  {n[2]:6.3f}")
print(f"sigma_x crossing period / T = {crossing_period(ts.times, ts.sigma_exp[0]) / T:.5f}")
