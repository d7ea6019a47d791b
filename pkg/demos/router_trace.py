"""Detector imbalance of the driven router for both signs of g."""

from photon_lattice.operators import circulation_period
from photon_lattice.router import RouterConfig, evolve_router

T = circulation_period(1.0)
for g in (1.0, -1.0):
    res = evolve_router(RouterConfig(g=g, t_final=2 * T, dt=0.25))
    print(f"g = {g:+.0f}")
    for k in range(0, len(res.times), 6):
        print(f"  t/T = {res.times[k] / T:4.2f}   I = {res.imbalance[k]:+.3f}")
