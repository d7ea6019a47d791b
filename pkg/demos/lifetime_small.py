"""A small disorder-averaged lifetime sweep (a few realizations, quick to run)."""

from photon_lattice.dynamics import lifetime_sweep
from photon_lattice.operators import PerturbationSpec

for kind in ("coupling_generic", "coupling_p_symmetric"):
    res = lifetime_sweep([12, 16, 20], PerturbationSpec(kind, 0.1, seed=3), R=10, q_max=25)
    stars = ", ".join(f"N={N}: {t:.1f}" for N, t in res.t_star().items())
    print(f"{kind}: t* {stars}; beta = {res.beta:.2f}")
