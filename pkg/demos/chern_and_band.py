"""Bulk Chern number against mass, then boundary-band diagnostics of one sector."""

import numpy as np

from photon_lattice.lda_topology import chern_scan, lda_boundary_constants
from photon_lattice.spectral import sector_diagnostics

for m, C in chern_scan(np.arange(-3.0, 4.01, 0.5), grid=48):
    print(f"m = {m:5.2f}   C = {'gapless' if C is None else C}")

N = 30
diag = sector_diagnostics(N)
d, c = diag.boundary_means()
d_ref, c_ref = lda_boundary_constants()
print(f"\nN = {N}: gap/sqrt(N) = {diag.gap_estimate / np.sqrt(N):.3f}, "
      f"{len(diag.boundary_indices)} boundary-band states")
print(f"band mean <d>/N = {d:.4f} (continuum {d_ref:.4f})")
print(f"band mean <C>/gN^2 = {c:.4f} (continuum {c_ref:.4f})")
