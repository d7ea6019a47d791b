"""Full eigendecomposition of a sector and the boundary-band diagnostics.

The chiral boundary band shows up as a run of eigenstates around ``E = 0``
with small edge distance ``<d>/N`` and a large positive circulation
``<C>/(g N^2)`` close to the LDA values ``0.0707...`` and ``0.1283...``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .lda_topology import lda_boundary_constants
from .operators import ModelParams, hermiticity_residual

DENSE_MAX_DIM = 6000


@dataclass
class SectorSpectrum:
    energies: np.ndarray
    states: np.ndarray = field(repr=False)
    params: ModelParams | None = None

    @property
    def dim(self) -> int:
        return len(self.energies)

    def expectation(self, op) -> np.ndarray:
        """Diagonal expectation values ``<E_k| op |E_k>`` for every eigenstate."""
        V = self.states
        return np.einsum("ik,ik->k", V.conj(), op @ V).real


@dataclass
class BandThresholds:
    """Operational thresholds for identifying the boundary band.

    A state is *chiral-boundary* when ``<d>/N <= d_max`` and
    ``<C>/(g N^2) >= chiral_fraction * 2/(9 sqrt 3)``.  The gap estimate is
    twice the smallest ``|E|`` of a state that is not chiral-boundary; the
    boundary band is every state with ``|E| <= band_fraction * gap`` and
    ``<d>/N <= d_max``.
    """

    d_max: float = 0.15
    chiral_fraction: float = 0.5
    band_fraction: float = 0.4


@dataclass
class BandDiagnostics:
    energies: np.ndarray
    d_exp: np.ndarray
    c_exp: np.ndarray
    gap_estimate: float
    boundary_indices: np.ndarray
    N: int
    g: float

    @property
    def d_scaled(self) -> np.ndarray:
        return self.d_exp / self.N

    @property
    def c_scaled(self) -> np.ndarray:
        return self.c_exp / (self.g * self.N**2)

    @property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(len(self.energies), dtype=bool)
        m[self.boundary_indices] = True
        return m

    def boundary_means(self) -> tuple[float, float]:
        """Band-averaged ``(<d>/N, <C>/(g N^2))``."""
        idx = self.boundary_indices
        return float(self.d_scaled[idx].mean()), float(self.c_scaled[idx].mean())

    def write_csv(self, path, header_line: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh)
            w.writerow(["index", "E", "E_over_gN", "d_over_N", "C_over_gN2", "boundary_flag"])
            flags = self.boundary_mask
            gN = self.g * self.N if self.N else 1.0
            for k, E in enumerate(self.energies):
                w.writerow([k, f"{E:.17g}", f"{E / gN:.17g}", f"{self.d_scaled[k]:.17g}",
                            f"{self.c_scaled[k]:.17g}", int(flags[k])])


def eigensolve(H, params: ModelParams | None = None, tol: float = 1e-12) -> SectorSpectrum:
    if hermiticity_residual(sp.csr_matrix(H)) > tol:
        raise ValueError("eigensolve requires a Hermitian operator")
    dim = H.shape[0]
    if dim > DENSE_MAX_DIM:
        raise ValueError(f"dense eigensolve limited to dim <= {DENSE_MAX_DIM}, got {dim}")
    A = H.toarray() if sp.issparse(H) else np.asarray(H)
    E, V = sla.eigh(A, driver="evr")
    return SectorSpectrum(E, V, params)


def band_diagnostics(spec: SectorSpectrum, d_op, C_op, N: int, g: float,
                     thresholds: BandThresholds | None = None) -> BandDiagnostics:
    if spec.dim == 0:
        raise ValueError("empty spectrum")
    th = thresholds or BandThresholds()
    E = spec.energies
    d = spec.expectation(d_op)
    c = spec.expectation(C_op)
    scale = max(N, 1)
    c_lda = lda_boundary_constants()[1]
    chiral = (d / scale <= th.d_max) & (c / (g * scale**2) >= th.chiral_fraction * c_lda)
    others = np.abs(E[~chiral])
    gap = 2 * float(others.min()) if others.size else 2 * float(np.abs(E).max())
    band = np.flatnonzero((np.abs(E) <= th.band_fraction * gap) & (d / scale <= th.d_max))
    return BandDiagnostics(E, d, c, gap, band, N, g)


def sector_diagnostics(N: int, g: float = 1.0, delta: float = 0.0,
                       thresholds: BandThresholds | None = None) -> BandDiagnostics:
    """Build, diagonalize and diagnose the unperturbed rotating-frame sector."""
    from .operators import build_hamiltonian, circulation_op, distance_op
    from .sector_basis import enumerate_sector

    basis = enumerate_sector(N)
    params = ModelParams(g=g, delta=delta, N=N)
    H = build_hamiltonian(basis, params)
    spec = eigensolve(H, params)
    return band_diagnostics(spec, distance_op(basis), circulation_op(basis, H), N, g, thresholds)


def initial_state_energy_stats(H, state: np.ndarray, tol: float = 1e-8) -> tuple[float, float]:
    """Mean energy and energy uncertainty of a normalized state."""
    nrm = np.linalg.norm(state)
    if abs(nrm - 1) > tol:
        raise ValueError(f"state is not normalized (norm {nrm})")
    Hpsi = H @ state
    mean = float(np.vdot(state, Hpsi).real)
    second = float(np.vdot(Hpsi, Hpsi).real)
    return mean, float(np.sqrt(max(second - mean**2, 0.0)))
