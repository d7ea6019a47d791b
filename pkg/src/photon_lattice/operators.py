"""Sparse operators on a number sector: Hamiltonian, perturbations, observables.

Matrices are ``scipy.sparse.csr_matrix`` in the ordering of
:class:`~photon_lattice.sector_basis.SectorBasis`, with duplicates summed and
indices sorted.  The Hamiltonian is

    H = Delta sz + omega N [lab frame only]
        + sum_j ( b_j^dag b_{j+1} G_{j-1} + h.c. ) + perturbation,

with ``G_j = i g (cos(2 pi j/3) sx + sin(2 pi j/3) sy + i sz)`` and cavity
labels taken mod 3 in ``1..3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .sector_basis import SQRT_3_2, SectorBasis

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)
PAULI = (SX, SY, SZ)

PERTURBATION_KINDS = ("none", "cavity_frequency", "coupling_generic", "coupling_p_symmetric")
Frame = Literal["rotating", "lab"]


@dataclass(frozen=True)
class ModelParams:
    g: float = 1.0
    delta: float = 0.0
    omega: float = 0.0
    N: int = 0

    @property
    def period(self) -> float:
        """Circulation period ``4 pi / (sqrt(3) |g|)``."""
        return circulation_period(self.g)


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str = "none"
    strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.strength < 0:
            raise ValueError("perturbation strength must be >= 0")


@dataclass(frozen=True)
class Perturbation:
    """A realized perturbation.

    ``domega[j-1]`` shifts the frequency of cavity ``j``; ``dg[j-1]`` is the
    complex 3-vector added to ``G_j`` (so ``dG_j = dg_j . sigma``).
    """

    domega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dg: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), dtype=complex))

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.domega) or np.any(self.dg))


def circulation_period(g: float) -> float:
    return 4 * np.pi / (np.sqrt(3) * abs(g))


def qubit_coupling(j: int, g: float) -> np.ndarray:
    """The 2x2 qubit operator ``G_j``."""
    if j not in (1, 2, 3):
        raise ValueError(f"cavity index must be 1, 2 or 3, got {j}")
    th = 2 * np.pi * j / 3
    return 1j * g * (np.cos(th) * SX + np.sin(th) * SY + 1j * SZ)


def spin_rotation_z(theta: float) -> np.ndarray:
    """``exp(-i theta sz / 2)``."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def perturbation_rng(seed: int, realization: int = 0) -> np.random.Generator:
    """PCG64 stream for one disorder realization; independent across indices."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(realization),))
    return np.random.Generator(np.random.PCG64(ss))


def sample_perturbation(spec: PerturbationSpec, realization: int = 0) -> Perturbation:
    """Draw one realization.  All components are uniform on ``[-delta, delta]``.

    Draw order is fixed: three frequency shifts, or for the coupling kinds, per
    cavity ``j = 1..3`` the real parts then the imaginary parts of ``dg_j``.
    """
    d = float(spec.strength)
    if spec.kind == "none" or d == 0.0:
        return Perturbation()
    rng = perturbation_rng(spec.seed, realization)
    if spec.kind == "cavity_frequency":
        return Perturbation(domega=rng.uniform(-d, d, 3))
    dg = np.zeros((3, 3), dtype=complex)
    for j in range(3):
        re = rng.uniform(-d, d, 3)
        im = rng.uniform(-d, d, 3)
        if spec.kind == "coupling_p_symmetric":
            re[0] = re[1] = 0.0
            im[2] = 0.0
        dg[j] = re + 1j * im
    return Perturbation(dg=dg)


def _canonical(rows, cols, vals, dim) -> sp.csr_matrix:
    m = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    m.eliminate_zeros()
    return m


def hop_operator(basis: SectorBasis, a: int, b: int, qubit_op: np.ndarray) -> sp.csr_matrix:
    """``b_a^dag b_b (x) qubit_op`` for cavities ``a != b`` (1-based)."""
    if a == b:
        raise ValueError("hop_operator needs distinct cavities")
    a0, b0 = a - 1, b - 1
    occ = basis.occupations
    src = np.flatnonzero(occ[:, b0] > 0)
    new = occ[src].copy()
    new[:, b0] -= 1
    new[:, a0] += 1
    amp = np.sqrt(occ[src, b0] * (occ[src, a0] + 1.0))
    s_in = basis.spin_index[src]
    rows, cols, vals = [], [], []
    for s_out, spin in ((0, 1), (1, -1)):
        rows.append(basis.index_of(new[:, 0], new[:, 1], spin))
        cols.append(src)
        vals.append(amp * qubit_op[s_out, s_in])
    return _canonical(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), basis.dim)


def qubit_operator(basis: SectorBasis, op: np.ndarray) -> sp.csr_matrix:
    """Identity on the cavities tensored with a 2x2 qubit operator."""
    return sp.kron(sp.identity(basis.dim // 2, format="csr"), sp.csr_matrix(op), format="csr")


def number_op(basis: SectorBasis, j: int) -> sp.csr_matrix:
    if j not in (1, 2, 3):
        raise ValueError(f"cavity index must be 1, 2 or 3, got {j}")
    return sp.diags(basis.occupations[:, j - 1].astype(float), format="csr")


def distance_op(basis: SectorBasis) -> sp.csr_matrix:
    """Diagonal operator of the site distance from the lattice edge."""
    return sp.diags(SQRT_3_2 * basis.occupations.min(axis=1), format="csr")


def build_hamiltonian(
    basis: SectorBasis,
    params: ModelParams,
    pert: Perturbation | PerturbationSpec | None = None,
    frame: Frame = "rotating",
) -> sp.csr_matrix:
    if basis.N != params.N:
        raise ValueError(f"basis has N={basis.N} but params have N={params.N}")
    if frame not in ("rotating", "lab"):
        raise ValueError(f"unknown frame {frame!r}")
    if isinstance(pert, PerturbationSpec):
        pert = sample_perturbation(pert)
    pert = pert or Perturbation()

    diag = params.delta * basis.spins.astype(complex)
    if frame == "lab":
        diag = diag + params.omega * basis.N
    diag = diag + basis.occupations @ pert.domega
    H = sp.diags(diag, format="csr")

    hop = None
    for j in (1, 2, 3):
        k = (j - 2) % 3 + 1  # coupling index j-1 in 1..3
        Gk = qubit_coupling(k, params.g) + np.tensordot(pert.dg[k - 1], PAULI, axes=1)
        term = hop_operator(basis, j, j % 3 + 1, Gk)
        hop = term if hop is None else hop + term
    H = H + hop + hop.conj().T
    H = H.tocsr()
    H.sum_duplicates()
    H.sort_indices()
    return H


def hermiticity_residual(A) -> float:
    d = A - A.conj().T
    return float(abs(d).max()) if d.nnz else 0.0


def current_op(basis: SectorBasis, H, j: int) -> sp.csr_matrix:
    """Photon current into cavity ``j``, ``J_j = i [H, n_j]``."""
    if H.shape != (basis.dim, basis.dim):
        raise ValueError("H does not act on this basis")
    n = number_op(basis, j)
    return (1j * (H @ n - n @ H)).tocsr()


def circulation_op(basis: SectorBasis, H) -> sp.csr_matrix:
    """``C = 1/2 (n x J) . u + h.c.`` with ``u = (1, 1, 1)/sqrt(3)``."""
    if H.shape != (basis.dim, basis.dim):
        raise ValueError("H does not act on this basis")
    n = [number_op(basis, j) for j in (1, 2, 3)]
    J = [current_op(basis, H, j) for j in (1, 2, 3)]
    cross = sum(n[(c + 1) % 3] @ J[(c + 2) % 3] - n[(c + 2) % 3] @ J[(c + 1) % 3] for c in range(3))
    half = cross / (2 * np.sqrt(3))
    return (half + half.conj().T).tocsr()


def c3_unitary(basis: SectorBasis) -> sp.csr_matrix:
    """Cyclic cavity permutation ``b_j -> b_{j+1}`` with a ``2 pi/3`` qubit z-rotation."""
    occ = basis.occupations
    rows = basis.index_of(occ[:, 2], occ[:, 0], basis.spins)
    phase = np.exp(-1j * np.pi * basis.spins / 3)
    return _canonical(rows, np.arange(basis.dim), phase, basis.dim)


def p_unitary_part(dim: int) -> sp.csr_matrix:
    """Unitary part ``sx`` of the anti-unitary ``P = sx K``.

    ``K`` conjugates in the Fock (x) sz basis.  With the Pauli matrices above,
    ``sx K`` is the anti-unitary that anti-commutes with the rotating-frame
    Hamiltonian; it equals ``sz (i sy K)``.
    """
    return sp.kron(sp.identity(dim // 2), sp.csr_matrix(SX), format="csr")


def p_antisymmetry_residual(H) -> float:
    """``max |P H P^-1 + H|``; zero when the spectrum is forced to be +/- paired."""
    X = p_unitary_part(H.shape[0])
    r = X @ H.conj() @ X + H
    return float(abs(r).max()) if r.nnz else 0.0


def c3_residual(basis: SectorBasis, H) -> float:
    U = c3_unitary(basis)
    r = U @ H @ U.conj().T - H
    return float(abs(r).max()) if r.nnz else 0.0
