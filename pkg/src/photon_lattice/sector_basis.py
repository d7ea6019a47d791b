"""Fixed-N photon lattice: Fock-state enumeration and plane geometry.

A sector with total photon number ``N`` contains every occupation
``(n1, n2, n3)`` with ``n1 + n2 + n3 = N`` and two qubit orbitals per site,
``(N + 1)(N + 2)`` states in all.  States are ordered lexicographically in
``(n1, n2, spin)`` with spin ``+1`` before ``-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

SQRT_3_2 = np.sqrt(1.5)


class FockLabel(NamedTuple):
    n1: int
    n2: int
    n3: int
    spin: int  # sigma_z eigenvalue, +1 or -1

    @property
    def n(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)


def _site_offset(n1, N):
    # number of states with first occupation < n1
    n1 = np.asarray(n1)
    return 2 * (n1 * (N + 1) - n1 * (n1 - 1) // 2)


@dataclass(frozen=True)
class SectorBasis:
    """Basis of the ``N``-photon sector.

    ``occupations`` is an ``(D, 3)`` integer array and ``spins`` a length-``D``
    array of ``+1/-1``; row ``k`` is basis state ``k``.
    """

    N: int
    occupations: np.ndarray = field(repr=False)
    spins: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.spins)

    def __len__(self) -> int:
        return self.dim

    @property
    def labels(self) -> list[FockLabel]:
        return [FockLabel(int(a), int(b), int(c), int(s))
                for (a, b, c), s in zip(self.occupations, self.spins)]

    @property
    def spin_index(self) -> np.ndarray:
        """0 for spin up, 1 for spin down (row index into 2x2 qubit matrices)."""
        return (1 - self.spins) // 2

    def index_of(self, n1, n2, spin):
        """Vectorized position of ``(n1, n2, N - n1 - n2, spin)`` in the basis."""
        n1 = np.asarray(n1)
        n2 = np.asarray(n2)
        spin = np.asarray(spin)
        return _site_offset(n1, self.N) + 2 * n2 + (1 - spin) // 2

    def index(self, label) -> int:
        n1, n2, n3, spin = label
        if min(n1, n2, n3) < 0 or n1 + n2 + n3 != self.N or spin not in (1, -1):
            raise KeyError(f"{label!r} is not in the N={self.N} sector")
        return int(self.index_of(n1, n2, spin))

    def site_probabilities(self, psi: np.ndarray) -> np.ndarray:
        """Probability per lattice site (qubit traced out), shape ``(D/2,)``."""
        p = np.abs(psi) ** 2
        return p[0::2] + p[1::2]


def enumerate_sector(N: int) -> SectorBasis:
    if N < 0:
        raise ValueError("N must be non-negative")
    n1, n2 = np.array([(a, b) for a in range(N + 1) for b in range(N + 1 - a)],
                      dtype=np.int64).reshape(-1, 2).T
    n3 = N - n1 - n2
    occ = np.repeat(np.stack([n1, n2, n3], axis=1), 2, axis=0)
    spins = np.tile(np.array([1, -1], dtype=np.int64), len(n1))
    occ.setflags(write=False)
    spins.setflags(write=False)
    return SectorBasis(N, occ, spins)


def edge_distance(n) -> np.ndarray | float:
    """Euclidean distance of site(s) ``n`` from the nearest edge of the lattice."""
    n = np.asarray(n, dtype=float)
    d = SQRT_3_2 * n.min(axis=-1)
    return float(d) if d.ndim == 0 else d


def plane_coords(n):
    """Orthogonal projection of ``n`` onto the fixed-N plane, returns ``(x, y)``."""
    n = np.asarray(n, dtype=float)
    x = (n[..., 0] - n[..., 1]) / np.sqrt(2)
    y = (n[..., 0] + n[..., 1] - 2 * n[..., 2]) / np.sqrt(6)
    return x, y
