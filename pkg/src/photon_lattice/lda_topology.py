"""Local-density picture: the triangular-lattice QWZ Bloch Hamiltonian.

Freezing the Bose-enhanced hopping amplitudes at a lattice site ``n`` gives a
translation-invariant two-band model.  At the centroid it is
``(2/3) g N (eta(k) . sigma)`` with mass ``m = 3 Delta / (2 g N)``.

Quasi-momenta are handled on the torus ``(theta_1, theta_2) in [0, 2 pi)^2``
with ``theta_3 = -theta_1 - theta_2``; the map to ``k`` is linear with
positive Jacobian, so Chern numbers computed on the torus carry the same sign
as the continuum integral over the hexagonal zone.

Chern convention: ``C = (1/4 pi) int eta_hat . (d_kx eta_hat x d_ky eta_hat)``
for the lower band, i.e. Berry curvature of ``A = i <u|grad u>``.  With it
the lower band has ``C = -1`` for ``-1 < m < 3``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .sector_basis import SQRT_3_2

SQ3 = np.sqrt(3.0)
_CJ = np.cos(2 * np.pi * np.arange(1, 4) / 3)
_SJ = np.sin(2 * np.pi * np.arange(1, 4) / 3)


class GaplessError(ValueError):
    """Raised when the two bands touch and no Chern number exists."""


@dataclass(frozen=True)
class BlochPoint:
    k: np.ndarray
    m: float


@dataclass(frozen=True)
class LocalCell:
    n: np.ndarray
    f: np.ndarray
    gap: float
    chern: int | None   # None where the local spectrum is gapless
    trivial: bool


def k_from_theta(theta1, theta2):
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    return -theta1 - theta2, (theta1 - theta2) / SQ3


def theta_from_k(kx, ky):
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    t1 = -(kx / 2 - SQ3 * ky / 2)
    t2 = -(kx / 2 + SQ3 * ky / 2)
    return t1, t2, kx


def bloch_vector(k, m: float) -> np.ndarray:
    """``eta(k)``; ``k`` has shape ``(..., 2)``, the result ``(..., 3)``."""
    k = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k)):
        raise ValueError("k must be finite")
    kx, ky = k[..., 0], k[..., 1]
    c = np.cos(SQ3 * ky / 2)
    return np.stack([
        np.sin(kx) + np.sin(kx / 2) * c,
        SQ3 * np.cos(kx / 2) * np.sin(SQ3 * ky / 2),
        m - np.cos(kx) - 2 * np.cos(kx / 2) * c,
    ], axis=-1)


def hopping_weights(n) -> np.ndarray:
    """``f_j = sqrt(n_{j+1} n_{j-1})``."""
    n = np.asarray(n, dtype=float)
    return np.sqrt(np.roll(n, -1, axis=-1) * np.roll(n, 1, axis=-1))


def local_bloch_vector(f, delta: float, g: float, theta1, theta2) -> np.ndarray:
    """Field ``h`` of the frozen-site Hamiltonian ``h . sigma`` on the theta torus."""
    f = np.asarray(f, dtype=float)
    th = np.stack(np.broadcast_arrays(theta1, theta2, -np.asarray(theta1) - np.asarray(theta2)), axis=-1)
    s, c = np.sin(th) * f, np.cos(th) * f
    return 2 * g * np.stack([s @ _CJ, s @ _SJ, -c.sum(axis=-1) + delta / (2 * g)], axis=-1)


def _torus(grid: int):
    t = 2 * np.pi * np.arange(grid) / grid
    return np.meshgrid(t, t, indexing="ij")


def _lower_states(h: np.ndarray) -> np.ndarray:
    # analytic lower eigenvector of h . sigma, with a fallback gauge near the south pole
    r = np.linalg.norm(h, axis=-1)
    hx, hy, hz = h[..., 0], h[..., 1], h[..., 2]
    north = hz > 0
    u = np.empty(h.shape[:-1] + (2,), dtype=complex)
    # gauge A, singular only at hz = -r: (hx - i hy, -(r + hz))
    # gauge B, singular only at hz = +r: (r - hz, -(hx + i hy))
    u[..., 0] = np.where(north, hx - 1j * hy, r - hz)
    u[..., 1] = np.where(north, -(r + hz), -(hx + 1j * hy))
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def plaquette_chern(h: np.ndarray) -> int:
    """Lower-band Chern number of a periodic grid of fields ``h`` (shape ``(G, G, 3)``).

    Link-variable flux; the result is gauge independent and integer up to
    rounding.  The sign is flipped relative to the bare plaquette phase so
    that the output matches the solid-angle convention of this module.
    """
    u = _lower_states(h)
    U1 = np.einsum("abi,abi->ab", u.conj(), np.roll(u, -1, axis=0))
    U2 = np.einsum("abi,abi->ab", u.conj(), np.roll(u, -1, axis=1))
    F = np.angle(U1 * np.roll(U2, -1, axis=0) * np.roll(U1, -1, axis=1).conj() * U2.conj())
    c = -F.sum() / (2 * np.pi)
    return int(np.rint(c))


def _bz_field(m: float, grid: int) -> np.ndarray:
    T1, T2 = _torus(grid)
    kx, ky = k_from_theta(T1, T2)
    return bloch_vector(np.stack([kx, ky], axis=-1), m)


# gap closings of eta happen only at Gamma (m=3), the M points (m=-1) and K points (m=-3/2)
_HIGH_SYMMETRY_THETA = np.array([
    (0, 0), (np.pi, np.pi), (np.pi, 0), (0, np.pi),
    (4 * np.pi / 3, 4 * np.pi / 3), (2 * np.pi / 3, 2 * np.pi / 3),
])


def bloch_gap(m: float, grid: int = 96) -> float:
    """Direct band gap ``2 min_k |eta|`` on the grid plus the high-symmetry points."""
    h = _bz_field(m, grid)
    kx, ky = k_from_theta(_HIGH_SYMMETRY_THETA[:, 0], _HIGH_SYMMETRY_THETA[:, 1])
    hs = bloch_vector(np.stack([kx, ky], axis=-1), m)
    return 2 * float(min(np.linalg.norm(h, axis=-1).min(), np.linalg.norm(hs, axis=-1).min()))


def chern_number(m: float, grid: int = 48, gap_tol: float = 1e-6) -> int:
    if grid < 24:
        raise ValueError("grid must be >= 24")
    if not np.isfinite(m):
        raise ValueError("m must be finite")
    if bloch_gap(m, grid) / 2 <= gap_tol:
        raise GaplessError(f"bands touch at m={m}")
    return plaquette_chern(_bz_field(m, grid))


def chern_number_upper_band(m: float, grid: int = 48, gap_tol: float = 1e-6) -> int:
    if grid < 24:
        raise ValueError("grid must be >= 24")
    if bloch_gap(m, grid) / 2 <= gap_tol:
        raise GaplessError(f"bands touch at m={m}")
    # the upper band of h . sigma is the lower band of -h . sigma
    return plaquette_chern(-_bz_field(m, grid))


def chern_scan(ms, grid: int = 48) -> list[tuple[float, int | None]]:
    """``(m, C)`` pairs; ``C`` is ``None`` where the spectrum is gapless."""
    out = []
    for m in ms:
        try:
            out.append((float(m), chern_number(m, grid)))
        except GaplessError:
            out.append((float(m), None))
    return out


def is_locally_trivial(n, delta: float = 0.0, g: float = 1.0) -> bool:
    """Some hopping dominates: ``f_j > f_{j+1} + f_{j-1} + Delta/(2g)`` for some ``j``.

    ``f`` is unnormalized here; dividing by ``N/3`` gives the mass form
    ``3 Delta/(2 g N)``.
    """
    f = hopping_weights(n)
    shift = delta / (2 * g)
    return bool(np.any(f > np.roll(f, 1) + np.roll(f, -1) + shift))


def local_cell(n, delta: float = 0.0, g: float = 1.0, grid: int = 48,
               gap_tol: float = 1e-6) -> LocalCell:
    n = np.asarray(n, dtype=float)
    f = hopping_weights(n)
    T1, T2 = _torus(grid)
    h = local_bloch_vector(f, delta, g, T1, T2)
    hs = local_bloch_vector(f, delta, g, _HIGH_SYMMETRY_THETA[:, 0], _HIGH_SYMMETRY_THETA[:, 1])
    gap = 2 * float(min(np.linalg.norm(h, axis=-1).min(), np.linalg.norm(hs, axis=-1).min()))
    chern = None if gap / 2 <= gap_tol * max(1.0, abs(g) * n.sum()) else plaquette_chern(h)
    return LocalCell(n, f, gap, chern, is_locally_trivial(n, delta, g))


def local_phase_map(N: int, delta: float = 0.0, resolution: int | None = None,
                    g: float = 1.0, grid: int = 36) -> list[LocalCell]:
    """Local gap and Chern number over the simplex ``n1 + n2 + n3 = N``.

    ``resolution`` is the number of steps along an edge (default ``N``, i.e.
    integer sites).
    """
    if N < 3:
        raise ValueError("N must be >= 3")
    res = N if resolution is None else int(resolution)
    if res < 1:
        raise ValueError("resolution must be >= 1")
    cells = []
    for a in range(res + 1):
        for b in range(res + 1 - a):
            n = np.array([a, b, res - a - b], dtype=float) * (N / res)
            cells.append(local_cell(n, delta, g, grid))
    return cells


def write_phase_map_csv(cells, path, header_line: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_line:
            fh.write(header_line + "\n")
        w = csv.writer(fh)
        w.writerow(["n1", "n2", "n3", "local_gap", "local_chern"])
        for c in cells:
            w.writerow([*(f"{x:.17g}" for x in c.n), f"{c.gap:.17g}",
                        "gapless" if c.chern is None else c.chern])


def gap_curve_residual(n) -> float:
    """``2 n1 n2 n3 N - sum (n_a n_b)^2``; zero on the local gap-closing curve at Delta=0."""
    n = np.asarray(n, dtype=float)
    N = n.sum(axis=-1)
    pairs = n * np.roll(n, -1, axis=-1)
    return 2 * n.prod(axis=-1) * N - (pairs**2).sum(axis=-1)


def nu(x):
    x = np.asarray(x, dtype=float)
    return (1 + 2 * np.cos(2 * np.pi * x)) ** 2 / 9


def boundary_path(x) -> np.ndarray:
    """Fractional occupations ``n_j/N = nu(x - j/3)`` along the boundary-mode path."""
    x = np.asarray(x, dtype=float)
    return np.stack([nu(x - j / 3) for j in (1, 2, 3)], axis=-1)


def lda_boundary_constants() -> tuple[float, float]:
    """``(<d>/N, <C>/(g N^2))`` averaged over the boundary path."""
    return 1 / np.sqrt(6) - 3 / (2 * np.sqrt(2) * np.pi), 2 / (9 * SQ3)


def path_distance(x) -> np.ndarray:
    """Edge distance over ``N`` at path parameter ``x``."""
    return SQRT_3_2 * boundary_path(x).min(axis=-1)
