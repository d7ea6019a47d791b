"""Classical spin and classical cavity amplitudes.

Phase space is ``(b_1, b_2, b_3, sigma)`` with ``{b_j, b_k^*} = -i delta_jk``
and ``{sigma_a, sigma_b} = 2 eps_abc sigma_c``.  The classical energy is the
rotating-frame Hamiltonian with operators replaced by numbers:

    H = Delta sz + sum_j ( b_j^* b_{j+1} G_{j-1}(sigma) + c.c. ).

Equations of motion: ``db_j/dt = -i dH/db_j^*`` and
``dsigma/dt = sigma x B`` with ``B = -2 grad_sigma H``.

On the ``sz = 0`` manifold with real ``b = x`` and ``sigma = (cos phi, sin phi, 0)``
the amplitudes rotate rigidly, ``dx/dt = x x Omega`` with
``Omega_k = g cos(2 pi k/3 - phi)``, while ``dphi/dt = -B_z`` and
``B_z = -2 Delta - 2 g N + 2 g (sum_j x_j)^2``.  A co-rotating solution needs

    B_z = -2 Delta - 2 g N + 6 g N B_z^2 / (B_z^2 + 3 g^2 / 2),

which at ``Delta = sqrt(3) g / 4`` has the exact root ``B_z = -sqrt(3) g / 2``
and period ``2 pi / |B_z| = 4 pi / (sqrt(3) |g|)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .dynamics import crossing_period
from .operators import ModelParams, circulation_period

_TH = 2 * np.pi * np.arange(1, 4) / 3
U_AXIS = np.ones(3) / np.sqrt(3)
STEP_SAFETY = 30.0
OMEGA0_SQ_OVER_G2 = 1.5  # |Omega_0|^2 / g^2 for sigma = (1, 0, 0)


def _gamma(g: float) -> np.ndarray:
    """Rows are the coefficient vectors of ``G_k(sigma) = gamma_k . sigma``."""
    return np.stack([1j * g * np.array([np.cos(t), np.sin(t), 1j]) for t in _TH])


@dataclass
class ClassicalState:
    b: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=complex)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.b.shape != (3,) or self.sigma.shape != (3,):
            raise ValueError("b and sigma must be 3-vectors")

    def pack(self) -> np.ndarray:
        return np.concatenate([self.b.real, self.b.imag, self.sigma])

    @classmethod
    def unpack(cls, y) -> "ClassicalState":
        y = np.asarray(y, dtype=float)
        return cls(y[0:3] + 1j * y[3:6], y[6:9])

    @property
    def photons(self) -> np.ndarray:
        return np.abs(self.b) ** 2


def _hop_sums(b: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    # sum_j b_j^* b_{j+1} gamma_{j-1}, as a 3-vector in sigma space
    bj, bn = b, np.roll(b, -1)
    return (bj.conj() * bn) @ np.roll(gamma, 1, axis=0)


def energy(state: ClassicalState, params: ModelParams) -> float:
    gamma = _gamma(params.g)
    return float(params.delta * state.sigma[2] + 2 * (_hop_sums(state.b, gamma) @ state.sigma).real)


def _db(b, s, g):
    # works on (3,) or (3, M) arrays
    G = _gamma(g) @ s                    # G_k(sigma), k = 1..3
    Gm1 = np.roll(G, 1, axis=0)          # G_{j-1}
    Gp1 = np.roll(G, -1, axis=0)         # G_{j+1}
    return -1j * (np.roll(b, -1, axis=0) * Gm1 + np.roll(b, 1, axis=0) * Gp1.conj())


def eom_derivative(state: ClassicalState, params: ModelParams) -> ClassicalState:
    b, s = state.b, state.sigma
    db = _db(b, s, params.g)
    grad = 2 * _hop_sums(b, _gamma(params.g)).real
    grad[2] += params.delta
    ds = np.cross(s, -2 * grad)
    return ClassicalState(db, ds)


def _rhs(params):
    """Scalar-arithmetic version of ``eom_derivative`` on packed states (hot loop)."""
    g, delta = float(params.g), float(params.delta)
    cs = [(np.cos(t), np.sin(t)) for t in _TH]

    def f(t, y):
        y0, y1, y2, y3, y4, y5, sx, sy, sz = y.tolist()
        b = (complex(y0, y3), complex(y1, y4), complex(y2, y5))
        G = [1j * g * (c * sx + s * sy) - g * sz for c, s in cs]
        db = [-1j * (b[(j + 1) % 3] * G[(j - 1) % 3] + b[(j - 1) % 3] * G[(j + 1) % 3].conjugate())
              for j in range(3)]
        gx = gy = gz = 0.0
        for j in range(3):
            w = b[j].conjugate() * b[(j + 1) % 3] * 1j * g
            c, s = cs[(j - 1) % 3]
            gx += 2 * (w * c).real
            gy += 2 * (w * s).real
            gz -= 2 * w.imag
        gz += delta
        Bx, By, Bz = -2 * gx, -2 * gy, -2 * gz
        return np.array([db[0].real, db[1].real, db[2].real, db[0].imag, db[1].imag, db[2].imag,
                         sy * Bz - sz * By, sz * Bx - sx * Bz, sx * By - sy * Bx])
    return f


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray          # (9, T) packed states
    params: ModelParams
    sol: object = None     # dense interpolant

    @property
    def b(self) -> np.ndarray:
        return self.y[0:3] + 1j * self.y[3:6]

    @property
    def photons(self) -> np.ndarray:
        return np.abs(self.b) ** 2

    @property
    def sigma(self) -> np.ndarray:
        return self.y[6:9]

    def energies(self) -> np.ndarray:
        return np.array([energy(ClassicalState.unpack(c), self.params) for c in self.y.T])

    def write_csv(self, path, header_line: str | None = None) -> None:
        n, s, e = self.photons, self.sigma, self.energies()
        with open(path, "w", newline="") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh)
            w.writerow(["t", "b1_sq", "b2_sq", "b3_sq", "sx", "sy", "sz", "energy"])
            for k, t in enumerate(self.t):
                w.writerow([f"{x:.17g}" for x in (t, *n[:, k], *s[:, k], e[k])])


def integrate(state0: ClassicalState, params: ModelParams, t_final: float, tol: float = 1e-10,
              n_samples: int = 2001) -> Trajectory:
    """Dormand-Prince 5(4); local error per step well below ``tol``.

    The embedded estimate is asked for ``tol / STEP_SAFETY`` so that the
    accumulated drift of conserved quantities stays under ``100 tol`` over
    several periods, also off the ``sz = 0`` manifold.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    y0 = state0.pack()
    t_eval = np.linspace(0.0, t_final, n_samples)
    step_tol = tol / STEP_SAFETY
    res = solve_ivp(_rhs(params), (0.0, t_final), y0, method="RK45", t_eval=t_eval,
                    rtol=step_tol, atol=step_tol, dense_output=True)
    if not res.success:
        raise RuntimeError(f"integration failed: {res.message}")
    return Trajectory(res.t, res.y, params, res.sol)


@dataclass(frozen=True)
class FixedPointSolution:
    B_z: float
    x0: np.ndarray
    epsilon: float
    period: float
    delta: float
    N: float
    g: float

    def residual(self) -> float:
        return abs(_self_consistency(self.B_z, self.delta, self.N, self.g))

    def initial_state(self) -> ClassicalState:
        return ClassicalState(self.x0.astype(complex), np.array([1.0, 0.0, 0.0]))

    @property
    def params(self) -> ModelParams:
        return ModelParams(g=self.g, delta=self.delta)


def _self_consistency(B, delta, N, g):
    w2 = OMEGA0_SQ_OVER_G2 * g * g
    return -2 * delta - 2 * g * N + 6 * g * N * B * B / (B * B + w2) - B


def delta_from_epsilon(epsilon: float, g: float) -> float:
    return (1 + epsilon) * np.sqrt(3) * g / 4


def solve_circulating_point(N: float, epsilon: float = 0.0, g: float = 1.0,
                            bracket_scale: float = 1.0) -> FixedPointSolution:
    """Co-rotating solution for ``Delta = (1 + epsilon) sqrt(3) g / 4``.

    The root is bracketed in ``B*(1 +/- c/sqrt(N))`` around ``B* = -sqrt(3) g/2``;
    it moves by ``O(epsilon/N)``.
    """
    if g == 0:
        raise ValueError("g must be nonzero")
    if N <= 0:
        raise ValueError("N must be positive")
    delta = delta_from_epsilon(epsilon, g)
    Bs = -np.sqrt(3) * g / 2
    if epsilon == 0:
        B = Bs
    else:
        w = bracket_scale / np.sqrt(N)
        a, b = sorted((Bs * (1 - w), Bs * (1 + w)))
        fa, fb = _self_consistency(a, delta, N, g), _self_consistency(b, delta, N, g)
        if fa * fb > 0:
            raise ValueError(f"no root in bracket [{a}, {b}]")
        B = brentq(_self_consistency, a, b, args=(delta, N, g), xtol=1e-15, rtol=1e-15)
    omega0 = g * np.cos(_TH)  # Omega at phi = 0: g(-1/2, -1/2, 1)
    v = omega0 - B * U_AXIS
    x0 = np.sign(g) * np.sqrt(N) * v / np.linalg.norm(v)
    return FixedPointSolution(float(B), x0, float(epsilon), 2 * np.pi / abs(B), delta, N, g)


def measure_period(traj: Trajectory) -> float:
    """Mean spacing of upward ``sigma_x`` zero crossings."""
    return crossing_period(traj.t, traj.sigma[0])


def trajectory_averages(traj: Trajectory, period: float | None = None,
                        n_quad: int = 20000) -> tuple[float, float]:
    """One-period averages ``(<d>/N, <C>/(g N^2))``.

    ``d = sqrt(3/2) min_j |b_j|^2`` and ``C = (n x dn/dt) . u``.
    """
    if traj.sol is None:
        raise ValueError("trajectory lacks a dense interpolant")
    P = measure_period(traj) if period is None else float(period)
    if traj.t[-1] < P * (1 - 1e-12):
        raise ValueError("trajectory does not cover one period")
    ts = np.arange(n_quad) * (P / n_quad)
    Y = traj.sol(ts)
    b = Y[0:3] + 1j * Y[3:6]
    n = np.abs(b) ** 2
    N = float(n[:, 0].sum())
    d = np.sqrt(1.5) * n.min(axis=0)
    g = traj.params.g
    ndot = 2 * (b.conj() * _db(b, Y[6:9], g)).real
    C = np.cross(n, ndot, axis=0).T @ U_AXIS
    if N == 0:
        return 0.0, 0.0
    c_scale = g * N * N if g != 0 else N * N
    return float(d.mean() / N), float(C.mean() / c_scale)


def fock_like_state(N: float, source_cavity: int = 3) -> ClassicalState:
    """All photons in one cavity, spin along +x: the classical image of ``|0,0,N>|+>``."""
    b = np.zeros(3, dtype=complex)
    b[source_cavity - 1] = np.sqrt(N)
    return ClassicalState(b, np.array([1.0, 0.0, 0.0]))


def circulation_period_classical(g: float) -> float:
    return circulation_period(g)
