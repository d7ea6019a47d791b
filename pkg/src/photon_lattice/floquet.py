"""High-frequency drive that produces the three-body model from two-body terms.

Lab-frame Hamiltonian, drive period ``T_d = 2 pi / omega_d``:

    H_lab(t) = Delta_0 sz + omega_0 sum_j n_j
               + sum_j [ (A_j cos(omega_d t) + B_j sin(omega_d t)) . sigma b_j^dag + h.c. ]

With ``r_{j,+/-} = (A_j +/- i B_j) / 2`` this is
``H_0 + H_+ exp(-i omega_d t) + H_- exp(+i omega_d t)`` where
``H_+ = sum_j [ b_j^dag (r_{j+} . sigma) + b_j (r_{j-}^* . sigma) ]`` and ``H_- = H_+^dag``.
The first-order term ``[H_-, H_+] / omega_d`` has the number-conserving part
``sum_ij (alpha_ij . sigma) b_i^dag b_j + h . sigma + const``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .operators import PAULI, SZ, ModelParams, build_hamiltonian, circulation_period, hop_operator, number_op
from .sector_basis import SectorBasis

# fourth-order commutator-free Magnus coefficients (two exponentials per step)
_CF4_C = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)
_CF4_A = ((3 - 2 * np.sqrt(3)) / 12, (3 + 2 * np.sqrt(3)) / 12)


def rz(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


@dataclass
class DriveSpec:
    A: np.ndarray          # (3, 3) complex, row j-1 is A_j
    B: np.ndarray
    omega_d: float
    omega_0: float = 0.0
    delta_0: float = 0.0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        self.B = np.asarray(self.B, dtype=complex)
        if self.A.shape != (3, 3) or self.B.shape != (3, 3):
            raise ValueError("A and B must have shape (3, 3)")
        if self.omega_d == 0:
            raise ValueError("omega_d must be nonzero")

    @property
    def period(self) -> float:
        return 2 * np.pi / abs(self.omega_d)

    def covariance_residual(self) -> float:
        R = rz(2 * np.pi / 3)
        res = 0.0
        for j in range(3):
            k = (j + 1) % 3
            res = max(res, np.abs(R @ self.A[j] - self.A[k]).max(), np.abs(R @ self.B[j] - self.B[k]).max())
        return float(res)

    def harmonics(self) -> tuple[np.ndarray, np.ndarray]:
        """``(r_plus, r_minus)``, each ``(3, 3)``."""
        return (self.A + 1j * self.B) / 2, (self.A - 1j * self.B) / 2


def default_drive_solution(g: float, omega_d: float, N: int | None = None, omega_0: float = 0.0,
                           target_delta: float = 0.0) -> DriveSpec:
    """Closed-form solution of the alpha-matching conditions.

    With ``N`` given, ``Delta_0 = target_delta - g (2N + 3)`` so the effective
    qubit splitting equals ``target_delta``.
    """
    if g * omega_d == 0:
        raise ValueError("g * omega_d must be nonzero")
    a = np.sqrt(abs(g * omega_d) / 6)
    s3 = np.sqrt(3)
    A3 = np.sign(g * omega_d) * a * np.array([s3, s3, -1j])
    B3 = a * np.array([s3, -s3, 1j])
    R = rz(2 * np.pi / 3)
    A = np.stack([R @ A3, R @ R @ A3, A3])
    B = np.stack([R @ B3, R @ R @ B3, B3])
    delta_0 = target_delta if N is None else target_delta - g * (2 * N + 3)
    return DriveSpec(A, B, omega_d, omega_0, delta_0)


def magnus_first_order(r_plus: np.ndarray, r_minus: np.ndarray, omega_d: float):
    """Coupling tensor ``alpha[i, j]`` (3-vectors) and field ``h = 1/2 sum_j alpha_jj``."""
    if omega_d == 0:
        raise ValueError("omega_d must be nonzero")
    rp, rm = np.asarray(r_plus), np.asarray(r_minus)
    alpha = np.empty((3, 3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            alpha[i, j] = (2j / omega_d) * (np.cross(rm[i], rm[j].conj()) - np.cross(rp[i], rp[j].conj()))
    h = 0.5 * sum(alpha[j, j] for j in range(3))
    return alpha, h


def drive_alpha(drive: DriveSpec):
    return magnus_first_order(*drive.harmonics(), drive.omega_d)


def dot_sigma(v) -> np.ndarray:
    return np.tensordot(np.asarray(v), PAULI, axes=1)


def effective_hamiltonian(drive: DriveSpec, basis: SectorBasis, include_omega0: bool = False) -> sp.csr_matrix:
    """Number-conserving first-order Floquet Hamiltonian on one sector (constants dropped)."""
    alpha, h = drive_alpha(drive)
    dim = basis.dim
    out = drive.delta_0 * sp.diags(basis.spins.astype(complex), format="csr")
    out = out + sp.kron(sp.identity(dim // 2), sp.csr_matrix(dot_sigma(h)), format="csr")
    for i in range(3):
        for j in range(3):
            if i == j:
                spin = sp.kron(sp.identity(dim // 2), sp.csr_matrix(dot_sigma(alpha[i, i])), format="csr")
                out = out + number_op(basis, i + 1) @ spin
            else:
                out = out + hop_operator(basis, i + 1, j + 1, dot_sigma(alpha[i, j]))
    if include_omega0:
        out = out + drive.omega_0 * basis.N * sp.identity(dim, format="csr")
    return out.tocsr()


def target_match_residual(drive: DriveSpec, g: float, basis: SectorBasis) -> float:
    """``max |H_eff - H_target|`` with ``Delta = Delta_0 + g (2N + 3)``."""
    params = ModelParams(g=g, delta=drive.delta_0 + g * (2 * basis.N + 3), N=basis.N)
    d = effective_hamiltonian(drive, basis) - build_hamiltonian(basis, params)
    return float(abs(d).max()) if d.nnz else 0.0


def validity_report(g: float, N: float, omega_0: float, omega_d: float) -> dict:
    """Norm scales of the first two high-frequency corrections.

    ``||H_(1)|| ~ 3 g N`` and ``||H_(2)|| ~ 20 g^2 N^2 / (9 omega_d)``; the
    expansion needs their ratio ``20 g N / (27 omega_d)`` to be small, so
    ``omega_d`` must grow linearly with ``N``.  The rotating-wave step needs
    ``omega_0 >> g``.
    """
    if min(abs(g), N, omega_0, omega_d) <= 0:
        raise ValueError("all frequencies and N must be positive")
    h1 = 3 * abs(g) * N
    h2 = 20 * g * g * N * N / (9 * omega_d)
    return {"H1_scale": h1, "H2_scale": h2, "magnus_ratio": h2 / h1, "rwa_ratio": omega_0 / abs(g)}


def min_drive_frequency(g: float, N: float, ratio: float = 0.1) -> float:
    """Smallest ``omega_d`` keeping the Magnus ratio below ``ratio``."""
    return 20 * abs(g) * N / (27 * ratio)


# ------------------------------------------------------------ lab frame

@dataclass(frozen=True)
class TruncatedProductBasis:
    n_max: int
    occupations: np.ndarray = field(repr=False)   # (D, 3)
    spins: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, n_max: int) -> "TruncatedProductBasis":
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        r = np.arange(n_max + 1)
        n1, n2, n3 = (x.ravel() for x in np.meshgrid(r, r, r, indexing="ij"))
        occ = np.repeat(np.stack([n1, n2, n3], axis=1), 2, axis=0)
        spins = np.tile([1, -1], len(n1))
        return cls(n_max, occ, spins)

    @property
    def dim(self) -> int:
        return len(self.spins)

    def index_of(self, n, spin) -> np.ndarray:
        n = np.asarray(n)
        m = self.n_max + 1
        return 2 * ((n[..., 0] * m + n[..., 1]) * m + n[..., 2]) + (1 - np.asarray(spin)) // 2

    def mode_op(self, j: int) -> sp.csr_matrix:
        """Annihilation operator of cavity ``j`` (1-based), identity on the qubit."""
        a = sp.diags(np.sqrt(np.arange(1, self.n_max + 1, dtype=float)), 1)
        eye = sp.identity(self.n_max + 1)
        mats = [eye, eye, eye]
        mats[j - 1] = a
        return sp.kron(sp.kron(sp.kron(mats[0], mats[1]), mats[2]), sp.identity(2), format="csr")

    def qubit_op(self, op) -> sp.csr_matrix:
        return sp.kron(sp.identity(self.dim // 2), sp.csr_matrix(op), format="csr")

    def product_state(self, n, qubit) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index_of(np.array(n), 1)] = qubit[0]
        psi[self.index_of(np.array(n), -1)] = qubit[1]
        return psi


def fourier_components(drive: DriveSpec, basis: TruncatedProductBasis):
    """``(H_plus, H_minus, H_avg)`` on the truncated product space."""
    rp, rm = drive.harmonics()
    Hp = None
    for j in range(3):
        a = basis.mode_op(j + 1)
        term = a.conj().T @ basis.qubit_op(dot_sigma(rp[j])) + a @ basis.qubit_op(dot_sigma(rm[j].conj()))
        Hp = term if Hp is None else Hp + term
    n_tot = sp.diags(basis.occupations.sum(axis=1).astype(float))
    H0 = drive.delta_0 * basis.qubit_op(SZ) + drive.omega_0 * n_tot
    Hp = Hp.tocsr()
    return Hp, Hp.conj().T.tocsr(), H0.tocsr()


def lab_hamiltonian(drive: DriveSpec, basis: TruncatedProductBasis, t: float) -> sp.csr_matrix:
    """Direct assembly from ``A cos + B sin`` (independent of the harmonic split)."""
    c, s = np.cos(drive.omega_d * t), np.sin(drive.omega_d * t)
    H = drive.delta_0 * basis.qubit_op(SZ)
    H = H + drive.omega_0 * sp.diags(basis.occupations.sum(axis=1).astype(float))
    for j in range(3):
        a = basis.mode_op(j + 1)
        X = a.conj().T @ basis.qubit_op(dot_sigma(c * drive.A[j] + s * drive.B[j]))
        H = H + X + X.conj().T
    return H.tocsr()


def _expm_taylor(K: sp.csr_matrix, v: np.ndarray, tol: float = 1e-16, max_terms: int = 60) -> np.ndarray:
    """``exp(K) v`` by a truncated Taylor series; ``K`` must have small norm."""
    out = v.copy()
    term = v
    scale = np.abs(v).max()
    if scale == 0:
        return out
    for k in range(1, max_terms):
        term = (K @ term) / k
        out += term
        if np.abs(term).max() <= tol * scale:
            return out
    raise RuntimeError("Taylor series did not converge; reduce the step size")


@dataclass
class StroboscopicSeries:
    q: np.ndarray
    times: np.ndarray
    n_exp: np.ndarray       # (3, S)
    total: np.ndarray
    leakage: np.ndarray
    static_n: np.ndarray | None = None

    @property
    def deviation(self) -> np.ndarray:
        if self.static_n is None:
            return np.full(len(self.q), np.nan)
        return np.abs(self.n_exp - self.static_n).max(axis=0)

    def write_csv(self, path, header_line: str | None = None) -> None:
        dev = self.deviation
        with open(path, "w", newline="") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh)
            w.writerow(["q", "t", "n1", "n2", "n3", "total_N_rotating", "deviation_vs_static"])
            for k, q in enumerate(self.q):
                w.writerow([int(q), *(f"{x:.17g}" for x in (self.times[k], *self.n_exp[:, k],
                                                             self.total[k], dev[k]))])


class LeakageError(RuntimeError):
    pass


def _cf4_exponents(drive: DriveSpec, basis: TruncatedProductBasis, steps_per_period: int):
    # the 2 x steps exponents are the same in every drive period
    Hp, Hm, H0 = fourier_components(drive, basis)
    h = drive.period / steps_per_period
    w = drive.omega_d
    exps = []
    for s in range(steps_per_period):
        t1 = (s + _CF4_C[0]) * h
        t2 = (s + _CF4_C[1]) * h
        # applied right to left: exp(-ih(a2 H1 + a1 H2)) first, then exp(-ih(a1 H1 + a2 H2))
        for a1, a2 in ((_CF4_A[1], _CF4_A[0]), (_CF4_A[0], _CF4_A[1])):
            cp = a1 * np.exp(-1j * w * t1) + a2 * np.exp(-1j * w * t2)
            K = (-1j * h) * ((a1 + a2) * H0 + cp * Hp + np.conj(cp) * Hm)
            exps.append(K.tocsr())
    return exps


def one_period_propagator(drive: DriveSpec, basis: TruncatedProductBasis,
                          steps_per_period: int = 64) -> np.ndarray:
    """Dense ``U(T_d, 0)`` from the commutator-free scheme."""
    U = np.eye(basis.dim, dtype=complex)
    for K in _cf4_exponents(drive, basis, steps_per_period):
        U = _expm_taylor(K, U)
    return U


DENSE_PERIOD_MAX_DIM = 3000


def stroboscopic_evolve(drive: DriveSpec, basis: TruncatedProductBasis, psi0: np.ndarray,
                        q_max: int, sample_every: int = 1, steps_per_period: int = 64,
                        leak_tol: float = 1e-6, method: str = "auto") -> StroboscopicSeries:
    """Lab-frame evolution sampled at ``t = q T_d``.

    Each drive period is split into ``steps_per_period`` steps of a
    fourth-order commutator-free Magnus scheme.  ``method="dense"`` builds the
    one-period propagator once and applies its ``sample_every``-th power;
    ``"vector"`` steps the state directly.
    """
    if steps_per_period < 1 or q_max < 0 or sample_every < 1:
        raise ValueError("invalid step or sampling parameters")
    if method == "auto":
        method = "dense" if basis.dim <= DENSE_PERIOD_MAX_DIM else "vector"
    if method not in ("dense", "vector"):
        raise ValueError(f"unknown method {method!r}")

    occ = basis.occupations
    edge = (occ == basis.n_max).any(axis=1)
    nsum = occ.sum(axis=1)
    psi = np.asarray(psi0, dtype=complex).copy()
    qs, ns, tot, leak = [], [], [], []

    def record(q):
        p = np.abs(psi) ** 2
        lk = float(p[edge].sum())
        if lk > leak_tol:
            raise LeakageError(f"cutoff population {lk:.3g} exceeds {leak_tol:g} at q={q}")
        qs.append(q)
        ns.append(occ.T @ p)
        tot.append(float(nsum @ p))
        leak.append(lk)

    record(0)
    sample_qs = list(range(sample_every, q_max + 1, sample_every))
    if q_max and (not sample_qs or sample_qs[-1] != q_max):
        sample_qs.append(q_max)
    if method == "dense":
        U = one_period_propagator(drive, basis, steps_per_period)
        W = np.linalg.matrix_power(U, sample_every)
        q = 0
        for qn in sample_qs:
            step = qn - q
            psi = W @ psi if step == sample_every else np.linalg.matrix_power(U, step) @ psi
            q = qn
            record(q)
    else:
        exps = _cf4_exponents(drive, basis, steps_per_period)
        for q in range(1, q_max + 1):
            for K in exps:
                psi = _expm_taylor(K, psi)
            if q in sample_qs:
                record(q)
    q_arr = np.array(qs)
    return StroboscopicSeries(q_arr, q_arr * drive.period, np.array(ns).T, np.array(tot), np.array(leak))


def static_reference(series: StroboscopicSeries, g: float, N: int, delta: float = 0.0,
                     source_cavity: int = 3, qubit=None) -> np.ndarray:
    """``<n_j>`` under the static rotating-frame model at the stroboscopic times."""
    from .dynamics import PLUS, EigenPropagator, fock_state, observables
    from .sector_basis import enumerate_sector

    b = enumerate_sector(N)
    H = build_hamiltonian(b, ModelParams(g=g, delta=delta, N=N))
    psi0 = fock_state(b, source_cavity, PLUS if qubit is None else qubit)
    states = EigenPropagator(H).propagate_many(psi0, series.times)
    n, _ = observables(b, states)
    series.static_n = n
    return n


def floquet_run(g: float, N: int, omega_0: float, omega_d: float, periods_T: float = 2.0,
                n_max: int | None = None, sample_every: int = 50, steps_per_period: int = 64,
                leak_tol: float = 1e-6) -> StroboscopicSeries:
    """Default drive from ``|0,0,N>|+>`` for ``periods_T`` circulation periods."""
    drive = default_drive_solution(g, omega_d, N, omega_0)
    basis = TruncatedProductBasis.build(N + 4 if n_max is None else n_max)
    psi0 = basis.product_state((0, 0, N), np.array([1, 1]) / np.sqrt(2))
    q_max = int(np.ceil(periods_T * circulation_period(g) / drive.period))
    series = stroboscopic_evolve(drive, basis, psi0, q_max, sample_every, steps_per_period, leak_tol)
    static_reference(series, g, N)
    return series
