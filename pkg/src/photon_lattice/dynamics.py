"""Time evolution inside number sectors, revivals and disorder-averaged lifetimes."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.stats import poisson

from .krylov import KrylovPropagator
from .operators import (ModelParams, Perturbation, PerturbationSpec, build_hamiltonian,
                        c3_unitary, circulation_period, sample_perturbation)
from .sector_basis import SectorBasis, enumerate_sector

PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)

# Rough single-core timings (seconds) used to pick a propagator: dense eigh
# ~ C_EIGH dim^3, reconstruction ~ C_DENSE dim^2 per sample, Lanczos stepping
# ~ C_KRYLOV |t| ||H||_1 dim.
C_EIGH = 1.0e-9
C_DENSE = 1.0e-9
C_KRYLOV = 1.7e-7
DENSE_EVOLVE_MAX_DIM = 6000
WORKERS_ENV = "PHOTON_LATTICE_WORKERS"


@dataclass
class InitialState:
    kind: str = "fock"
    N: float = 10
    qubit: np.ndarray = field(default_factory=lambda: PLUS.copy())
    source_cavity: int = 3
    phase: float = 0.0  # argument of alpha for coherent states

    def __post_init__(self):
        if self.kind not in ("fock", "coherent"):
            raise ValueError(f"unknown initial-state kind {self.kind!r}")
        self.qubit = np.asarray(self.qubit, dtype=complex)
        if self.qubit.shape != (2,) or abs(np.linalg.norm(self.qubit) - 1) > 1e-12:
            raise ValueError("qubit state must be a normalized 2-vector")
        if self.source_cavity not in (1, 2, 3):
            raise ValueError("source_cavity must be 1, 2 or 3")
        if self.kind == "coherent" and not self.N > 0:
            raise ValueError("coherent state needs mean photon number > 0")
        if self.kind == "fock" and (self.N < 0 or int(self.N) != self.N):
            raise ValueError("Fock state needs a non-negative integer N")

    @property
    def alpha(self) -> complex:
        return np.sqrt(self.N) * np.exp(1j * self.phase)


@dataclass
class TimeSeries:
    times: np.ndarray
    n_exp: np.ndarray          # (3, T)
    sigma_exp: np.ndarray      # (3, T)
    fidelity: np.ndarray | None = None
    snapshots: dict = field(default_factory=dict)

    @property
    def total_photons(self) -> np.ndarray:
        return self.n_exp.sum(axis=0)

    def write_csv(self, path, header_line: str | None = None) -> None:
        fid = self.fidelity if self.fidelity is not None else np.full(len(self.times), np.nan)
        with open(path, "w", newline="") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh)
            w.writerow(["t", "n1", "n2", "n3", "sx", "sy", "sz", "fidelity"])
            for k, t in enumerate(self.times):
                row = [t, *self.n_exp[:, k], *self.sigma_exp[:, k], fid[k]]
                w.writerow([f"{x:.17g}" for x in row])

    def write_snapshots_csv(self, path, header_line: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh)
            w.writerow(["t", "n1", "n2", "n3", "probability"])
            for t, table in sorted(self.snapshots.items()):
                for (a, b, c), p in table:
                    w.writerow([f"{t:.17g}", a, b, c, f"{p:.17g}"])


@dataclass(frozen=True)
class RevivalRecord:
    q: int
    t_q: float
    peak: float


def basis_for_dim(dim: int) -> SectorBasis:
    """Recover the sector basis from its dimension ``(N + 1)(N + 2)``."""
    N = int(round((-3 + np.sqrt(1 + 4 * dim)) / 2))
    if (N + 1) * (N + 2) != dim:
        raise ValueError(f"{dim} is not a sector dimension")
    return enumerate_sector(N)


def fock_state(basis: SectorBasis, source_cavity: int = 3, qubit=PLUS) -> np.ndarray:
    """``|N>`` in ``source_cavity``, vacuum elsewhere, times the qubit state."""
    psi = np.zeros(basis.dim, dtype=complex)
    n = [0, 0, 0]
    n[source_cavity - 1] = basis.N
    psi[basis.index((*n, 1))] = qubit[0]
    psi[basis.index((*n, -1))] = qubit[1]
    return psi


def observables(basis: SectorBasis, psi: np.ndarray):
    """``(<n_j>, <sigma>)`` for one state, or column-stacked states."""
    p = np.abs(psi) ** 2
    n = basis.occupations.T.astype(float) @ p
    up, dn = psi[0::2], psi[1::2]
    od = np.sum(up.conj() * dn, axis=0)
    sz = np.sum(np.abs(up) ** 2 - np.abs(dn) ** 2, axis=0)
    return n, np.array([2 * od.real, 2 * od.imag, sz])


class EigenPropagator:
    """``exp(-i H t)`` from a cached dense eigendecomposition."""

    def __init__(self, H):
        A = H.toarray() if hasattr(H, "toarray") else np.asarray(H)
        self.E, self.V = sla.eigh(A, driver="evr")

    def propagate(self, psi: np.ndarray, t: float) -> np.ndarray:
        return self.V @ (np.exp(-1j * self.E * t) * (self.V.conj().T @ psi))

    def propagate_many(self, psi: np.ndarray, times) -> np.ndarray:
        """States at every time as columns."""
        c = self.V.conj().T @ psi
        return self.V @ (np.exp(-1j * np.outer(self.E, times)) * c[:, None])


def choose_method(H, t_span: float, n_times: int, dense_max: int = DENSE_EVOLVE_MAX_DIM) -> str:
    """Cheaper of eigendecomposition and Krylov stepping for one series."""
    dim = H.shape[0]
    if dim > dense_max:
        return "krylov"
    if dim <= 64:
        return "eigen"
    norm1 = float(abs(H).sum(axis=0).max())
    eig = C_EIGH * dim**3 + C_DENSE * dim**2 * n_times
    kry = C_KRYLOV * abs(t_span) * norm1 * dim
    return "eigen" if eig <= kry else "krylov"


def make_propagator(H, method: str = "auto", krylov_dim: int = 30, krylov_tol: float = 1e-10,
                    t_span: float = 1.0, n_times: int = 1):
    if method == "auto":
        method = choose_method(H, t_span, n_times)
    if method == "eigen":
        return EigenPropagator(H)
    if method == "krylov":
        return KrylovPropagator(H, m=krylov_dim, tol=krylov_tol)
    raise ValueError(f"unknown propagation method {method!r}")


def _state_iter(prop, psi0, times, chunk=256):
    times = np.asarray(times, dtype=float)
    if isinstance(prop, EigenPropagator):
        for s in range(0, len(times), chunk):
            block = prop.propagate_many(psi0, times[s:s + chunk])
            for k in range(block.shape[1]):
                yield block[:, k]
        return
    psi, t_prev = psi0.astype(complex), 0.0
    for t in times:
        psi = prop.propagate(psi, t - t_prev)
        t_prev = t
        yield psi


def evolve_sector(H, psi0: np.ndarray, times, basis: SectorBasis | None = None, *,
                  reference: np.ndarray | None = None, n_thirds: int = 0,
                  snapshot_times=(), method: str = "auto", krylov_dim: int = 30,
                  krylov_tol: float = 1e-10, norm_tol: float = 1e-8) -> TimeSeries:
    """Evolve ``psi0`` under ``H`` and record cavity and qubit expectations.

    ``reference`` enables the fidelity column ``|<psi(t)| U_C3^n |reference>|^2``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be a strictly increasing 1-D array")
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > norm_tol:
        raise ValueError("initial state is not normalized")
    basis = basis or basis_for_dim(H.shape[0])
    if basis.dim != psi0.shape[0] or H.shape[0] != basis.dim:
        raise ValueError("state, Hamiltonian and basis dimensions differ")

    target = None
    if reference is not None:
        target = rotated_reference(basis, reference, n_thirds)
    snaps = {float(t) for t in snapshot_times}

    prop = make_propagator(H, method, krylov_dim, krylov_tol,
                           t_span=float(np.abs(times).max()), n_times=len(times))
    n_exp = np.empty((3, len(times)))
    s_exp = np.empty((3, len(times)))
    fid = np.empty(len(times)) if target is not None else None
    snapshots = {}
    for k, psi in enumerate(_state_iter(prop, psi0, times)):
        n_exp[:, k], s_exp[:, k] = observables(basis, psi)
        if target is not None:
            fid[k] = abs(np.vdot(psi, target)) ** 2
        if times[k] in snaps:
            snapshots[float(times[k])] = site_table(basis, psi)
    return TimeSeries(times, n_exp, s_exp, fid, snapshots)


def propagate(H, psi: np.ndarray, t: float, method: str = "auto") -> np.ndarray:
    """Single propagation ``exp(-i H t) psi``; ``t`` may be negative."""
    return make_propagator(H, method, t_span=abs(t)).propagate(np.asarray(psi, dtype=complex), t)


def site_table(basis: SectorBasis, psi: np.ndarray):
    p = basis.site_probabilities(psi)
    occ = basis.occupations[0::2]
    return [(tuple(int(x) for x in o), float(q)) for o, q in zip(occ, p)]


def rotated_reference(basis: SectorBasis, reference: np.ndarray, n_thirds: int) -> np.ndarray:
    U = c3_unitary(basis)
    out = np.asarray(reference, dtype=complex)
    for _ in range(n_thirds % 6):  # U^3 = -1, so U^6 = 1
        out = U @ out
    return out


def rotated_fidelity(state_t: np.ndarray, reference: np.ndarray, n_thirds: int,
                     basis: SectorBasis | None = None) -> float:
    """``|<psi(t)| U_C3^n |psi0>|^2``."""
    state_t = np.asarray(state_t)
    reference = np.asarray(reference)
    if state_t.shape != reference.shape:
        raise ValueError("states live in different spaces")
    basis = basis or basis_for_dim(state_t.shape[0])
    return float(abs(np.vdot(state_t, rotated_reference(basis, reference, n_thirds))) ** 2)


def default_times(g: float, periods: float, per_period: int = 40) -> np.ndarray:
    T = circulation_period(g)
    n = int(np.ceil(periods * per_period))
    return np.arange(n + 1) * (T / per_period)


def circulate_fock(params: ModelParams, N: int | None = None, times=None, *,
                   qubit=PLUS, source_cavity: int = 3,
                   pert: Perturbation | PerturbationSpec | None = None,
                   method: str = "auto", with_fidelity: bool = False, **kw) -> TimeSeries:
    """Evolve ``|N>_source |qubit>`` in the rotating frame."""
    N = params.N if N is None else int(N)
    if params.N != N:
        params = ModelParams(params.g, params.delta, params.omega, N)
    basis = enumerate_sector(N)
    H = build_hamiltonian(basis, params, pert)
    if times is None:
        times = default_times(params.g, 2)
    psi0 = fock_state(basis, source_cavity, np.asarray(qubit, dtype=complex))
    ref = psi0 if with_fidelity else None
    return evolve_sector(H, psi0, times, basis, reference=ref, method=method, **kw)


def poisson_window(nbar: float, tail_tol: float = 1e-8) -> tuple[int, int]:
    """Smallest symmetric-tail sector range whose omitted Poisson weight is below ``tail_tol``."""
    if not 0 < tail_tol < 1:
        raise ValueError("tail_tol must be in (0, 1)")
    lo = int(poisson.ppf(tail_tol / 2, nbar))
    hi = int(poisson.isf(tail_tol / 2, nbar))
    return lo, hi


def circulate_coherent(params: ModelParams, alpha: complex, times=None, tail_tol: float = 1e-8,
                       *, qubit=PLUS, source_cavity: int = 3, method: str = "auto",
                       **kw) -> TimeSeries:
    """Coherent state ``|alpha>`` in the source cavity.

    Every reported observable commutes with the total photon number, so the
    series is the Poisson-weighted sum of independent sector evolutions.
    Weights are renormalized over the kept sectors.
    """
    nbar = abs(alpha) ** 2
    if not nbar > 0:
        raise ValueError("alpha must be nonzero")
    lo, hi = poisson_window(nbar, tail_tol)
    Ns = np.arange(lo, hi + 1)
    if len(Ns) < 3:
        raise ValueError(f"tail_tol={tail_tol} keeps fewer than 3 sectors")
    w = poisson.pmf(Ns, nbar)
    w = w / w.sum()
    if times is None:
        times = default_times(params.g, 2)
    times = np.asarray(times, dtype=float)
    n_exp = np.zeros((3, len(times)))
    s_exp = np.zeros((3, len(times)))
    for N, wN in zip(Ns, w):
        ts = circulate_fock(params, int(N), times, qubit=qubit, source_cavity=source_cavity,
                            method=method, **kw)
        n_exp += wN * ts.n_exp
        s_exp += wN * ts.sigma_exp
    return TimeSeries(times, n_exp, s_exp)


def detect_revivals(series: TimeSeries, T: float, q_max: int, source_cavity: int = 3,
                    min_per_period: int = 40) -> list[RevivalRecord]:
    """Peak of ``<n_source>`` in each window ``((q - 1/2) T, (q + 1/2) T]``."""
    t = series.times
    if t[-1] < (q_max + 0.5) * T * (1 - 1e-12):
        raise ValueError("revival window extends beyond the simulated time")
    if len(t) > 1 and np.median(np.diff(t)) > T / min_per_period * (1 + 1e-9):
        raise ValueError(f"need at least {min_per_period} samples per period")
    y = series.n_exp[source_cavity - 1]
    out = []
    for q in range(1, q_max + 1):
        sel = np.flatnonzero((t > (q - 0.5) * T) & (t <= (q + 0.5) * T * (1 + 1e-12)))
        k = sel[np.argmax(y[sel])]
        out.append(RevivalRecord(q, float(t[k]), float(y[k])))
    return out


def upward_crossings(times, signal) -> np.ndarray:
    """Linearly interpolated times where ``signal`` crosses zero going up."""
    times = np.asarray(times, dtype=float)
    s = np.asarray(signal, dtype=float)
    k = np.flatnonzero((s[:-1] < 0) & (s[1:] >= 0))
    return times[k] - s[k] * (times[k + 1] - times[k]) / (s[k + 1] - s[k])


def crossing_period(times, signal) -> float:
    c = upward_crossings(times, signal)
    if len(c) < 2:
        raise ValueError("fewer than two upward zero crossings")
    return float((c[-1] - c[0]) / (len(c) - 1))


# ---------------------------------------------------------------- lifetimes

@dataclass
class LifetimeTable:
    N: int
    t_mean: np.ndarray      # realization-averaged t_q
    peak_mean: np.ndarray   # realization-averaged peak / N
    t_star: float
    censored: bool


@dataclass
class LifetimeResult:
    tables: list[LifetimeTable]
    beta: float
    prefactor: float
    threshold: float

    def t_star(self) -> dict[int, float]:
        return {tb.N: tb.t_star for tb in self.tables}

    def write_revivals_csv(self, path, header_line: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh)
            w.writerow(["N", "q", "t_q", "peak"])
            for tb in self.tables:
                for q, (t, p) in enumerate(zip(tb.t_mean, tb.peak_mean), start=1):
                    w.writerow([tb.N, q, f"{t:.17g}", f"{p * tb.N:.17g}"])


def _revival_task(args):
    N, g, delta, pert, q_max, per_period = args
    T = circulation_period(g)
    times = default_times(g, q_max + 0.5, per_period)
    ts = circulate_fock(ModelParams(g=g, delta=delta, N=N), N, times, pert=pert)
    recs = detect_revivals(ts, T, q_max, min_per_period=per_period)
    return np.array([r.t_q for r in recs]), np.array([r.peak for r in recs]) / N


def lifetime_crossing(t_mean, peak_mean, threshold: float = 0.9) -> tuple[float, bool]:
    """Time at which the averaged revival peak first drops below ``threshold``.

    Linear interpolation between the bracketing revivals; a drop before the
    first revival interpolates from ``(0, 1)``.  Returns ``(t_last, True)``
    when no revival falls below threshold (censored).
    """
    below = np.flatnonzero(peak_mean < threshold)
    if not below.size:
        return float(t_mean[-1]), True
    k = below[0]
    t0, p0 = (0.0, 1.0) if k == 0 else (t_mean[k - 1], peak_mean[k - 1])
    t1, p1 = t_mean[k], peak_mean[k]
    return float(t0 + (p0 - threshold) * (t1 - t0) / (p0 - p1)), False


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def lifetime_sweep(Ns, pert: PerturbationSpec, R: int, q_max: int, *, g: float = 1.0,
                   delta: float = 0.0, threshold: float = 0.9, per_period: int = 40,
                   workers: int | None = None) -> LifetimeResult:
    """Disorder-averaged revival decay and the exponent of ``t* ~ N^beta``.

    Realization ``r`` uses the perturbation stream ``(seed, r)`` for every N.
    ``t_q`` and peaks are averaged separately over realizations, in index
    order, before the threshold crossing is located.
    """
    if R < 1:
        raise ValueError("need at least one realization")
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    deterministic = pert.kind == "none" or pert.strength == 0
    R_eff = 1 if deterministic else R
    tasks = [(int(N), g, delta, sample_perturbation(pert, r), q_max, per_period)
             for N in Ns for r in range(R_eff)]
    nw = resolve_workers(workers)
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(_revival_task, tasks))
    else:
        results = [_revival_task(t) for t in tasks]

    tables = []
    for i, N in enumerate(Ns):
        chunk = results[i * R_eff:(i + 1) * R_eff]
        t_mean = np.mean([c[0] for c in chunk], axis=0)
        p_mean = np.mean([c[1] for c in chunk], axis=0)
        t_star, cens = lifetime_crossing(t_mean, p_mean, threshold)
        tables.append(LifetimeTable(int(N), t_mean, p_mean, t_star, cens))
    ok = [tb for tb in tables if not tb.censored]
    if len(ok) >= 2:
        slope, icpt = np.polyfit(np.log([tb.N for tb in ok]), np.log([tb.t_star for tb in ok]), 1)
        beta, pref = float(slope), float(np.exp(icpt))
    else:
        beta = pref = float("nan")
    return LifetimeResult(tables, beta, pref, threshold)
