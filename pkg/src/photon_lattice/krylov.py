"""Short-iterate Lanczos propagator for ``exp(-i H t) psi`` with Hermitian sparse ``H``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class KrylovError(RuntimeError):
    def __init__(self, msg: str, achieved: float):
        super().__init__(f"{msg} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


@dataclass
class KrylovStats:
    steps: int = 0
    matvecs: int = 0
    max_error: float = 0.0


class KrylovPropagator:
    """Adaptive-step Lanczos exponential.

    Each step builds an ``m``-dimensional Krylov space with full
    reorthogonalization, then takes the largest sub-step (by halving) whose
    a-posteriori error estimate ``beta_m |[exp(-i tau T_m)]_{m,1}|`` is below
    ``tol``.  Errors are per step and add up over many steps.
    """

    def __init__(self, H, m: int = 30, tol: float = 1e-10, min_step: float = 1e-12):
        if m < 2:
            raise ValueError("Krylov dimension must be >= 2")
        self.H = H
        self.m = int(m)
        self.tol = float(tol)
        self.min_step = float(min_step)
        self.stats = KrylovStats()
        self._tau = None  # last accepted step size, reused as a first guess

    def _lanczos(self, v: np.ndarray):
        dim = v.shape[0]
        m = min(self.m, dim)
        V = np.zeros((m + 1, dim), dtype=complex)  # rows are basis vectors
        alpha = np.zeros(m)
        beta = np.zeros(m)
        nrm = np.linalg.norm(v)
        V[0] = v / nrm
        for j in range(m):
            w = self.H @ V[j]
            self.stats.matvecs += 1
            alpha[j] = np.vdot(V[j], w).real
            w -= alpha[j] * V[j]
            if j:
                w -= beta[j - 1] * V[j - 1]
            Q = V[:j + 1]
            w -= (Q @ w.conj()).conj() @ Q
            b = np.linalg.norm(w)
            beta[j] = b
            if b < 1e-12 * max(1.0, abs(alpha[j])):
                # invariant subspace: the projection is exact
                return V[:j + 1], alpha[:j + 1], beta[:j], 0.0, nrm
            V[j + 1] = w / b
        return V[:m], alpha, beta[:m - 1], beta[m - 1], nrm

    def _expm_tridiag(self, alpha, beta, tau):
        if len(alpha) == 1:
            return np.array([np.exp(-1j * tau * alpha[0])])
        w, Q = sla.eigh_tridiagonal(alpha, beta)
        return Q @ (np.exp(-1j * tau * w) * Q[0].conj())

    def propagate(self, psi: np.ndarray, t: float) -> np.ndarray:
        """Return ``exp(-i H t) psi``; ``t`` may be negative."""
        psi = np.asarray(psi, dtype=complex)
        if t == 0 or not np.any(psi):
            return psi.copy()
        sign = np.sign(t)
        remaining = abs(t)
        while remaining > 0:
            V, alpha, beta, b_last, nrm = self._lanczos(psi)
            tau = min(remaining, self._tau * 2 if self._tau else remaining)
            while True:
                y = self._expm_tridiag(alpha, beta, sign * tau)
                err = nrm * b_last * abs(y[-1])
                if err <= self.tol or b_last == 0.0:
                    break
                if tau < self.min_step:
                    raise KrylovError("Krylov step size underflow", err)
                tau /= 2
            psi = nrm * (y @ V)
            remaining -= tau
            if remaining < 1e-14 * abs(t):
                remaining = 0.0
            self._tau = tau
            self.stats.steps += 1
            self.stats.max_error = max(self.stats.max_error, err)
        return psi
