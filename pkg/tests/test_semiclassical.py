import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import SX, SY, SZ
from oracles import G as G_oracle
from photon_lattice.dynamics import circulate_fock
from photon_lattice.lda_topology import lda_boundary_constants, nu
from photon_lattice.operators import ModelParams
from photon_lattice.semiclassical import (ClassicalState, eom_derivative, energy,
                                          fock_like_state, integrate, measure_period,
                                          solve_circulating_point, trajectory_averages)

T_INF = 4 * np.pi / np.sqrt(3)


def classical_energy(y, g, delta):
    """Hamiltonian with each G_k(sigma) = sum_a tr(G_k s_a)/2 sigma_a, from raw matrices."""
    b = y[0:3] + 1j * y[3:6]
    s = y[6:9]
    Gs = [sum(np.trace(G_oracle(k, g) @ P) / 2 * s[a] for a, P in enumerate((SX, SY, SZ)))
          for k in (1, 2, 3)]
    H = delta * s[2]
    for j in range(3):
        term = np.conj(b[j]) * b[(j + 1) % 3] * Gs[(j - 1) % 3]
        H += 2 * term.real
    return H


def fd_flow(y, g, delta, h=1e-6):
    grad = np.zeros(9)
    for i in range(9):
        e = np.zeros(9)
        e[i] = h
        grad[i] = (classical_energy(y + e, g, delta) - classical_energy(y - e, g, delta)) / (2 * h)
    db = -1j * (grad[0:3] + 1j * grad[3:6]) / 2
    ds = np.cross(y[6:9], -2 * grad[6:9])
    return np.concatenate([db.real, db.imag, ds])


def random_state(rng, N=10.0):
    b = rng.normal(size=3) + 1j * rng.normal(size=3)
    b *= np.sqrt(N) / np.linalg.norm(b)
    s = rng.normal(size=3)
    return ClassicalState(b, s / np.linalg.norm(s))


def test_larmor_only_without_photons():
    st_ = ClassicalState(np.zeros(3), np.array([0.6, 0.0, 0.8]))
    d = eom_derivative(st_, ModelParams(g=1.0, delta=0.7))
    assert np.allclose(d.b, 0)
    assert np.allclose(d.sigma, np.cross(st_.sigma, [0, 0, -1.4]))


def test_matches_finite_difference_flow():
    rng = np.random.default_rng(5)
    for _ in range(10):
        s = random_state(rng)
        g, delta = rng.uniform(-2, 2), rng.uniform(-1, 1)
        fd = fd_flow(s.pack(), g, delta)
        an = eom_derivative(s, ModelParams(g=g, delta=delta)).pack()
        assert np.linalg.norm(an - fd) / np.linalg.norm(fd) < 1e-6
        assert energy(s, ModelParams(g=g, delta=delta)) == pytest.approx(
            classical_energy(s.pack(), g, delta), abs=1e-12)


def test_energy_stationary_along_flow():
    rng = np.random.default_rng(6)
    for _ in range(20):
        s = random_state(rng)
        p = ModelParams(g=rng.uniform(-2, 2), delta=rng.uniform(-1, 1))
        y, dy = s.pack(), eom_derivative(s, p).pack()
        h = 1e-6
        dE = (energy(ClassicalState.unpack(y + h * dy), p)
              - energy(ClassicalState.unpack(y - h * dy), p)) / (2 * h)
        assert abs(dE) < 1e-6 * max(1.0, np.abs(dy).max())


@pytest.fixture(scope="module")
def fixed_point_run():
    fp = solve_circulating_point(30, 0.0)
    return fp, integrate(fp.initial_state(), fp.params, 5 * fp.period, tol=1e-10)


def test_conservation_over_five_periods(fixed_point_run):
    _, tr = fixed_point_run
    assert np.abs(tr.photons.sum(axis=0) - 30).max() < 1e-8
    assert np.abs(np.linalg.norm(tr.sigma, axis=0) - 1).max() < 1e-8
    assert np.abs(tr.sigma[2]).max() < 1e-8


def test_generic_trajectory_conserves_energy():
    s = random_state(np.random.default_rng(9), 20.0)
    p = ModelParams(g=1.0, delta=0.3)
    tr = integrate(s, p, 3 * T_INF, tol=1e-10)
    assert np.ptp(tr.energies()) < 100 * 1e-10 * max(1.0, abs(energy(s, p)))
    assert np.abs(tr.photons.sum(axis=0) - 20).max() < 100 * 1e-10 * 20


def test_fixed_point_follows_nu(fixed_point_run):
    fp, tr = fixed_point_run
    x = tr.t / T_INF
    for j in range(3):
        assert np.abs(tr.photons[j] - 30 * nu(x - (j + 1) / 3)).max() < 1e-4 * 30


def test_exact_root():
    fp = solve_circulating_point(30, 0.0)
    # 2 pi / |B_z| must equal T_inf, which fixes |B_z| = sqrt(3) g / 2
    assert abs(fp.B_z) == pytest.approx(np.sqrt(3) / 2, rel=1e-15)
    assert fp.period == pytest.approx(T_INF, rel=1e-14)
    assert np.allclose(fp.x0, [0, 0, np.sqrt(30)], atol=1e-12)
    assert fp.residual() < 1e-10


@given(st.floats(-0.5, 0.5), st.floats(10, 500))
def test_root_residual(eps, N):
    assert solve_circulating_point(N, eps).residual() < 1e-10


def test_period_series():
    N, eps = 50, 0.2
    fp = solve_circulating_point(N, eps)
    series = T_INF * (1 - 3 * np.sqrt(3) / 16 * eps / N)
    assert abs(fp.period / series - 1) < 5 / N**2


def test_measured_period_at_fixed_point(fixed_point_run):
    _, tr = fixed_point_run
    assert abs(measure_period(tr) / T_INF - 1) < 1e-6


def test_period_deviation_scales_inverse_N():
    dev = {}
    for N in (30, 60):
        fp = solve_circulating_point(N, 0.3)
        tr = integrate(fp.initial_state(), fp.params, 4 * fp.period, tol=1e-11, n_samples=8001)
        dev[N] = measure_period(tr) - T_INF
    assert dev[30] / dev[60] == pytest.approx(2.0, rel=0.2)


def test_sign_of_g_reverses_order():
    first = {}
    for g in (1.0, -1.0):
        tr = integrate(fock_like_state(40), ModelParams(g=g), 0.4 * T_INF)
        k = np.argmin(abs(tr.t - T_INF / 3))
        first[g] = int(np.argmax(tr.photons[:, k])) + 1
    assert first == {1.0: 1, -1.0: 2}


def test_trajectory_averages(fixed_point_run):
    fp, tr = fixed_point_run
    d_ref, c_ref = lda_boundary_constants()
    d, c = trajectory_averages(tr, fp.period)
    assert abs(d / d_ref - 1) < 1e-4
    assert abs(c / c_ref - 1) < 1e-4


def test_frozen_state_has_no_circulation():
    tr = integrate(fock_like_state(10), ModelParams(g=0.0), 2.0)
    assert trajectory_averages(tr, 1.0)[1] == 0.0


def test_quantum_classical_correspondence():
    times = np.linspace(0, T_INF, 81)
    q = circulate_fock(ModelParams(N=40), 40, times)
    c = integrate(fock_like_state(40), ModelParams(), T_INF, n_samples=81)
    assert np.abs(q.n_exp - c.photons).max() / 40 < 0.05


def test_errors(tmp_path):
    with pytest.raises(ValueError):
        integrate(fock_like_state(1), ModelParams(), 1.0, tol=0)
    with pytest.raises(ValueError):
        solve_circulating_point(30, 0.1, g=0.0)
    tr = integrate(fock_like_state(1), ModelParams(), 0.5 * T_INF)
    with pytest.raises(ValueError):
        measure_period(tr)
    with pytest.raises(ValueError):
        trajectory_averages(tr, T_INF)
    with pytest.raises(ValueError):
        ClassicalState(np.zeros(2), np.zeros(3))
    tr.write_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "t,b1_sq,b2_sq,b3_sq,sx,sy,sz,energy"


def test_fast_rhs_matches_derivative():
    from photon_lattice.semiclassical import _rhs
    rng = np.random.default_rng(2)
    for _ in range(10):
        s = random_state(rng)
        p = ModelParams(g=rng.normal(), delta=rng.normal())
        assert np.abs(_rhs(p)(0.0, s.pack()) - eom_derivative(s, p).pack()).max() < 1e-13
