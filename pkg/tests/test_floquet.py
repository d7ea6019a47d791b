import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import G as G_oracle
from oracles import SX, SY, SZ
from photon_lattice.floquet import (DriveSpec, LeakageError, TruncatedProductBasis,
                                    default_drive_solution, drive_alpha, effective_hamiltonian,
                                    floquet_run, fourier_components, lab_hamiltonian,
                                    magnus_first_order, min_drive_frequency, rz,
                                    stroboscopic_evolve, target_match_residual, validity_report)
from photon_lattice.sector_basis import enumerate_sector

PAULI = np.array([SX, SY, SZ])


def sig(v):
    return np.tensordot(v, PAULI, axes=1)


@pytest.fixture(scope="module")
def small_basis():
    return TruncatedProductBasis.build(2)


def test_zero_drive_has_no_harmonics(small_basis):
    d = DriveSpec(np.zeros((3, 3)), np.zeros((3, 3)), 100.0, omega_0=1.0, delta_0=0.5)
    Hp, Hm, _ = fourier_components(d, small_basis)
    assert Hp.nnz == 0 or abs(Hp).max() == 0
    assert Hm.nnz == 0 or abs(Hm).max() == 0


def test_harmonic_reconstruction(small_basis):
    d = default_drive_solution(1.0, 50.0, N=1, omega_0=3.0)
    Hp, Hm, H0 = fourier_components(d, small_basis)
    for t in np.random.default_rng(0).uniform(0, 10, 20):
        rebuilt = H0 + Hp * np.exp(-1j * d.omega_d * t) + Hm * np.exp(1j * d.omega_d * t)
        assert abs(rebuilt - lab_hamiltonian(d, small_basis, t)).max() < 1e-12


def test_harmonics_by_quadrature(small_basis):
    d = default_drive_solution(0.7, 20.0, N=1, omega_0=2.0)
    Hp, Hm, H0 = fourier_components(d, small_basis)
    ts = np.arange(10_000) * d.period / 10_000
    # H(t) is affine in (cos, sin): assemble it from three evaluations, then
    # integrate against exp(+-i omega_d t) on the full grid
    H_0 = lab_hamiltonian(d, small_basis, 0.0).toarray()
    H_q = lab_hamiltonian(d, small_basis, d.period / 4).toarray()
    H_h = lab_hamiltonian(d, small_basis, d.period / 2).toarray()
    const, cos_part, sin_part = (H_0 + H_h) / 2, (H_0 - H_h) / 2, H_q - (H_0 + H_h) / 2
    c, s = np.cos(d.omega_d * ts), np.sin(d.omega_d * ts)
    for sign, ref in ((1, Hp), (-1, Hm)):
        e = np.exp(sign * 1j * d.omega_d * ts)
        quad = const * e.mean() + cos_part * (c * e).mean() + sin_part * (s * e).mean()
        assert np.abs(quad - ref.toarray()).max() < 1e-8
    quad0 = const + cos_part * c.mean() + sin_part * s.mean()
    assert np.abs(quad0 - H0.toarray()).max() < 1e-8
    # the affine form itself reproduces H(t) at random times
    for t in np.random.default_rng(1).uniform(0, d.period, 5):
        direct = lab_hamiltonian(d, small_basis, t).toarray()
        wt = d.omega_d * t
        assert np.abs(const + np.cos(wt) * cos_part + np.sin(wt) * sin_part - direct).max() < 1e-12


@pytest.mark.parametrize("g,wd", [(1.0, 5000.0), (0.5, 300.0), (-1.3, 800.0), (1.0, -400.0)])
def test_alpha_matches_target_couplings(g, wd):
    alpha, h = drive_alpha(default_drive_solution(g, wd))
    # the target couples b_i^dag b_{i+1} with G_{i-1}
    for i, k in ((0, 3), (1, 1), (2, 2)):
        assert np.abs(sig(alpha[i, (i + 1) % 3]) - G_oracle(k, g)).max() < 1e-12
        assert np.abs(sig(alpha[(i + 1) % 3, i]) - G_oracle(k, g).conj().T).max() < 1e-12
    for j in range(3):
        assert np.abs(sig(alpha[j, j]) - 2 * g * SZ).max() < 1e-12
    assert np.allclose(h, [0, 0, 3 * g], atol=1e-12)


def test_alpha_scales_inverse_frequency():
    d = default_drive_solution(1.0, 100.0)
    a1, _ = magnus_first_order(*d.harmonics(), 100.0)
    a2, _ = magnus_first_order(*d.harmonics(), 200.0)
    assert np.allclose(a2, a1 / 2, atol=1e-15)
    with pytest.raises(ValueError):
        magnus_first_order(*d.harmonics(), 0.0)


@given(st.floats(0.1, 3), st.floats(10, 1e4), st.booleans())
def test_covariance_of_default_solution(g, wd, flip):
    d = default_drive_solution(-g if flip else g, wd)
    assert d.covariance_residual() < 1e-12 * max(1.0, np.abs(d.A).max())


def test_explicit_amplitudes():
    g, wd = 0.8, 600.0
    d = default_drive_solution(g, wd)
    a = np.sqrt(g * wd / 6)
    assert np.allclose(d.A[2], a * np.array([np.sqrt(3), np.sqrt(3), -1j]))
    assert np.allclose(d.B[2], a * np.array([np.sqrt(3), -np.sqrt(3), 1j]))
    assert np.allclose(d.A[0], rz(2 * np.pi / 3) @ d.A[2])
    assert default_drive_solution(g, wd, N=4).delta_0 == pytest.approx(-g * 11)


def test_sign_flip_only_changes_A():
    p, m = default_drive_solution(1.0, 900.0), default_drive_solution(-1.0, 900.0)
    assert np.allclose(m.A, -p.A) and np.allclose(m.B, p.B)
    b = enumerate_sector(5)
    assert target_match_residual(p, 1.0, b) < 1e-10
    assert target_match_residual(m, -1.0, b) < 1e-10
    assert target_match_residual(p, -1.0, b) > 0.1


@pytest.mark.parametrize("N", range(0, 11))
def test_effective_hamiltonian_matches_target(N):
    b = enumerate_sector(N)
    for g in (1.0, 0.35):
        d = default_drive_solution(g, 5000.0, N=N)
        assert target_match_residual(d, g, b) <= 1e-10 * g


def test_solution_family_null_directions():
    g, wd = 1.0, 2000.0
    d0 = default_drive_solution(g, wd)
    R = rz(2 * np.pi / 3)

    def drive(p):
        A3, B3 = p[0:3] + 1j * p[3:6], p[6:9] + 1j * p[9:12]
        return DriveSpec(np.stack([R @ A3, R @ R @ A3, A3]), np.stack([R @ B3, R @ R @ B3, B3]), wd)

    def a12(p):
        v = drive_alpha(drive(p))[0][0, 1]
        return np.concatenate([v.real, v.imag])

    p0 = np.concatenate([d0.A[2].real, d0.A[2].imag, d0.B[2].real, d0.B[2].imag])
    h = 1e-6
    J = np.array([(a12(p0 + h * e) - a12(p0 - h * e)) / (2 * h) for e in np.eye(12)]).T
    _, s, vt = np.linalg.svd(J)
    null = vt[np.sum(s > 1e-8 * s[0]):]
    assert null.shape == (6, 12)
    b = enumerate_sector(4)
    H0 = effective_hamiltonian(d0, b)
    rng = np.random.default_rng(3)
    step = 1e-4 * np.linalg.norm(p0)
    for _ in range(3):
        v = rng.normal(size=6) @ null
        v /= np.linalg.norm(v)
        moved = abs(effective_hamiltonian(drive(p0 + step * v), b) - H0).max()
        w = rng.normal(size=12)
        generic = abs(effective_hamiltonian(drive(p0 + step * w / np.linalg.norm(w)), b) - H0).max()
        # second order along the manifold, first order off it
        assert moved < 1e-3 * generic


def test_validity_report():
    r = validity_report(1.0, 6, 10.0, 5000.0)
    assert r["H1_scale"] == 18 and r["rwa_ratio"] == 10
    assert r["H2_scale"] == pytest.approx(20 * 36 / (9 * 5000))
    assert r["magnus_ratio"] == pytest.approx(20 * 6 / (27 * 5000))
    assert validity_report(1.0, 67, 10.0, 5000.0)["magnus_ratio"] < 0.1
    # ratio < 0.1 exactly when omega_d > (200/27) g N
    assert validity_report(1.0, 10, 10.0, 200 / 27 * 10 * 1.001)["magnus_ratio"] < 0.1
    assert validity_report(1.0, 10, 10.0, 200 / 27 * 10 * 0.999)["magnus_ratio"] > 0.1
    assert min_drive_frequency(1.0, 10) == pytest.approx(200 / 27 * 10)
    assert min_drive_frequency(1.0, 20) == pytest.approx(2 * min_drive_frequency(1.0, 10))
    assert validity_report(1.0, 10, 10.0, min_drive_frequency(1.0, 10))["magnus_ratio"] == pytest.approx(0.1)
    with pytest.raises(ValueError):
        validity_report(1.0, 0, 10.0, 100.0)


def test_truncated_basis():
    tb = TruncatedProductBasis.build(3)
    assert tb.dim == 2 * 4**3
    a = tb.mode_op(2).toarray()
    psi = tb.product_state((1, 2, 0), np.array([1, 0]))
    out = a @ psi
    assert out[tb.index_of(np.array((1, 1, 0)), 1)] == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        TruncatedProductBasis.build(0)


def test_zero_drive_populations_constant():
    tb = TruncatedProductBasis.build(3)
    d = DriveSpec(np.zeros((3, 3)), np.zeros((3, 3)), 100.0, omega_0=10.0, delta_0=0.0)
    psi = tb.product_state((0, 1, 2), np.array([1, 1]) / np.sqrt(2))
    for method in ("dense", "vector"):
        s = stroboscopic_evolve(d, tb, psi, 6, 2, 16, leak_tol=1.0, method=method)
        assert np.allclose(s.n_exp, np.array([[0], [1], [2]]), atol=1e-13)
        assert list(s.q) == [0, 2, 4, 6]


def test_dense_and_vector_paths_agree():
    tb = TruncatedProductBasis.build(3)
    d = default_drive_solution(1.0, 200.0, N=1, omega_0=20.0)
    psi = tb.product_state((0, 0, 1), np.array([1, 1]) / np.sqrt(2))
    a = stroboscopic_evolve(d, tb, psi, 5, 1, 32, leak_tol=1.0, method="dense")
    b = stroboscopic_evolve(d, tb, psi, 5, 1, 32, leak_tol=1.0, method="vector")
    assert np.abs(a.n_exp - b.n_exp).max() < 1e-10


def test_leakage_aborts():
    tb = TruncatedProductBasis.build(2)
    d = default_drive_solution(1.0, 50.0, N=1, omega_0=0.0)
    psi = tb.product_state((0, 0, 1), np.array([1, 0]))
    with pytest.raises(LeakageError):
        stroboscopic_evolve(d, tb, psi, 20, 1, 32, leak_tol=1e-12)


def test_deviation_grows_as_drive_slows():
    # omega_0 = 100 puts the rotating-wave error well below the 1/omega_d term
    dev = [floquet_run(1.0, 2, 100.0, wd, periods_T=1.0, n_max=5, sample_every=100,
                       leak_tol=1e-4).deviation[-1] for wd in (8000.0, 4000.0, 2000.0)]
    assert dev[1] >= 2 * dev[0] and dev[2] >= 2 * dev[1]


def test_stroboscopic_csv(tmp_path):
    s = floquet_run(1.0, 1, 50.0, 2000.0, periods_T=0.05, n_max=3, sample_every=4, leak_tol=1e-2)
    s.write_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "q,t,n1,n2,n3,total_N_rotating,deviation_vs_static"
    assert len(lines) == len(s.q) + 1
