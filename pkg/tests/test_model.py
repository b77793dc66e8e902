import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from maxregion.errors import DegenerateMatrixError, DomainError
from maxregion.model import (AnisotropyParams, GlobalParams, PairData, bivariate_log_density,
                             build_matrices, build_matrix, corr_matrix_nonstationary,
                             corr_matrix_stationary, corr_nonstationary, corr_stationary,
                             exponent_V, exponent_V_partials, omega, theta_theoretical)

G1 = GlobalParams(1.0, 1.0)
G5 = GlobalParams(5.0, 1.0)

pos = st.floats(0.05, 20.0)
rhos = st.floats(-0.9, 0.99)
nus = st.floats(1.0, 12.0)
angles = st.floats(0.0, math.pi, exclude_max=True)


def mixed_fd(F, y1, y2, h1, h2):
    """Central mixed second difference with one Richardson step."""
    def d(a, b):
        return (F(y1 + a, y2 + b) - F(y1 + a, y2 - b) - F(y1 - a, y2 + b)
                + F(y1 - a, y2 - b)) / (4 * a * b)
    return (4 * d(h1 / 2, h2 / 2) - d(h1, h2)) / 3


def central(f, x, h):
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


# --- matrices and correlations ---------------------------------------------

def test_matrix_with_zero_b_and_zero_angle():
    assert np.allclose(build_matrix(AnisotropyParams(2, 0, 0)), [[0, 0.5], [-0.5, 0]])


def test_identity_matrix_case():
    assert np.allclose(build_matrix(AnisotropyParams(1, 1, math.pi / 2)), np.eye(2))


def test_diagonal_matrix_case():
    assert np.allclose(build_matrix(AnisotropyParams(2, 3, math.pi / 2)), [[0.5, 0], [0, 1 / 3]])


def test_zero_b_with_nonzero_angle_is_degenerate():
    with pytest.raises(DegenerateMatrixError):
        build_matrix(AnisotropyParams(2, 0, 0.3))


def test_invalid_params_rejected():
    with pytest.raises(DomainError):
        AnisotropyParams(-1, 1, 0)
    with pytest.raises(DomainError):
        AnisotropyParams(1, 1, math.pi)
    with pytest.raises(DomainError):
        GlobalParams(0.5, 1.0)
    with pytest.raises(DomainError):
        GlobalParams(2.0, 2.5)


def test_zero_angle_matrix_is_isotropic():
    A = build_matrix(AnisotropyParams(2, 1, 0))
    for ang in np.linspace(0, math.pi, 7):
        h = np.array([math.cos(ang), math.sin(ang)])
        assert np.linalg.norm(A @ h) == pytest.approx(1 / 3)


def test_rotation_form_axes():
    A = build_matrix(AnisotropyParams(1, 2, math.pi / 6), form="rotation")
    major = np.array([math.cos(math.pi / 6), math.sin(math.pi / 6)])
    minor = np.array([-math.sin(math.pi / 6), math.cos(math.pi / 6)])
    assert np.linalg.norm(A @ major) == pytest.approx(1 / 3)
    assert np.linalg.norm(A @ minor) == pytest.approx(1.0)


@given(a=pos, b=pos, g=angles)
def test_vectorized_matrices_match_scalar(a, b, g):
    many = build_matrices(np.array([a]), np.array([b]), np.array([g]))
    assert np.allclose(many[0], build_matrix(AnisotropyParams(a, b, g)))


def test_stationary_correlation_values():
    assert corr_stationary(np.eye(2), 1.0, [0, 0]) == 1.0
    assert corr_stationary(np.eye(2), 1.0, [1, 0]) == pytest.approx(math.exp(-1))
    assert corr_stationary(np.eye(2), 2.0, [1, 1]) == pytest.approx(math.exp(-2))
    assert corr_stationary(np.eye(2), 2.0, [1, 1]) == pytest.approx(0.135335, abs=1e-6)


def test_nonstationary_prefactor_example():
    # Omega1 = I, Omega2 = 4 I  <=>  A2 = I / 2
    assert corr_nonstationary(np.eye(2), 0.5 * np.eye(2), 1.0, [1, 2], [1, 2]) == pytest.approx(0.8)


def test_omega_inverse():
    A = build_matrix(AnisotropyParams(1.5, 0.7, 1.1))
    assert np.allclose(omega(A) @ (A.T @ A), np.eye(2))


def test_singular_matrix_rejected():
    with pytest.raises(DegenerateMatrixError):
        omega(np.array([[1.0, 2.0], [2.0, 4.0]]))


@given(a=pos, b=pos, g=angles, alpha=st.floats(0.1, 2.0),
       s1=st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
       s2=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_nonstationary_reduces_to_stationary(a, b, g, alpha, s1, s2):
    A = build_matrix(AnisotropyParams(a, b, g))
    ns = corr_nonstationary(A, A, alpha, s1, s2)
    st_ = corr_stationary(A, alpha, np.subtract(s1, s2))
    assert ns == pytest.approx(st_, rel=1e-9, abs=1e-300)
    assert corr_nonstationary(A, A, alpha, s1, s1) == pytest.approx(1.0, abs=1e-12)


def test_nonstationary_matrix_matches_pairwise(rng):
    coords = rng.uniform(-3, 3, (12, 2))
    mats = build_matrices(rng.uniform(0.5, 3, 12), rng.uniform(0.5, 3, 12),
                          rng.uniform(0, math.pi, 12))
    C = corr_matrix_nonstationary(coords, mats, 1.3)
    for i in range(12):
        for j in range(12):
            ref = corr_nonstationary(mats[i], mats[j], 1.3, coords[i], coords[j])
            assert C[i, j] == pytest.approx(ref, rel=1e-10)
    assert np.all(np.linalg.eigvalsh(C) > -1e-10)


def test_constant_field_matrix_equals_stationary(rng):
    coords = rng.uniform(-3, 3, (10, 2))
    A = build_matrix(AnisotropyParams(2, 1, 0.4))
    C1 = corr_matrix_stationary(coords, A, 1.0)
    C2 = corr_matrix_nonstationary(coords, np.repeat(A[None], 10, axis=0), 1.0)
    assert np.allclose(C1, C2, atol=1e-14)


# --- exponent function -----------------------------------------------------

def test_exponent_checkpoint():
    assert exponent_V(1.0, 1.0, 0.0, G1) == pytest.approx(1 + 1 / math.sqrt(2), abs=1e-12)
    assert exponent_V(2.0, 2.0, 0.0, G1) == pytest.approx(0.853553, abs=1e-6)


def test_exponent_comonotone_limit():
    assert exponent_V(1.0, 1.0, 1 - 1e-12, G5) == pytest.approx(1.0, abs=1e-5)


def test_exponent_domain():
    with pytest.raises(DomainError):
        exponent_V(1.0, 1.0, 1.0, G5)
    with pytest.raises(DomainError):
        exponent_V(-1.0, 1.0, 0.2, G5)


@given(y1=pos, y2=pos, rho=rhos, nu=nus, c=st.floats(0.01, 100.0))
def test_homogeneity(y1, y2, rho, nu, c):
    g = GlobalParams(nu, 1.0)
    V = exponent_V(y1, y2, rho, g)
    assert abs(c * exponent_V(c * y1, c * y2, rho, g) - V) <= 1e-10 * V


@given(y=st.floats(0.1, 10.0), rho=rhos, nu=nus)
def test_marginal_consistency(y, rho, nu):
    assert exponent_V(y, 1e8, rho, GlobalParams(nu, 1.0)) == pytest.approx(1 / y, abs=1e-6)


def test_partials_at_checkpoint():
    v1, _, _ = exponent_V_partials(1.0, 1.0, 0.0, G1)
    fd = central(lambda t: exponent_V(t, 1.0, 0.0, G1), 1.0, 1e-3)
    assert v1 == pytest.approx(fd, abs=1e-6)


@given(y=pos, rho=rhos, nu=nus)
def test_partials_symmetric_on_diagonal(y, rho, nu):
    v1, v2, _ = exponent_V_partials(y, y, rho, GlobalParams(nu, 1.0))
    assert v1 == pytest.approx(v2, rel=1e-12)


@given(y1=st.floats(0.2, 8.0), y2=st.floats(0.2, 8.0), rho=rhos, nu=nus)
def test_partials_homogeneity(y1, y2, rho, nu):
    g = GlobalParams(nu, 1.0)
    a = exponent_V_partials(y1, y2, rho, g)
    b = exponent_V_partials(2 * y1, 2 * y2, rho, g)
    # V(c y) = V(y) / c  =>  V_i(c y) = V_i(y) / c^2 and V_12(c y) = V_12(y) / c^3
    assert b[0] == pytest.approx(a[0] / 4, rel=1e-10)
    assert b[1] == pytest.approx(a[1] / 4, rel=1e-10)
    assert b[2] == pytest.approx(a[2] / 8, rel=1e-10)


@given(y1=st.floats(0.3, 6.0), y2=st.floats(0.3, 6.0), rho=st.floats(-0.6, 0.95),
       nu=st.floats(1.0, 10.0))
def test_partials_match_finite_differences(y1, y2, rho, nu):
    g = GlobalParams(nu, 1.0)
    v1, v2, v12 = exponent_V_partials(y1, y2, rho, g)
    f1 = central(lambda t: exponent_V(t, y2, rho, g), y1, 1e-3 * y1)
    f2 = central(lambda t: exponent_V(y1, t, rho, g), y2, 1e-3 * y2)
    f12 = mixed_fd(lambda a, b: exponent_V(a, b, rho, g), y1, y2, 1e-3 * y1, 1e-3 * y2)
    assert v1 == pytest.approx(f1, rel=1e-5)
    assert v2 == pytest.approx(f2, rel=1e-5)
    assert v12 == pytest.approx(f12, rel=1e-5, abs=1e-9 * abs(v1 * v2))


# --- density ----------------------------------------------------------------

def test_density_matches_mixed_difference_at_reference_point():
    F = lambda a, b: math.exp(-exponent_V(a, b, 0.5, G5))  # noqa: E731
    fd = mixed_fd(F, 1.3, 0.7, 1e-3, 1e-3)
    assert math.exp(bivariate_log_density(1.3, 0.7, 0.5, G5)) == pytest.approx(fd, rel=1e-4)


@given(y1=pos, y2=pos, rho=rhos, nu=nus)
def test_density_symmetric(y1, y2, rho, nu):
    g = GlobalParams(nu, 1.0)
    assert bivariate_log_density(y1, y2, rho, g) == pytest.approx(
        bivariate_log_density(y2, y1, rho, g), rel=1e-9, abs=1e-9)


def test_density_integrates_to_joint_cdf():
    Y = 2.0
    dens = lambda b, a: math.exp(bivariate_log_density(a, b, 0.5, G5))  # noqa: E731
    val, _ = integrate.dblquad(dens, 1e-3, Y, 1e-3, Y, epsabs=1e-7)
    assert val == pytest.approx(math.exp(-exponent_V(Y, Y, 0.5, G5)), abs=1e-3)


# --- extremal coefficient ---------------------------------------------------

def test_theta_values():
    assert theta_theoretical(1.0, G5) == 1.0
    assert theta_theoretical(0.0, G1) == pytest.approx(1 + 1 / math.sqrt(2), abs=1e-12)
    assert theta_theoretical(0.5, G5) < theta_theoretical(0.0, G5)


@pytest.mark.parametrize("nu", [1.0, 2.5, 5.0, 9.0])
def test_theta_bounded_and_decreasing(nu):
    rho = np.linspace(-0.999, 1.0, 400)
    th = theta_theoretical(rho, GlobalParams(nu, 1.0))
    assert np.all((th >= 1) & (th <= 2))
    assert np.all(np.diff(th) <= 0)


def test_theta_equals_exponent_at_one():
    for rho in (-0.5, 0.1, 0.8):
        assert theta_theoretical(rho, G5) == pytest.approx(exponent_V(1, 1, rho, G5), rel=1e-12)


# --- pair kernels -------------------------------------------------------------

@pytest.mark.parametrize("nu", [1.0, 2.0, 3.0, 4.5, 5.0, 7.0])
def test_pair_kernel_matches_density(nu, rng):
    g = GlobalParams(nu, 1.0)
    data = 1.0 / -np.log(rng.uniform(size=(40, 4)))
    pd = PairData(data)
    pi = np.array([0, 0, 1, 2])
    pj = np.array([1, 3, 2, 3])
    rho = np.array([0.2, -0.3, 0.9, 0.999999])
    got = pd.work(pi, pj, nu).nll_each(rho)
    for p in range(4):
        ref = -np.sum(bivariate_log_density(data[:, pi[p]], data[:, pj[p]], rho[p], g))
        assert got[p] == pytest.approx(ref, rel=1e-8)
