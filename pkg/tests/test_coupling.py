import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from spinpair.coupling import (
    Conformation,
    R_MIN,
    gamma_tensor,
    greens_dyadic,
    mean_nn_distance,
    nn_distance_cdf,
    sample_conformation,
    sample_nn_distance,
    zeta_tensor,
)

TWOPI = 2 * np.pi
K0 = TWOPI / 780e-9
GAMMA0 = TWOPI * 6.0666e6


def conf(xi, theta=0.0, phi=0.0):
    return Conformation(r=xi / K0, theta=theta, phi=phi, k0=K0)


def test_conformation_validation():
    with pytest.raises(ValueError):
        Conformation(r=0.0, theta=0.0, phi=0.0, k0=K0)
    with pytest.raises(ValueError):
        Conformation(r=1e-7, theta=4.0, phi=0.0, k0=K0)
    with pytest.raises(ValueError):
        Conformation(r=1e-7, theta=0.0, phi=7.0, k0=K0)
    c = conf(1.0, 0.3, 0.7)
    assert np.linalg.norm(c.n_hat) == pytest.approx(1.0)
    assert c.xi == pytest.approx(1.0)


def test_greens_far_field_decay():
    g = greens_dyadic(conf(1e4, 0.4, 1.0))
    assert np.max(np.abs(g)) < 1.5e-4   # O(1/xi)


def test_greens_value_at_xi_one():
    # transverse entry at xi=1, n = z: e^i * (1 + i - 1) = i e^i
    g = greens_dyadic(conf(1.0))
    assert g[0, 0] == pytest.approx(-np.sin(1.0) + 1j * np.cos(1.0))
    assert g[1, 1] == pytest.approx(g[0, 0])


@settings(max_examples=60, deadline=None)
@given(xi=st.floats(0.1, 50.0), theta=st.floats(0.0, np.pi),
       phi=st.floats(0.0, 2 * np.pi, exclude_max=True))
def test_cross_identity_and_tensor_form(xi, theta, phi):
    """zeta = -(3 g0/4) Re(G), gamma = (3 g0/4) Im(G); both a*I + b*nn."""
    c = conf(xi, theta, phi)
    g = greens_dyadic(c)
    z = zeta_tensor(c, GAMMA0)
    ga = gamma_tensor(c, GAMMA0)
    # entries agree to 1e-10 relative to the tensor scale (the independent
    # complex evaluation cancels digits near xi ~ 0.1, so the comparison is
    # scaled to the largest entry)
    assert np.max(np.abs(z - (-0.75 * GAMMA0 * g.real))) \
        <= 1e-10 * max(np.max(np.abs(z)), GAMMA0)
    assert np.max(np.abs(ga - 0.75 * GAMMA0 * g.imag)) \
        <= 1e-10 * max(np.max(np.abs(ga)), GAMMA0)
    # eigenbasis contains n: one longitudinal + two degenerate transverse
    n = c.n_hat
    for t in (z, ga):
        assert np.allclose(t, t.T)
        lon = n @ t @ n
        resid = t @ n - lon * n
        assert np.max(np.abs(resid)) < 1e-6 * max(np.max(np.abs(t)), 1.0)
        ev = np.linalg.eigvalsh(t)
        trans = [v for v in ev if not np.isclose(v, lon, rtol=1e-6,
                                                 atol=1e-4 * abs(lon) + 1e-3)]
        if len(trans) == 2:
            assert trans[0] == pytest.approx(trans[1], rel=1e-8)


def test_zeta_near_field_asymptotics():
    c = conf(0.01)
    z = zeta_tensor(c, GAMMA0)
    assert z[0, 0] == pytest.approx(0.75 * GAMMA0 / 0.01**3, rel=1e-2)
    assert z[2, 2] == pytest.approx(-1.5 * GAMMA0 / 0.01**3, rel=1e-2)


def test_zeta_at_xi_pi():
    z = zeta_tensor(conf(np.pi), GAMMA0)
    iso = 0.75 * GAMMA0 * (-1.0 / np.pi**3 + 1.0 / np.pi)
    assert z[0, 0] == pytest.approx(iso, rel=1e-12)
    assert z[1, 1] == pytest.approx(iso, rel=1e-12)


def test_zeta_diagonal_along_z():
    z = zeta_tensor(conf(0.8), GAMMA0)
    assert np.allclose(z, np.diag(np.diag(z)))
    assert z[0, 0] == pytest.approx(z[1, 1])
    assert z[0, 0] != pytest.approx(z[2, 2])


def test_gamma_contact_and_far_limits():
    g = gamma_tensor(conf(1e-4, 0.9, 2.2), GAMMA0)
    assert np.max(np.abs(g - 0.5 * GAMMA0 * np.eye(3))) < 1e-6 * GAMMA0
    g_far = gamma_tensor(conf(1e4, 0.9, 2.2), GAMMA0)
    assert np.max(np.abs(g_far)) < 1e-4 * GAMMA0


def test_gamma_even_in_n():
    c1 = conf(0.7, 0.4, 1.0)
    c2 = conf(0.7, np.pi - 0.4, 1.0 + np.pi)   # n -> -n
    assert np.allclose(gamma_tensor(c1, GAMMA0), gamma_tensor(c2, GAMMA0))
    assert np.allclose(zeta_tensor(c1, GAMMA0), zeta_tensor(c2, GAMMA0))


def test_series_branch_accuracy_at_switch():
    # long-double direct evaluation keeps ~6 digits past the float64
    # cancellation and shows the series branch is the accurate one below
    # the switch point
    from spinpair.coupling import _gamma_coeffs, _zeta_coeffs
    xi = np.longdouble("0.0009")
    cx, sx = np.cos(xi), np.sin(xi)
    ref_iso = float(sx / xi + cx / xi**2 - sx / xi**3)
    ref_lon = float(-sx / xi - 3 * cx / xi**2 + 3 * sx / xi**3)
    iso, lon = _gamma_coeffs(float(xi))
    assert iso == pytest.approx(ref_iso, rel=1e-10)
    assert lon == pytest.approx(ref_lon, rel=1e-7)
    # float64 direct evaluation is visibly worse on the small component
    cx64, sx64 = np.cos(9e-4), np.sin(9e-4)
    lon64 = -sx64 / 9e-4 - 3 * cx64 / 9e-4**2 + 3 * sx64 / 9e-4**3
    assert abs(lon64 - ref_lon) > 10 * abs(lon - ref_lon)
    # coherent-tensor series agrees too (no cancellation there)
    z_iso, z_lon = _zeta_coeffs(float(xi))
    ref_ziso = float(cx / xi**3 + sx / xi**2 - cx / xi)
    ref_zlon = float(cx / xi - 3 * cx / xi**3 - 3 * sx / xi**2)
    assert z_iso == pytest.approx(ref_ziso, rel=1e-9)
    assert z_lon == pytest.approx(ref_zlon, rel=1e-9)


def test_xi_must_be_positive():
    c = conf(1.0)
    object.__setattr__(c, "r", -1.0)
    with pytest.raises(ValueError):
        zeta_tensor(c, GAMMA0)
    with pytest.raises(ValueError):
        gamma_tensor(c, GAMMA0)
    with pytest.raises(ValueError):
        greens_dyadic(c)


def test_inverse_cdf_quantile():
    # u = 1 - 1/e maps to the e-folding radius (3/(4 pi N))^(1/3)
    n_cm3 = 1e14

    class _FakeRng:
        def random(self, size=None):
            return 1.0 - np.exp(-1.0)

    r = sample_nn_distance(n_cm3, _FakeRng())
    assert r == pytest.approx((3.0 / (4 * np.pi * n_cm3 * 1e6)) ** (1 / 3))


def test_sampler_ks_statistic():
    rng = np.random.default_rng(42)
    r = sample_nn_distance(1e14, rng, size=100_000)
    ks = stats.kstest(r, lambda x: nn_distance_cdf(x, 1e14))
    assert ks.statistic < 0.01


def test_sampler_determinism_and_floor():
    c1 = sample_conformation(1e14, np.random.default_rng(7), K0)
    c2 = sample_conformation(1e14, np.random.default_rng(7), K0)
    assert (c1.r, c1.theta, c1.phi) == (c2.r, c2.theta, c2.phi)
    rng = np.random.default_rng(0)
    r = sample_nn_distance(1e22, rng, size=1000)  # absurd density
    assert np.all(r >= R_MIN)


def test_sampler_angle_ranges():
    rng = np.random.default_rng(3)
    thetas, phis = [], []
    for _ in range(500):
        c = sample_conformation(1e13, rng, K0)
        thetas.append(c.theta)
        phis.append(c.phi)
    assert 0 <= min(thetas) and max(thetas) <= np.pi
    assert 0 <= min(phis) and max(phis) < 2 * np.pi
    # uniform-theta default: mean ~ pi/2, not cos-uniform
    assert np.mean(thetas) == pytest.approx(np.pi / 2, abs=0.1)
    # isotropic option: cos(theta) uniform
    rng = np.random.default_rng(4)
    cts = [np.cos(sample_conformation(1e13, rng, K0, isotropic=True).theta)
           for _ in range(2000)]
    assert stats.kstest(cts, stats.uniform(loc=-1, scale=2).cdf).statistic < 0.05


def test_mean_nn_distance_values():
    assert mean_nn_distance(1e14) == pytest.approx(118.5e-9, rel=0.03)
    assert 115e-9 <= mean_nn_distance(1e14) <= 125e-9
    assert mean_nn_distance(8e14) == pytest.approx(mean_nn_distance(1e14) / 2)
    # low density: weak-coupling regime, r0 above the reduced wavelength
    assert mean_nn_distance(1e12) > 780e-9 / TWOPI
    assert mean_nn_distance(1e12) == pytest.approx(550e-9, rel=0.03)
