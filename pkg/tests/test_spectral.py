import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinpair.dynamics import ou_reference_trace
from spinpair.spectral import (
    Spectrum,
    average_spectra,
    czz_model,
    drift_matrix,
    extract_splitting,
    fit_spectrum,
    lf_fraction,
    lorentzian_lf,
    ou_spectrum_matrix,
    ou_spectrum_zz,
    ou_stationary_covariance,
    psd,
    sinc2_model,
)

TWOPI = 2 * np.pi


# -- PSD estimator -----------------------------------------------------------

def test_psd_pure_sinusoid_peak_location():
    dt = 1e-6
    t = dt * np.arange(40_000)
    f0 = 12_345.0
    x = np.sin(TWOPI * f0 * t)
    s = psd(x, segment_len=10_000, dt=dt)
    peak_bin = s.freqs[np.argmax(s.psd)]
    assert abs(peak_bin - f0) <= s.resolution


def test_psd_white_noise_flat_and_scatter():
    rng = np.random.default_rng(0)
    dt = 1e-6
    x = rng.standard_normal(200_000)
    s = psd(x, segment_len=2_000, dt=dt)
    level = 2.0 * dt * 1.0  # one-sided density of unit-variance white noise
    mid = s.psd[5:-5]
    assert np.mean(mid) == pytest.approx(level, rel=0.05)
    assert np.std(mid) / np.mean(mid) == pytest.approx(
        1.0 / np.sqrt(s.n_averages), rel=0.45)


def test_psd_parseval_per_segment():
    rng = np.random.default_rng(1)
    dt = 2e-9
    x = rng.standard_normal(12_500) * 0.3 + np.sin(TWOPI * 4e6 * dt *
                                                   np.arange(12_500))
    with pytest.warns(UserWarning, match="fewer than 2 segments"):
        s = psd(x, segment_len=12_500, dt=dt)
    from spinpair.spectral import _hann
    w = _hann(12_500)
    xm = x - x.mean()
    windowed_var = np.sum(xm**2 * w**2) / np.sum(w**2)
    assert np.sum(s.psd) * s.resolution == pytest.approx(windowed_var,
                                                         rel=0.01)


def test_psd_warns_single_segment():
    with pytest.warns(UserWarning, match="fewer than 2 segments"):
        psd(np.random.default_rng(2).standard_normal(100), segment_len=100,
            dt=1e-6)


def test_psd_rejects_bad_segment_and_window():
    x = np.zeros(100)
    with pytest.raises(ValueError):
        psd(x, segment_len=200, dt=1e-6)
    with pytest.raises(ValueError):
        psd(x, segment_len=50, dt=1e-6, window="hamming")
    with pytest.raises(ValueError):
        psd(x, segment_len=50)   # bare array needs dt


def test_average_spectra_grid_check():
    s1 = Spectrum(np.arange(5.0), np.ones(5), 1.0, 2)
    s2 = Spectrum(np.arange(5.0) + 0.5, np.ones(5), 1.0, 2)
    with pytest.raises(ValueError):
        average_spectra([s1, s2])
    avg = average_spectra([s1, Spectrum(np.arange(5.0), 3 * np.ones(5), 1.0, 4)])
    assert np.allclose(avg.psd, 2.0)
    assert avg.n_averages == 6


# -- closed-form lineshapes ---------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(gamma=st.floats(1e3, 1e7), omega_l=st.floats(1e5, 1e9))
def test_czz_equals_vector_process_zz(gamma, omega_l):
    # two independent implementations of the same spectrum
    gamma *= TWOPI
    omega_l *= TWOPI
    A = 1.7
    R = drift_matrix(gamma, omega_l)
    G = np.sqrt(A) * np.eye(2)
    w = np.linspace(0, 3 * omega_l, 100)
    a = czz_model(w, A, gamma, omega_l)
    b = ou_spectrum_zz(R, G, w)
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-10


def test_czz_asymptotics():
    gamma, wl, A = TWOPI * 100e3, TWOPI * 9e6, 2.0
    # resonant value ~ A/(2 gamma)^2 scaling for gamma << omega_l
    peak = czz_model(np.array([wl]), A, gamma, wl)[0]
    assert peak == pytest.approx(A * 2 * wl**2 / (4 * gamma**2 * wl**2),
                                 rel=1e-3)
    far = czz_model(np.array([100 * wl]), A, gamma, wl)[0]
    assert far == pytest.approx(A / (100 * wl) ** 2, rel=1e-3)


def test_ou_spectrum_matrix_properties():
    R = drift_matrix(TWOPI * 2e5, TWOPI * 5e6)
    G = 1.3 * np.eye(2)
    for w in (0.0, TWOPI * 1e6, TWOPI * 2e7):
        C = ou_spectrum_matrix(R, G, w)
        assert np.allclose(C, C.conj().T)
        ev = np.linalg.eigvalsh(C)
        assert np.all(ev > -1e-18)
    # omega_l = 0: plain Lorentzian A/(gamma^2 + w^2)
    gamma = TWOPI * 2e5
    R0 = drift_matrix(gamma, 0.0)
    A = 0.7
    w = TWOPI * 3e5
    val = ou_spectrum_matrix(R0, np.sqrt(A) * np.eye(2), w)[1, 1].real
    assert val == pytest.approx(A / (gamma**2 + w**2), rel=1e-12)


def test_ou_spectrum_integral_matches_lyapunov():
    gamma, wl, A = TWOPI * 3e5, TWOPI * 4e6, 1.1
    R = drift_matrix(gamma, wl)
    G = np.sqrt(A) * np.eye(2)
    cov = ou_stationary_covariance(R, G)
    assert cov[1, 1] == pytest.approx(A / (2 * gamma), rel=1e-12)
    w = np.linspace(-TWOPI * 400e6, TWOPI * 400e6, 400_001)
    integral = np.trapezoid(czz_model(w, A, gamma, wl), w) / TWOPI
    assert integral == pytest.approx(cov[1, 1], rel=1e-3)


def test_sinc2_values_and_zero():
    tau = 100e-9
    assert sinc2_model(np.array([0.0]), 2.5, tau)[0] == pytest.approx(2.5)
    assert sinc2_model(np.array([1.0 / tau]), 2.5, tau)[0] < 1e-30
    # first zero at 10 MHz, first ripple near 15 MHz for tau = 100 ns
    nus = np.linspace(10e6, 20e6, 2001)
    vals = sinc2_model(nus, 1.0, tau)
    ripple = nus[np.argmax(vals)]
    assert ripple == pytest.approx(15e6, rel=0.05)
    with pytest.raises(ValueError):
        sinc2_model(np.array([1.0]), 1.0, 0.0)


def test_sinc2_matches_triangle_transform():
    # numeric Fourier transform of the triangular autocorrelation
    tau = 100e-9
    t = np.linspace(-tau, tau, 40_001)
    tri = 1.0 - np.abs(t) / tau
    nus = np.linspace(0, 25e6, 120)
    ft = np.array([np.trapezoid(tri * np.cos(TWOPI * nu * t), t)
                   for nu in nus]) / tau
    assert np.max(np.abs(ft - sinc2_model(nus, 1.0, tau))) < 1e-6


# -- fitting ------------------------------------------------------------------

def _synthetic_spectrum(components, noise=0.01, seed=3, f_hi=30e6,
                        df=40e3):
    f = np.arange(df, f_hi, df)
    w = TWOPI * f
    y = np.zeros_like(w)
    for kind, args in components:
        if kind == "peak":
            y = y + czz_model(w, *args)
        elif kind == "lf":
            y = y + lorentzian_lf(w, *args)
        elif kind == "sinc":
            y = y + sinc2_model(f, *args)
    rng = np.random.default_rng(seed)
    return Spectrum(f, y * (1.0 + noise * rng.standard_normal(f.size)),
                    df, 100)


def test_fit_recovers_single_peak():
    gamma, wl = TWOPI * 270e3, TWOPI * 9e6
    s = _synthetic_spectrum([("peak", (1.0, gamma, wl))])
    fit = fit_spectrum(s, model="single_peak")
    assert fit.converged
    assert fit.peaks[0].hwhm == pytest.approx(gamma, rel=0.03)
    assert fit.peaks[0].center == pytest.approx(wl, rel=0.01)


def test_fit_amplitude_rescaling_invariance():
    gamma, wl = TWOPI * 400e3, TWOPI * 7e6
    s = _synthetic_spectrum([("peak", (2.0, gamma, wl))])
    fit1 = fit_spectrum(s)
    s2 = Spectrum(s.freqs, 1e8 * s.psd, s.resolution, s.n_averages)
    fit2 = fit_spectrum(s2)
    assert fit2.peaks[0].hwhm == pytest.approx(fit1.peaks[0].hwhm, rel=1e-6)
    assert fit2.peaks[0].center == pytest.approx(fit1.peaks[0].center,
                                                 rel=1e-6)
    assert fit2.peaks[0].amplitude == pytest.approx(
        1e8 * fit1.peaks[0].amplitude, rel=1e-6)


def test_fit_zero_lf_amplitude_consistent_with_zero():
    gamma, wl = TWOPI * 300e3, TWOPI * 9e6
    s = _synthetic_spectrum([("peak", (1.0, gamma, wl))], noise=0.005)
    fit = fit_spectrum(s, model="peak_plus_lf")
    unc = dict(zip(fit.param_names, fit.uncertainties))
    assert fit.lf.amplitude <= max(3 * unc["lf_amplitude"], 1e-3)
    assert lf_fraction(s, fit) < 0.02


def test_fit_peak_plus_lf_recovery():
    gamma, wl = TWOPI * 500e3, TWOPI * 9e6
    gc = TWOPI * 14.1e6
    s = _synthetic_spectrum([("peak", (1.0, gamma, wl)),
                             ("lf", (0.8, gc))], noise=0.01)
    fit = fit_spectrum(s, model="peak_plus_lf")
    assert fit.lf.scale == pytest.approx(gc, rel=0.05)
    frac = lf_fraction(s, fit)
    assert 0.1 < frac < 0.95


def test_lf_fraction_monotone_in_amplitude():
    gamma, wl = TWOPI * 500e3, TWOPI * 9e6
    peak_top = czz_model(np.array([wl]), 1.0, gamma, wl)[0]
    fracs = []
    # LF zero-frequency values of 0.5%, 2% and 8% of the peak maximum
    for amp in (0.005 * peak_top, 0.02 * peak_top, 0.08 * peak_top):
        s = _synthetic_spectrum([("peak", (1.0, gamma, wl)),
                                 ("lf", (amp, TWOPI * 10e6))], noise=0.0)
        fit = fit_spectrum(s, model="peak_plus_lf")
        fracs.append(lf_fraction(s, fit))
    assert fracs[0] < fracs[1] < fracs[2]


def test_fit_sinc_lf_recovery():
    gamma, wl = TWOPI * 400e3, TWOPI * 18e6
    s = _synthetic_spectrum([("peak", (1.0, gamma, wl)),
                             ("sinc", (30.0, 100e-9))], noise=0.01)
    fit = fit_spectrum(s, model="sinc_lf")
    assert fit.lf.kind == "sinc2"
    assert fit.lf.scale == pytest.approx(100e-9, rel=0.02)


def test_extract_splitting_synthetic_doublet():
    wl, delta, gamma = TWOPI * 9e6, TWOPI * 1.2e6, TWOPI * 300e3
    s = _synthetic_spectrum([("peak", (1.0, gamma, wl - delta)),
                             ("peak", (1.0, gamma, wl + delta))])
    est = extract_splitting(s)
    assert est.resolved
    assert est.value == pytest.approx(2 * delta, abs=TWOPI * s.resolution)


def test_extract_splitting_single_peak_unresolved():
    s = _synthetic_spectrum([("peak", (1.0, TWOPI * 300e3, TWOPI * 9e6))])
    est = extract_splitting(s)
    assert not est.resolved
    assert est.value == 0.0


def test_extract_splitting_offset_invariance():
    # shifting generation and analysis grids together leaves the
    # extracted splitting unchanged
    wl, delta, gamma = TWOPI * 9e6, TWOPI * 1.5e6, TWOPI * 250e3
    df = 40e3
    for f_start in (df, 2e6):
        f = np.arange(f_start, 30e6, df)
        w = TWOPI * f
        y = czz_model(w, 1.0, gamma, wl - delta) + czz_model(
            w, 1.0, gamma, wl + delta)
        s = Spectrum(f, y, df, 10)
        est = extract_splitting(s)
        assert est.value == pytest.approx(2 * delta, abs=TWOPI * df)


def test_fit_rejects_bad_input():
    s = _synthetic_spectrum([("peak", (1.0, TWOPI * 300e3, TWOPI * 9e6))])
    with pytest.raises(ValueError):
        fit_spectrum(s, model="three_peak")
    bad = Spectrum(s.freqs, np.full_like(s.psd, np.nan), s.resolution, 1)
    with pytest.raises(ValueError):
        fit_spectrum(bad)


def test_ou_roundtrip_short():
    # reduced-size version of the reference-process round trip
    gamma, wl, A = TWOPI * 270e3, TWOPI * 9e6, 1.0
    tr = ou_reference_trace(gamma, wl, A, dt=2e-9, duration=1e-3, seed=11)
    s = psd(tr, segment_len=12_500)
    fit = fit_spectrum(s.band(1e6, 20e6), model="single_peak")
    assert fit.peaks[0].hwhm == pytest.approx(gamma, rel=0.10)
    assert fit.peaks[0].center == pytest.approx(wl, rel=0.01)
