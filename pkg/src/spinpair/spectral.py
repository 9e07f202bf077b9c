"""Spectral estimation and lineshape fitting.

Welch-averaged one-sided power spectral densities; closed-form lineshapes
(damped-precession line, sinc^2 low-frequency component, vector-process
spectrum matrix); nonlinear least-squares fits used to extract peak widths,
doublet splittings and the low-frequency power fraction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_lyapunov
from scipy.optimize import least_squares

from .dynamics import TimeTrace

TWOPI = 2.0 * np.pi


@dataclass(frozen=True)
class Spectrum:
    """One-sided PSD on a uniform frequency grid (Hz, units^2/Hz)."""

    freqs: np.ndarray
    psd: np.ndarray
    resolution: float      # bin width, Hz
    n_averages: int

    def band(self, f_lo: float, f_hi: float) -> "Spectrum":
        sel = (self.freqs >= f_lo) & (self.freqs <= f_hi)
        return Spectrum(self.freqs[sel], self.psd[sel], self.resolution,
                        self.n_averages)


@dataclass
class PeakFit:
    amplitude: float
    hwhm: float        # rad/s
    center: float      # rad/s


@dataclass
class LowFreqFit:
    kind: str          # "lorentzian" or "sinc2"
    amplitude: float
    scale: float       # HWHM (rad/s) for lorentzian, tau_c (s) for sinc2


@dataclass
class FitResult:
    model: str
    peaks: list
    lf: LowFreqFit | None
    residual_norm: float
    uncertainties: np.ndarray
    param_names: list
    converged: bool
    cost: float
    jacobian_condition: float
    message: str = ""

    def peak_sorted(self):
        return sorted(self.peaks, key=lambda pk: pk.center)


@dataclass
class SplittingEstimate:
    value: float              # rad/s, |w+ - w-|
    resolved: bool
    fit: FitResult


def _hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(TWOPI * np.arange(n) / n)


_WINDOWS = {"hann": _hann, "boxcar": lambda n: np.ones(n)}


def psd(trace, segment_len: int | None = None, window: str = "hann",
        dt: float | None = None) -> Spectrum:
    """Welch-averaged one-sided PSD of a trace.

    ``trace`` is a TimeTrace or a plain sample array (then ``dt`` is
    required).  Segments do not overlap, each is mean-subtracted and
    windowed before its periodogram is accumulated.  Normalization is
    density-style: sum(psd)*df equals the window-weighted variance, so
    Parseval holds to rounding on every segment.
    """
    if isinstance(trace, TimeTrace):
        x = np.asarray(trace.samples, dtype=float)
        dt = trace.dt
    else:
        x = np.asarray(trace, dtype=float)
        if dt is None:
            raise ValueError("dt required when passing a bare sample array")
    n = x.size
    if segment_len is None:
        segment_len = n
    if segment_len > n:
        raise ValueError(f"segment_len {segment_len} exceeds trace length {n}")
    n_seg = n // segment_len
    if n_seg < 2:
        warnings.warn("fewer than 2 segments: no averaging", stacklevel=2)
    try:
        win = _WINDOWS[window](segment_len)
    except KeyError:
        raise ValueError(f"unknown window {window!r}") from None
    wpow = np.sum(win ** 2)
    fs = 1.0 / dt
    acc = np.zeros(segment_len // 2 + 1)
    for k in range(n_seg):
        seg = x[k * segment_len:(k + 1) * segment_len]
        seg = (seg - seg.mean()) * win
        spec = np.fft.rfft(seg)
        pxx = (np.abs(spec) ** 2) / (fs * wpow)
        pxx[1:] *= 2.0
        if segment_len % 2 == 0:
            pxx[-1] /= 2.0
        acc += pxx
    acc /= n_seg
    freqs = np.fft.rfftfreq(segment_len, d=dt)
    return Spectrum(freqs=freqs, psd=acc, resolution=fs / segment_len,
                    n_averages=n_seg)


def average_spectra(spectra: list) -> Spectrum:
    """Ensemble average of same-grid spectra."""
    f0 = spectra[0].freqs
    for s in spectra[1:]:
        if s.freqs.shape != f0.shape or not np.allclose(s.freqs, f0):
            raise ValueError("spectra live on different grids")
    mean = np.mean([s.psd for s in spectra], axis=0)
    return Spectrum(freqs=f0, psd=mean, resolution=spectra[0].resolution,
                    n_averages=sum(s.n_averages for s in spectra))


# -- closed-form lineshapes --------------------------------------------------

def czz_model(omega, amplitude: float, gamma: float, omega_l: float):
    """Damped-precession spin-noise line (angular frequencies)."""
    omega = np.asarray(omega, dtype=float)
    num = gamma ** 2 + omega ** 2 + omega_l ** 2
    den = (gamma ** 2 + omega_l ** 2 - omega ** 2) ** 2 \
        + 4.0 * gamma ** 2 * omega ** 2
    return amplitude * num / den


def drift_matrix(gamma: float, omega_l: float) -> np.ndarray:
    """Damped-rotation generator for (S_y, S_z)."""
    return np.array([[-gamma, omega_l], [-omega_l, -gamma]])


def ou_spectrum_matrix(R: np.ndarray, G: np.ndarray, omega: float) -> np.ndarray:
    """Spectrum matrix C(w) = (R+iw)^-1 G G^T (R^T-iw)^-1 of a linear
    white-noise-driven vector process with Hurwitz drift R."""
    R = np.asarray(R, dtype=float)
    G = np.asarray(G, dtype=float)
    eye = np.eye(R.shape[0])
    a = np.linalg.solve(R + 1j * omega * eye, G @ G.T)
    return a @ np.linalg.inv(R.T - 1j * omega * eye)


def ou_spectrum_zz(R: np.ndarray, G: np.ndarray, omegas) -> np.ndarray:
    return np.array([ou_spectrum_matrix(R, G, w)[1, 1].real for w in
                     np.atleast_1d(omegas)])


def ou_stationary_covariance(R: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Solve R S + S R^T + G G^T = 0."""
    return solve_lyapunov(np.asarray(R, float), -np.asarray(G, float) @
                          np.asarray(G, float).T)


def sinc2_model(nu, variance: float, tau_c: float):
    """Low-frequency component of a process redrawn every tau_c:
    variance * sinc^2(pi nu tau_c); first zero at nu = 1/tau_c."""
    if tau_c <= 0:
        raise ValueError("tau_c must be positive")
    nu = np.asarray(nu, dtype=float)
    return variance * np.sinc(nu * tau_c) ** 2


def lorentzian_lf(omega, amplitude: float, gamma_c: float):
    """Zero-centered Lorentzian with HWHM gamma_c (angular frequencies)."""
    return amplitude * gamma_c ** 2 / (omega ** 2 + gamma_c ** 2)


# -- model fitting ------------------------------------------------------------

_MODELS = {
    "single_peak": (1, None),
    "two_peak": (2, None),
    "peak_plus_lf": (1, "lorentzian"),
    "sinc_lf": (1, "sinc2"),
}


def _model_eval(omega, params, n_peaks, lf_kind):
    out = np.zeros_like(omega)
    i = 0
    for _ in range(n_peaks):
        a, g, w0 = params[i:i + 3]
        out = out + czz_model(omega, a, g, w0)
        i += 3
    if lf_kind == "lorentzian":
        a, gc = params[i:i + 2]
        out = out + lorentzian_lf(omega, a, gc)
    elif lf_kind == "sinc2":
        a, tc = params[i:i + 2]
        out = out + sinc2_model(omega / TWOPI, a, tc)
    return out


def _find_peaks_init(freqs_w, p, n_peaks):
    """Initial centers/widths from local maxima above 3x the median."""
    med = np.median(p)
    cand = []
    for i in range(1, len(p) - 1):
        if p[i] >= p[i - 1] and p[i] >= p[i + 1] and p[i] > 3.0 * med:
            cand.append(i)
    cand.sort(key=lambda i: p[i], reverse=True)
    centers = []
    min_sep = max(3, len(p) // 100)
    for i in cand:
        if all(abs(i - j) > min_sep for j in centers):
            centers.append(i)
        if len(centers) == n_peaks:
            break
    while len(centers) < n_peaks:
        centers.append(int(np.argmax(p)))
    widths = []
    for i in centers:
        half = p[i] / 2.0
        lo = i
        while lo > 0 and p[lo] > half:
            lo -= 1
        hi = i
        while hi < len(p) - 1 and p[hi] > half:
            hi += 1
        widths.append(max(freqs_w[hi] - freqs_w[lo], freqs_w[1] - freqs_w[0]) / 2.0)
    return [(freqs_w[i], w, p[i]) for i, w in zip(centers, widths)]


def fit_spectrum(s: Spectrum, model: str = "single_peak",
                 band: tuple | None = None, n_restarts: int = 5,
                 seed: int = 0) -> FitResult:
    """Nonlinear least-squares fit of peak(s) plus optional low-frequency term.

    Bounded trust-region fit with data-driven initialization and a few
    randomized restarts.  Non-convergence is reported through
    ``converged=False`` with the best iterate kept.  Fitted frequencies are
    angular (rad/s); the spectrum amplitude scale is arbitrary.
    """
    if model not in _MODELS:
        raise ValueError(f"unknown model {model!r}; options: {sorted(_MODELS)}")
    n_peaks, lf_kind = _MODELS[model]
    if band is not None:
        s = s.band(*band)
    w = TWOPI * s.freqs
    y = s.psd
    if not np.all(np.isfinite(y)):
        raise ValueError("spectrum contains non-finite values")
    scale = np.max(y)
    if scale <= 0:
        raise ValueError("spectrum has no power to fit")
    yn = y / scale
    wmax = w[-1]
    dw = w[1] - w[0]

    peaks0 = _find_peaks_init(w, yn, n_peaks)
    p0, lo, hi = [], [], []
    names = []
    for k, (w0, g0, h0) in enumerate(peaks0):
        a0 = h0 / max(czz_model(np.array([w0]), 1.0, g0, w0)[0], 1e-300)
        p0 += [a0, g0, w0]
        lo += [0.0, 0.2 * dw, 0.0]
        hi += [np.inf, wmax, wmax]
        names += [f"peak{k}_amplitude", f"peak{k}_hwhm", f"peak{k}_center"]
    if lf_kind == "lorentzian":
        p0 += [yn[0], max(w[len(w) // 8], dw)]
        lo += [0.0, 0.2 * dw]
        hi += [np.inf, 10.0 * wmax]
        names += ["lf_amplitude", "lf_gamma_c"]
    elif lf_kind == "sinc2":
        # the first zero (1/tau) must land inside the analysis band,
        # otherwise the component degenerates into a flat offset
        f_hi = wmax / TWOPI
        f_res = dw / TWOPI
        tau_lo = 1.25 / f_hi
        tau_hi = 1.0 / (5.0 * f_res)
        p0 += [yn[0], np.clip(8.0 / f_hi, tau_lo, tau_hi)]
        lo += [0.0, tau_lo]
        hi += [np.inf, tau_hi]
        names += ["lf_variance", "lf_tau_c"]

    p0 = np.asarray(p0, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    p0 = np.clip(p0, lo, np.where(np.isinf(hi), p0, hi))

    def resid(q):
        return _model_eval(w, q, n_peaks, lf_kind) - yn

    rng = np.random.default_rng(seed)
    best = None
    start = p0
    for attempt in range(max(1, n_restarts)):
        try:
            sol = least_squares(resid, start, bounds=(lo, hi), method="trf",
                                max_nfev=4000)
        except Exception:
            sol = None
        if sol is not None and (best is None or sol.cost < best.cost):
            best = sol
        # random restart around the data-driven guess
        jitter = 1.0 + 0.3 * rng.standard_normal(p0.size)
        start = np.clip(p0 * np.abs(jitter), lo,
                        np.where(np.isinf(hi), p0 * 10 + 1, hi))
    if best is None:
        raise RuntimeError("least-squares solver failed on every restart")

    q = best.x
    jac = best.jac
    dof = max(len(yn) - len(q), 1)
    res_var = 2.0 * best.cost / dof
    jtj = jac.T @ jac
    try:
        cov = np.linalg.pinv(jtj) * res_var
        unc = np.sqrt(np.clip(np.diag(cov), 0.0, np.inf))
        cond = float(np.linalg.cond(jtj))
    except np.linalg.LinAlgError:
        unc = np.full(len(q), np.nan)
        cond = np.inf

    peaks = []
    i = 0
    for _ in range(n_peaks):
        peaks.append(PeakFit(amplitude=q[i] * scale, hwhm=q[i + 1],
                             center=q[i + 2]))
        i += 3
    lf = None
    if lf_kind == "lorentzian":
        lf = LowFreqFit(kind="lorentzian", amplitude=q[i] * scale,
                        scale=q[i + 1])
    elif lf_kind == "sinc2":
        lf = LowFreqFit(kind="sinc2", amplitude=q[i] * scale, scale=q[i + 1])
    unc_scaled = unc.copy()
    for k, nm in enumerate(names):
        if "amplitude" in nm or "variance" in nm:
            unc_scaled[k] *= scale
    return FitResult(model=model, peaks=peaks, lf=lf,
                     residual_norm=float(np.linalg.norm(resid(q))) * scale,
                     uncertainties=unc_scaled, param_names=names,
                     converged=bool(best.status > 0), cost=float(best.cost),
                     jacobian_condition=cond,
                     message=best.message)


def evaluate_fit(fit: FitResult, freqs_hz) -> np.ndarray:
    """Fitted model evaluated on a frequency grid (Hz)."""
    w = TWOPI * np.asarray(freqs_hz, dtype=float)
    out = np.zeros_like(w)
    for pk in fit.peaks:
        out += czz_model(w, pk.amplitude, pk.hwhm, pk.center)
    if fit.lf is not None:
        out += evaluate_lf(fit, freqs_hz)
    return out


def evaluate_lf(fit: FitResult, freqs_hz) -> np.ndarray:
    w = TWOPI * np.asarray(freqs_hz, dtype=float)
    if fit.lf is None:
        return np.zeros_like(w)
    if fit.lf.kind == "lorentzian":
        return lorentzian_lf(w, fit.lf.amplitude, fit.lf.scale)
    return sinc2_model(np.asarray(freqs_hz, dtype=float), fit.lf.amplitude,
                       fit.lf.scale)


def extract_splitting(s: Spectrum, band: tuple | None = None,
                      seed: int = 0) -> SplittingEstimate:
    """Doublet splitting |w+ - w-| from a two-peak fit.

    Falls back to zero with ``resolved=False`` when the fitted separation
    does not exceed the larger fitted half width.
    """
    fit = fit_spectrum(s, model="two_peak", band=band, seed=seed)
    pk = fit.peak_sorted()
    sep = abs(pk[1].center - pk[0].center)
    gmax = max(pk[0].hwhm, pk[1].hwhm)
    if sep <= gmax:
        return SplittingEstimate(value=0.0, resolved=False, fit=fit)
    return SplittingEstimate(value=sep, resolved=True, fit=fit)


def lf_fraction(s: Spectrum, fit: FitResult) -> float:
    """Fraction of the fitted model power carried by the LF component."""
    if fit.lf is None:
        return 0.0
    total = np.trapezoid(evaluate_fit(fit, s.freqs), s.freqs)
    low = np.trapezoid(evaluate_lf(fit, s.freqs), s.freqs)
    if total <= 0:
        return 0.0
    return float(low / total)
