"""Channel impulse responses from band-limited spectra, and pulse transmission.

The simulated band ``[f_min, f_max]`` is zero-padded down to DC and
Hermitian-extended to negative frequencies on an odd-length grid of
``2M + 1`` bins (``M = f_max / df``), so the top bin needs no special
treatment and the transform is exactly energy preserving. The time step is
``1 / ((2M + 1) df)`` and the unambiguous range is ``1 / df``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert, windows

from .types import ChannelTensor, Cir, grid_is_uniform

MIN_POINTS = 16
# Spectral energy allowed outside the simulated band by transmit_signal.
OUT_OF_BAND_TOL = 1e-4


@dataclass(frozen=True)
class WindowSpec:
    kind: str = "hann"
    param: float = 0.5  # Tukey taper fraction

    def values(self, n: int) -> np.ndarray:
        if self.kind == "hann":
            return windows.hann(n, sym=True)
        if self.kind == "rectangular":
            return np.ones(n)
        if self.kind == "tukey":
            return windows.tukey(n, self.param, sym=True)
        raise ValueError(f"unknown window kind {self.kind!r}")

    def label(self) -> str:
        return f"tukey({self.param:g})" if self.kind == "tukey" else self.kind

    @classmethod
    def parse(cls, text: str) -> "WindowSpec":
        text = text.strip().lower()
        if text.startswith("tukey"):
            inner = text[5:].strip("()") or "0.5"
            return cls("tukey", float(inner))
        return cls(text)


@dataclass(frozen=True)
class BandLayout:
    df: float
    first_bin: int
    top_bin: int

    @property
    def n_time(self) -> int:
        return 2 * self.top_bin + 1

    @property
    def dt(self) -> float:
        return 1.0 / (self.n_time * self.df)


def band_layout(frequencies) -> BandLayout:
    f = np.asarray(frequencies, dtype=float)
    if f.ndim != 1 or f.size < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} frequency points")
    if np.any(np.diff(f) <= 0) or not grid_is_uniform(f):
        raise ValueError("frequency grid must be uniform and increasing")
    df = (f[-1] - f[0]) / (f.size - 1)
    first = f[0] / df
    if abs(first - round(first)) > 1e-6 * max(1.0, first):
        raise ValueError("f_min must be an integer multiple of the grid step for zero padding to DC")
    first_bin = int(round(first))
    return BandLayout(df, first_bin, first_bin + f.size - 1)


def time_grid(frequencies) -> np.ndarray:
    layout = band_layout(frequencies)
    return np.arange(layout.n_time) * layout.dt


def _positive_spectrum(layout: BandLayout, values: np.ndarray) -> np.ndarray:
    spec = np.zeros(layout.top_bin + 1, dtype=complex)
    spec[layout.first_bin:] = values
    return spec


def cir_from_spectrum(frequencies, spectrum, window: WindowSpec = WindowSpec(),
                      source: ChannelTensor | None = None) -> Cir:
    """Real impulse response ``h(t)`` of a band-limited spectrum ``H(f)``."""
    freqs = np.asarray(frequencies, dtype=float)
    h_f = np.asarray(spectrum, dtype=complex)
    if h_f.shape != freqs.shape:
        raise ValueError("spectrum and frequency grid differ in length")
    layout = band_layout(freqs)
    pos = _positive_spectrum(layout, h_f * window.values(freqs.size))
    samples = np.fft.irfft(pos, n=layout.n_time) * (layout.n_time * layout.df)
    return Cir(samples, layout.dt, window.label(), 1.0 / layout.df, (float(freqs[0]), float(freqs[-1])),
               source)


def transmit_signal(s_in, frequencies, spectrum, window: WindowSpec = WindowSpec(),
                    out_of_band_tol: float = OUT_OF_BAND_TOL) -> np.ndarray:
    """Received signal for an emitted signal sampled on :func:`time_grid`.

    Multiplies the emitted spectrum by the windowed channel spectrum.
    """
    freqs = np.asarray(frequencies, dtype=float)
    layout = band_layout(freqs)
    s = np.asarray(s_in, dtype=float)
    if s.shape != (layout.n_time,):
        raise ValueError(f"signal must have {layout.n_time} samples on the CIR time grid")
    s_f = np.fft.rfft(s)
    power = np.abs(s_f) ** 2
    power[1:] *= 2
    total = power.sum()
    outside = total - power[layout.first_bin:].sum()
    if total > 0 and outside / total > out_of_band_tol:
        raise ValueError(f"signal has {outside / total:.2e} of its energy outside the simulated band")
    h_pos = _positive_spectrum(layout, np.asarray(spectrum, dtype=complex) * window.values(freqs.size))
    return np.fft.irfft(s_f * h_pos, n=layout.n_time)


def convolve_with_cir(s_in, cir: Cir) -> np.ndarray:
    """Direct circular convolution ``dt * sum_m s[m] h[n - m]``."""
    s = np.asarray(s_in, dtype=float)
    h = cir.samples
    n = h.size
    if s.size != n:
        raise ValueError("signal and CIR lengths differ")
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return cir.dt * (h[idx] @ s)


def gaussian_pulse(t, center: float, width: float, carrier: float = 1.0) -> np.ndarray:
    """Carrier-modulated Gaussian pulse with envelope std ``width``."""
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * ((t - center) / width) ** 2) * np.cos(2 * np.pi * carrier * (t - center))


def envelope(cir: Cir) -> np.ndarray:
    """Magnitude of the analytic signal of ``h(t)``: the carrier-free
    envelope of a band-pass CIR."""
    return np.abs(hilbert(cir.samples))


@dataclass
class CausalityReport:
    peak_time: float  # envelope maximum
    sample_peak_time: float  # largest |h| sample
    peak_value: float
    expected_arrival: float
    leakage_db: float  # largest |h| sample before the cutoff, relative to the largest |h|
    envelope_leakage_db: float
    aliased: bool


def _leak_db(mag: np.ndarray, early: np.ndarray) -> float:
    leak = mag[early].max() if early.any() else 0.0
    return float(20 * np.log10(leak / mag.max())) if leak > 0 else -np.inf


def causality_check(cir: Cir, distance: float, c: float = 1.0, fraction: float = 0.9) -> CausalityReport:
    """Arrival time of the CIR peak and the strongest response before
    ``fraction * D / c``, in dB relative to the global peak.

    The peak time is taken from the envelope; the sampled carrier would
    otherwise shift it by up to half a carrier period.
    """
    t = cir.time_grid
    mag = np.abs(cir.samples)
    env = envelope(cir)
    arrival = distance / c
    early = t < fraction * arrival
    return CausalityReport(float(t[np.argmax(env)]), float(t[np.argmax(mag)]), float(mag.max()), arrival,
                           _leak_db(mag, early), _leak_db(env, early), arrival >= cir.unambiguous_range)
