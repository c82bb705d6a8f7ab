"""Ride-quality metrics from simulation logs: RMSE, histograms and spectra."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window, welch


@dataclass(frozen=True)
class Spectrum:
    frequencies: np.ndarray
    amplitude: np.ndarray  # RMS amplitude per bin: a sine of amplitude A peaks at A/sqrt(2)
    psd: np.ndarray  # one-sided power density [unit^2/Hz]
    resolution: float
    window: str = "hann"
    segmentLen: int = 0
    overlap: float = 0.5

    def band_rms(self, f_lo: float, f_hi: float) -> float:
        """RMS of the signal content between ``f_lo`` and ``f_hi`` (inclusive)."""
        sel = (self.frequencies >= f_lo) & (self.frequencies <= f_hi)
        return float(np.sqrt(np.sum(self.psd[sel]) * self.resolution))


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow


@dataclass(frozen=True)
class ComfortMetrics:
    bandRms: float
    peakFrequency: float  # nan when the band holds no energy
    peakAmplitude: float


def rmse(series, reference: float = 0.0) -> float:
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("rmse of an empty series")
    return float(np.sqrt(np.mean((x - reference) ** 2)))


def histogram(series, bin_count: int, value_range: tuple[float, float]) -> Histogram:
    lo, hi = value_range
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    if not hi > lo:
        raise ValueError("histogram range must be increasing")
    x = np.asarray(series, dtype=float)
    counts, edges = np.histogram(x, bins=bin_count, range=(lo, hi))
    return Histogram(edges=edges, counts=counts, underflow=int(np.sum(x < lo)), overflow=int(np.sum(x > hi)))


def welch_spectrum(series, sample_rate: float, segment_len: int = 65536, overlap: float = 0.5) -> Spectrum:
    """Hann-windowed Welch estimate with both density and RMS-amplitude scaling."""
    x = np.asarray(series, dtype=float)
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise ValueError("segment length must be a power of two")
    if x.size < segment_len:
        raise ValueError(f"series of {x.size} samples is shorter than one segment ({segment_len})")
    if not 0 <= overlap < 1:
        raise ValueError("overlap fraction must be in [0, 1)")
    freqs, psd = welch(x, fs=sample_rate, window="hann", nperseg=segment_len,
                       noverlap=int(round(overlap * segment_len)), detrend="constant",
                       scaling="density", return_onesided=True)
    w = get_window("hann", segment_len)
    # density -> power per bin of a sinusoid at the bin centre
    to_power = sample_rate * np.sum(w ** 2) / np.sum(w) ** 2
    return Spectrum(frequencies=freqs, amplitude=np.sqrt(psd * to_power), psd=psd,
                    resolution=sample_rate / segment_len, segmentLen=segment_len, overlap=overlap)


def comfort_metrics(log, band=(0.5, 5.0), segment_len: int = 65536, overlap: float = 0.5) -> ComfortMetrics:
    """Band RMS and spectral peak of the car-body acceleration."""
    spec = welch_spectrum(log.a2, log.sampleRate, min(segment_len, pow2_floor(len(log.a2))), overlap)
    return comfort_from_spectrum(spec, band)


def comfort_from_spectrum(spec: Spectrum, band=(0.5, 5.0)) -> ComfortMetrics:
    f_lo, f_hi = band
    if f_lo < 0 or f_hi > spec.frequencies[-1] or f_hi <= f_lo:
        raise ValueError("band must lie within [0, Nyquist]")
    sel = (spec.frequencies >= f_lo) & (spec.frequencies <= f_hi)
    amp = spec.amplitude[sel]
    if amp.size == 0 or not np.any(amp > 0):
        return ComfortMetrics(bandRms=0.0, peakFrequency=float("nan"), peakAmplitude=0.0)
    k = int(np.argmax(amp))
    return ComfortMetrics(bandRms=spec.band_rms(f_lo, f_hi), peakFrequency=float(spec.frequencies[sel][k]),
                          peakAmplitude=float(amp[k]))


def pow2_floor(n: int) -> int:
    return 1 << (max(int(n), 2).bit_length() - 1)


@dataclass(frozen=True)
class RideMetrics:
    name: str
    rmseGap: float
    maxAbsA2: float
    rmsA2: float
    bandRmsA2: float
    lowBandRmsA2: float
    peakFrequency: float
    peakAmplitude: float
    meanSolveMs: float
    saturatedFraction: float
    status: str


def ride_metrics(log, band=(0.5, 5.0), low_band=(0.2, 1.0), segment_len: int = 65536,
                 overlap: float = 0.5) -> RideMetrics:
    spec = welch_spectrum(log.a2, log.sampleRate, min(segment_len, pow2_floor(len(log.a2))), overlap)
    comfort = comfort_from_spectrum(spec, band)
    u = log.inputs
    sat = float(np.mean(np.abs(u) >= log.uMax)) if len(u) else 0.0
    return RideMetrics(name=log.name, rmseGap=rmse(log.ds), maxAbsA2=float(np.max(np.abs(log.a2))),
                       rmsA2=rmse(log.a2, float(np.mean(log.a2))), bandRmsA2=comfort.bandRms,
                       lowBandRmsA2=spec.band_rms(*low_band), peakFrequency=comfort.peakFrequency,
                       peakAmplitude=comfort.peakAmplitude, meanSolveMs=log.mean_solve_ms(),
                       saturatedFraction=sat, status=log.status)


METRIC_COLUMNS = ("controller", "status", "rmse_ds_m", "max_abs_a2", "rms_a2", "band_rms_a2",
                  "low_band_rms_a2", "peak_freq_hz", "peak_amp", "mean_solve_ms", "saturated_fraction")


def metrics_row(m: RideMetrics, include_timing: bool = True) -> list:
    return [m.name, m.status, repr(m.rmseGap), repr(m.maxAbsA2), repr(m.rmsA2), repr(m.bandRmsA2),
            repr(m.lowBandRmsA2), repr(m.peakFrequency), repr(m.peakAmplitude),
            repr(m.meanSolveMs) if include_timing else "", repr(m.saturatedFraction)]


def write_metrics_csv(metrics: list, path, include_timing: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for m in metrics:
            w.writerow(metrics_row(m, include_timing))


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def ratio_table(metrics: list, baseline: str = "C1M") -> list[tuple]:
    """Rows (controller, band-RMS ratio, RMSE ratio) relative to ``baseline``."""
    by_name = {m.name: m for m in metrics}
    if baseline not in by_name or len(metrics) < 2:
        return []
    base = by_name[baseline]
    rows = []
    for m in metrics:
        if m.name == baseline:
            continue
        rows.append((f"{m.name}/{baseline}", m.bandRmsA2 / base.bandRmsA2 if base.bandRmsA2 else float("nan"),
                     m.rmseGap / base.rmseGap if base.rmseGap else float("nan")))
    return rows


def write_ratio_csv(rows: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("ratio", "band_rms_a2", "rmse_ds"))
        for name, band, gap in rows:
            w.writerow((name, repr(band), repr(gap)))


def write_spectrum_csv(spec: Spectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("frequency_hz", "amplitude"))
        for f, a in zip(spec.frequencies.tolist(), spec.amplitude.tolist()):
            w.writerow((repr(f), repr(a)))


def read_spectrum_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]
