"""Guideway deflection: periodic girder sag plus a seeded random surface profile."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter


@dataclass(frozen=True)
class IrregularityParams:
    rms: float = 0.5e-3  # target RMS [m]
    cutoff_wavelength: float = 10.0  # [m]
    spacing: float = 0.25  # sample spacing along the track [m]

    def __post_init__(self):
        if self.rms < 0:
            raise ValueError("irregularity rms must be non-negative")
        if not self.cutoff_wavelength > 0 or not self.spacing > 0:
            raise ValueError("cutoff wavelength and spacing must be positive")


def generate_irregularity(seed: int, length: float, spacing: float,
                          params: IrregularityParams) -> np.ndarray:
    """White Gaussian noise through a first-order spatial low-pass.

    The filter starts in its stationary state and the output is scaled by the
    stationary standard deviation, so the expected RMS equals ``params.rms``.
    """
    if not length > 0 or not spacing > 0:
        raise ValueError("length and spacing must be positive")
    count = int(math.ceil(length / spacing)) + 1
    if params.rms == 0:
        return np.zeros(count)
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(count)
    # pole of the discretized one-pole filter y' = (w - y) / tau in space
    pole = math.exp(-2 * math.pi * spacing / params.cutoff_wavelength)
    stationary_std = math.sqrt((1 - pole) / (1 + pole))
    start = pole * stationary_std * rng.standard_normal()
    shaped, _ = lfilter([1 - pole], [1, -pole], white, zi=[start])
    return shaped * (params.rms / stationary_std)


@dataclass(frozen=True)
class GuidewayProfile:
    girderLength: float = 31.0
    sagAmplitude: float = 2e-3
    irregularity: np.ndarray = field(default_factory=lambda: np.zeros(2), compare=False, repr=False)
    spacing: float = 0.25
    seed: int = 0
    enableStochastic: bool = True

    def __post_init__(self):
        if not self.girderLength > 0:
            raise ValueError("girder length must be positive")
        if self.sagAmplitude < 0:
            raise ValueError("sag amplitude must be non-negative")
        if not self.spacing > 0:
            raise ValueError("irregularity spacing must be positive")

    @property
    def covered_length(self) -> float:
        return (len(self.irregularity) - 1) * self.spacing


def build_profile(length: float, girder_length: float = 31.0, sag_amplitude: float = 2e-3,
                  irregularity: IrregularityParams = IrregularityParams(), seed: int = 0,
                  stochastic: bool = True) -> GuidewayProfile:
    if stochastic:
        samples = generate_irregularity(seed, length, irregularity.spacing, irregularity)
    else:
        samples = np.zeros(int(math.ceil(length / irregularity.spacing)) + 1)
    samples.setflags(write=False)
    return GuidewayProfile(girderLength=girder_length, sagAmplitude=sag_amplitude,
                           irregularity=samples, spacing=irregularity.spacing, seed=seed,
                           enableStochastic=stochastic)


def _irregularity_index(profile: GuidewayProfile, position):
    pos = np.asarray(position, dtype=float) / profile.spacing
    last = len(profile.irregularity) - 1
    k = np.clip(np.floor(pos).astype(int), 0, last - 1)
    frac = np.clip(pos - k, 0.0, 1.0)
    return k, frac


def deflection_at(profile: GuidewayProfile, position):
    """Vertical guideway deflection [m] at track position [m].

    Beyond the sampled length the last irregularity value is held.
    """
    phase = np.mod(np.asarray(position, dtype=float) / profile.girderLength, 1.0)
    sag = profile.sagAmplitude * np.sin(np.pi * phase)
    if not profile.enableStochastic:
        return sag
    k, frac = _irregularity_index(profile, position)
    rough = profile.irregularity[k] * (1 - frac) + profile.irregularity[k + 1] * frac
    return sag + rough


def deflection_slope(profile: GuidewayProfile, position):
    """Spatial derivative of the deflection [m/m], right-sided at kinks."""
    phase = np.mod(np.asarray(position, dtype=float) / profile.girderLength, 1.0)
    slope = profile.sagAmplitude * np.pi / profile.girderLength * np.cos(np.pi * phase)
    if not profile.enableStochastic:
        return slope
    k, frac = _irregularity_index(profile, position)
    inside = np.asarray(position, dtype=float) < profile.covered_length
    rough = np.where(inside, (profile.irregularity[k + 1] - profile.irregularity[k]) / profile.spacing, 0.0)
    return slope + rough


def breakpoints(profile: GuidewayProfile, end: float) -> np.ndarray:
    """Track positions in (0, end) where the deflection slope jumps.

    These are the girder joints and, when enabled, the irregularity samples.
    """
    parts = []
    if profile.sagAmplitude > 0:
        parts.append(np.arange(1, int(end // profile.girderLength) + 2) * profile.girderLength)
    if profile.enableStochastic:
        parts.append(np.arange(1, len(profile.irregularity) - 1) * profile.spacing)
    if not parts:
        return np.zeros(0)
    pts = np.unique(np.concatenate(parts))
    return pts[(pts > 0) & (pts < end)]


def segment_slope(profile: GuidewayProfile, position, anchor):
    """Slope of the smooth piece containing ``anchor``, evaluated at ``position``.

    Unlike :func:`deflection_slope` this gives the correct one-sided value at
    either end of a piece, which is what a step integrator needs.
    """
    position = np.asarray(position, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    span_start = np.floor(anchor / profile.girderLength) * profile.girderLength
    phase = (position - span_start) / profile.girderLength
    slope = profile.sagAmplitude * np.pi / profile.girderLength * np.cos(np.pi * phase)
    if not profile.enableStochastic:
        return slope
    k, _ = _irregularity_index(profile, anchor)
    inside = anchor < profile.covered_length
    rough = np.where(inside, (profile.irregularity[k + 1] - profile.irregularity[k]) / profile.spacing, 0.0)
    return slope + rough


def excitation_frequency(profile: GuidewayProfile, speed: float) -> float:
    """Girder-passing frequency [Hz] at vehicle speed [m/s]."""
    if not speed > 0:
        raise ValueError("speed must be positive")
    return speed / profile.girderLength


def export_profile(profile: GuidewayProfile, path, step: float | None = None) -> None:
    """Write two columns (position, deflection) sampled at ``step``."""
    step = profile.spacing if step is None else step
    pos = np.arange(0.0, profile.covered_length + 0.5 * step, step)
    np.savetxt(path, np.column_stack([pos, deflection_at(profile, pos)]), fmt="%.17g",
               header="position_m deflection_m")


def import_profile_samples(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(Path(path), ndmin=2)
    return data[:, 0], data[:, 1]
