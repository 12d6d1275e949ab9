"""Polarization states, B92 analyzers and weak-coherent-pulse photon statistics."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

# Tail mass left out of the inversion table.
_TAIL = 1e-16
# Above this mean the inversion table gets long; defer to numpy's sampler.
INVERSION_MAX_MEAN = 10.0


class PolarizationState(enum.IntEnum):
    HORIZONTAL = 0
    VERTICAL = 1
    RIGHT_CIRCULAR = 2
    LEFT_CIRCULAR = 3


class AnalyzerSetting(enum.IntEnum):
    """Bob's two conclusive tests; the value equals the bit a click reveals."""

    TEST_FOR_ZERO = 0  # left-circular analyzer
    TEST_FOR_ONE = 1  # vertical analyzer


# PASSAGE[state, analyzer]: single-photon probability of passing to the SPCM.
PASSAGE = np.array(
    [
        #  zero  one
        [0.5, 0.0],  # H
        [0.5, 1.0],  # V
        [0.0, 0.5],  # R
        [1.0, 0.5],  # L
    ]
)
PASSAGE.setflags(write=False)


def passage_probability(prepared: PolarizationState, analyzer: AnalyzerSetting) -> float:
    """Probability that one photon in ``prepared`` produces a click behind ``analyzer``.

    Ideal optics and a perfect detector are assumed; device losses are
    applied separately.
    """
    return float(PASSAGE[PolarizationState(prepared), AnalyzerSetting(analyzer)])


def _check_mean(mean: float) -> float:
    mean = float(mean)
    if not math.isfinite(mean) or mean < 0:
        raise ValueError(f"mean photon number must be finite and >= 0, got {mean}")
    return mean


@dataclass(frozen=True)
class PhotonNumberDistribution:
    """Poisson photon-number statistics of an attenuated laser pulse."""

    mean_photon_number: float

    def __post_init__(self):
        _check_mean(self.mean_photon_number)

    def pmf(self, n):
        n = np.asarray(n)
        mu = self.mean_photon_number
        if mu == 0:
            return np.where(n == 0, 1.0, 0.0)
        return np.where(n >= 0, np.exp(-mu + n * math.log(mu) - gammaln(n + 1)), 0.0)

    def truncated_pmf(self, tail: float = _TAIL) -> np.ndarray:
        """Masses for n = 0..N, with N the first index leaving less than ``tail`` behind."""
        mu = self.mean_photon_number
        if mu == 0:
            return np.array([1.0])
        if mu > 700:
            raise ValueError("truncated_pmf is only tabulated for means up to 700")
        term = math.exp(-mu)
        masses = [term]
        n = 0
        # Past the mode the remaining tail is bounded by a geometric series.
        while n + 1 <= mu or term * mu / (n + 1 - mu) >= tail:
            n += 1
            term *= mu / n
            masses.append(term)
        return np.array(masses)

    @cached_property
    def _cdf(self) -> np.ndarray:
        return np.cumsum(self.truncated_pmf())

    def sample(self, rng: np.random.Generator, size=None):
        """Draw photon numbers; inversion below ``INVERSION_MAX_MEAN``."""
        mu = self.mean_photon_number
        if mu == 0:
            return 0 if size is None else np.zeros(size, dtype=np.int64)
        if mu >= INVERSION_MAX_MEAN:
            out = rng.poisson(mu, size=size)
            return int(out) if size is None else out.astype(np.int64)
        u = rng.random(size)
        out = np.searchsorted(self._cdf, u, side="right")
        return int(out) if size is None else out.astype(np.int64)


def sample_photon_number(dist: PhotonNumberDistribution, rng: np.random.Generator) -> int:
    return dist.sample(rng)


def multiphoton_probability(mean: float) -> float:
    """Unconditional P(n >= 2) for a Poisson pulse."""
    mean = _check_mean(mean)
    return -math.expm1(-mean) - mean * math.exp(-mean)


def multiphoton_fraction_given_detectable(mean: float) -> float:
    """P(n >= 2 | n >= 1): share of non-empty pulses carrying extra photons."""
    mean = _check_mean(mean)
    if mean == 0:
        raise ValueError("conditional multi-photon fraction is undefined for a zero mean")
    if mean < 0.5:
        # (e^x - 1 - x) / (e^x - 1) by series; the closed form cancels badly here.
        num = den = 0.0
        term = mean
        for k in range(1, 40):
            if k > 1:
                term *= mean / k
                num += term
            den += term
        return num / den
    return 1.0 - mean / math.expm1(mean) if mean < 700 else 1.0
