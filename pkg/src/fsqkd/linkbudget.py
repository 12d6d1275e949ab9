"""Closed-form ground-to-satellite link budget for B92 QKD.

The chain runs from emitted pulses, through the diffraction and beam-wander
footprint at the satellite, down to the sifted key rate.  Background
photons from the night or day earth pass the same filter, fiber and
detector as the signal.  Their gated rate sets the error rate.

All lo/hi pairs are ordered by value: the *hi* collection efficiency comes
from the *lo* beam-wander angle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

ARCSEC = math.pi / (180 * 3600)
UPLINK = "uplink"
DOWNLINK = "downlink"
DOWNLINK_IMPROVEMENT = 150.0


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be > 0, got {value}")


def _probability(name, value):
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class SatelliteScenario:
    altitude_m: float = 300e3
    wavelength_m: float = 772e-9
    tx_aperture_m: float = 0.30
    rx_aperture_m: float = 0.30
    pulse_rate_hz: float = 10e6
    mean_photon_number: float = 1.0
    atmospheric_transmission: float = 0.8
    beam_wander_arcsec_lo: float = 2.5
    beam_wander_arcsec_hi: float = 10.0
    detector_efficiency: float = 0.65
    protocol_efficiency: float = 0.25
    filter_transmission: float = 0.7
    fiber_coupling: float = 0.4
    tilt_correction_factor: float = 1.0
    protocol_rate_multiplier: int = 1
    direction: str = UPLINK
    downlink_improvement: float = DOWNLINK_IMPROVEMENT

    def __post_init__(self):
        for name in ("altitude_m", "wavelength_m", "tx_aperture_m", "rx_aperture_m", "pulse_rate_hz"):
            _positive(name, getattr(self, name))
        for name in ("atmospheric_transmission", "detector_efficiency", "protocol_efficiency",
                     "filter_transmission", "fiber_coupling"):
            _probability(name, getattr(self, name))
        if not (math.isfinite(self.mean_photon_number) and self.mean_photon_number >= 0):
            raise ValueError("mean_photon_number must be >= 0")
        if not 0 <= self.beam_wander_arcsec_lo <= self.beam_wander_arcsec_hi:
            raise ValueError("beam wander range must satisfy 0 <= lo <= hi")
        if not self.tilt_correction_factor >= 1:
            raise ValueError("tilt_correction_factor must be >= 1")
        if self.protocol_rate_multiplier not in (1, 2):
            raise ValueError("protocol_rate_multiplier must be 1 (B92) or 2 (BB84)")
        if self.direction not in (UPLINK, DOWNLINK):
            raise ValueError(f"direction must be {UPLINK!r} or {DOWNLINK!r}")
        if not self.downlink_improvement >= 1:
            raise ValueError("downlink_improvement must be >= 1")

    @property
    def optics_chain_efficiency(self) -> float:
        """Filter, fiber and detector: the losses shared by signal and background."""
        return self.filter_transmission * self.fiber_coupling * self.detector_efficiency


@dataclass(frozen=True)
class BackgroundScenario:
    name: str = "full_moon"
    radiance: float = 4e16  # photons s^-1 m^-2 sr^-1 um^-1
    fov_arcsec: float = 5.0
    filter_bandwidth_nm: float = 1.0
    gate_window_s: float = 1e-9
    detector_dark_rate_hz: float = 50.0
    fov_full_angle: bool = False  # True: fov_arcsec is the full cone angle

    def __post_init__(self):
        if not (math.isfinite(self.radiance) and self.radiance >= 0):
            raise ValueError("radiance must be >= 0")
        for name in ("fov_arcsec", "filter_bandwidth_nm", "gate_window_s"):
            _positive(name, getattr(self, name))
        if not self.detector_dark_rate_hz >= 0:
            raise ValueError("detector_dark_rate_hz must be >= 0")

    @property
    def solid_angle_sr(self) -> float:
        half = self.fov_arcsec * ARCSEC / (2 if self.fov_full_angle else 1)
        return math.pi * half**2


@dataclass(frozen=True)
class LinkBudgetReport:
    name: str
    direction: str
    spot_diameter_m: float
    collection_efficiency_lo: float
    collection_efficiency_hi: float
    arrival_rate_hz_lo: float
    arrival_rate_hz_hi: float
    key_rate_hz_lo: float  # without tilt correction
    key_rate_hz_hi: float
    corrected_key_rate_hz_lo: float  # with the scenario's tilt correction
    corrected_key_rate_hz_hi: float
    background_count_rate_hz: float
    dark_count_rate_hz: float
    ber_lo: float  # background only, at the corrected key rate
    ber_hi: float
    dark_ber_lo: float
    dark_ber_hi: float


def diffraction_spot_diameter(wavelength_m: float, tx_aperture_m: float, range_m: float) -> float:
    """Full first-null Airy diameter, 2.44 * wavelength * range / aperture."""
    return 2.44 * wavelength_m * range_m / tx_aperture_m


def collection_efficiency(beam_wander_arcsec: float, range_m: float, spot_diameter_m: float,
                          rx_aperture_m: float) -> float:
    """Fraction of the wandering beam caught by the receiver aperture.

    The long-term footprint is the diffraction spot swept over a disc of
    radius wander * range, giving a diameter of spot + 2 * wander * range.
    """
    footprint = spot_diameter_m + 2.0 * beam_wander_arcsec * ARCSEC * range_m
    if footprint <= 0:
        return 1.0
    return min(1.0, (rx_aperture_m / footprint) ** 2)


def key_rate_chain(scenario: SatelliteScenario, collection: float) -> tuple[float, float]:
    """Return ``(arrival_rate_hz, key_rate_hz)`` at the satellite aperture."""
    s = scenario
    arrival = s.pulse_rate_hz * s.mean_photon_number * s.atmospheric_transmission * collection
    key = (arrival * s.detector_efficiency * s.protocol_efficiency * s.filter_transmission
           * s.fiber_coupling * s.tilt_correction_factor * s.protocol_rate_multiplier)
    return arrival, key


def background_count_rate(bg: BackgroundScenario, rx_aperture_m: float, optics_chain_efficiency: float) -> float:
    area = math.pi * (rx_aperture_m / 2) ** 2
    bandwidth_um = bg.filter_bandwidth_nm * 1e-3
    return bg.radiance * area * bg.solid_angle_sr * bandwidth_um * optics_chain_efficiency


def ber_from_background(background_rate_hz: float, gate_window_s: float, pulse_rate_hz: float,
                        key_rate_hz: float) -> float:
    """Error fraction from uncorrelated counts landing in the gates.

    A noise click decodes to a random bit, so half of them are errors.
    """
    if not key_rate_hz > 0:
        raise ValueError("key rate must be > 0")
    gated = background_rate_hz * gate_window_s * pulse_rate_hz
    return 0.5 * gated / key_rate_hz


def downlink_adjustment(report: LinkBudgetReport, factor: float = DOWNLINK_IMPROVEMENT) -> LinkBudgetReport:
    """Scale an uplink budget to the satellite-transmitter geometry.

    Turbulence then acts only near the end of the path, so rates rise and
    error rates fall by the same factor.
    """
    if report.direction != DOWNLINK:
        raise ValueError("downlink_adjustment applies to downlink reports only")
    if not factor >= 1:
        raise ValueError("factor must be >= 1")
    return replace(
        report,
        arrival_rate_hz_lo=report.arrival_rate_hz_lo * factor,
        arrival_rate_hz_hi=report.arrival_rate_hz_hi * factor,
        key_rate_hz_lo=report.key_rate_hz_lo * factor,
        key_rate_hz_hi=report.key_rate_hz_hi * factor,
        corrected_key_rate_hz_lo=report.corrected_key_rate_hz_lo * factor,
        corrected_key_rate_hz_hi=report.corrected_key_rate_hz_hi * factor,
        ber_lo=report.ber_lo / factor,
        ber_hi=report.ber_hi / factor,
        dark_ber_lo=report.dark_ber_lo / factor,
        dark_ber_hi=report.dark_ber_hi / factor,
    )


def link_budget(scenario: SatelliteScenario, background: BackgroundScenario) -> LinkBudgetReport:
    s = scenario
    spot = diffraction_spot_diameter(s.wavelength_m, s.tx_aperture_m, s.altitude_m)
    eff_hi = collection_efficiency(s.beam_wander_arcsec_lo, s.altitude_m, spot, s.rx_aperture_m)
    eff_lo = collection_efficiency(s.beam_wander_arcsec_hi, s.altitude_m, spot, s.rx_aperture_m)

    uncorrected = replace(s, tilt_correction_factor=1.0)
    arr_lo, key_lo = key_rate_chain(uncorrected, eff_lo)
    arr_hi, key_hi = key_rate_chain(uncorrected, eff_hi)
    _, ckey_lo = key_rate_chain(s, eff_lo)
    _, ckey_hi = key_rate_chain(s, eff_hi)

    bg_rate = background_count_rate(background, s.rx_aperture_m, s.optics_chain_efficiency)
    dark = background.detector_dark_rate_hz

    def ber(rate, key):
        return ber_from_background(rate, background.gate_window_s, s.pulse_rate_hz, key)

    report = LinkBudgetReport(
        name=background.name,
        direction=UPLINK if s.direction == UPLINK else DOWNLINK,
        spot_diameter_m=spot,
        collection_efficiency_lo=eff_lo,
        collection_efficiency_hi=eff_hi,
        arrival_rate_hz_lo=arr_lo,
        arrival_rate_hz_hi=arr_hi,
        key_rate_hz_lo=key_lo,
        key_rate_hz_hi=key_hi,
        corrected_key_rate_hz_lo=ckey_lo,
        corrected_key_rate_hz_hi=ckey_hi,
        background_count_rate_hz=bg_rate,
        dark_count_rate_hz=dark,
        ber_lo=ber(bg_rate, ckey_hi),
        ber_hi=ber(bg_rate, ckey_lo),
        dark_ber_lo=ber(dark, ckey_hi),
        dark_ber_hi=ber(dark, ckey_lo),
    )
    if s.direction == DOWNLINK:
        report = downlink_adjustment(report, s.downlink_improvement)
    return report


def format_table(reports: list[LinkBudgetReport]) -> str:
    """Aligned plain-text rendering, one column block per background case."""
    rows = [
        ("spot diameter [m]", "spot_diameter_m", None),
        ("collection efficiency", "collection_efficiency_lo", "collection_efficiency_hi"),
        ("arrival rate [Hz]", "arrival_rate_hz_lo", "arrival_rate_hz_hi"),
        ("key rate [Hz]", "key_rate_hz_lo", "key_rate_hz_hi"),
        ("tilt-corrected key rate [Hz]", "corrected_key_rate_hz_lo", "corrected_key_rate_hz_hi"),
        ("background rate [Hz]", "background_count_rate_hz", None),
        ("dark rate [Hz]", "dark_count_rate_hz", None),
        ("BER (background)", "ber_lo", "ber_hi"),
        ("BER (dark)", "dark_ber_lo", "dark_ber_hi"),
    ]
    width = max(len(r[0]) for r in rows)
    out = []
    for rep in reports:
        out.append(f"[{rep.name}, {rep.direction}]")
        for label, lo, hi in rows:
            v = f"{getattr(rep, lo):.3g}"
            if hi:
                v += f" -- {getattr(rep, hi):.3g}"
            out.append(f"  {label:<{width}}  {v}")
    return "\n".join(out) + "\n"
