"""Drift and noise estimation from local observations.

The central estimator regresses increments of the smoothed field on the
Laplacian observations: summed over channels, the ratio of the
stochastic integral of the Laplacian observation against the smoothed
field to the time integral of the squared Laplacian observation.  All
stochastic integrals are left-endpoint Riemann sums, which is essential
for unbiasedness against the driving noise.  Companion routines compute
the observed information, realized-variation noise calibration, two
kinds of confidence intervals, a finite-difference fallback for the
Laplacian observations, and a Fourier-mode comparison estimator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sci_stats

from meinhardt.measurement import Kernel, MeasurementSet

_l2_bound_note = "degenerate observations: information is not positive"


class DegenerateDataError(ValueError):
    """Observations carry no information for the requested estimate."""


def ito_integral(integrand: np.ndarray, integrator: np.ndarray, times: np.ndarray) -> float:
    """Left-endpoint stochastic integral of one path against another.

    Computes ``sum_j integrand[j-1] * (integrator[j] - integrator[j-1])``
    over the sampling times.  Evaluating the integrand at the left
    endpoint keeps the sum uncorrelated with the forthcoming noise
    increment; a midpoint or right-endpoint variant would bias every
    drift estimate built on it.

    Args:
        integrand: sampled integrand path, shape ``(n_times,)``.
        integrator: sampled integrator path, same shape.
        times: strictly increasing sampling times, same shape.

    Returns:
        The scalar sum.
    """
    integrand = np.asarray(integrand, dtype=float)
    integrator = np.asarray(integrator, dtype=float)
    times = np.asarray(times, dtype=float)
    if integrand.shape != integrator.shape or integrand.shape != times.shape:
        raise ValueError("integrand, integrator, and times must share one shape")
    if integrand.ndim != 1 or integrand.size < 2:
        raise ValueError("need at least two samples")
    if (np.diff(times) <= 0.0).any():
        raise ValueError("times must be strictly increasing")
    return float(np.sum(integrand[:-1] * np.diff(integrator)))


def fisher_information(measurements: MeasurementSet) -> float:
    """Observed information: channel-summed time integral of the squared
    Laplacian observations, by left-endpoint quadrature."""
    lap = measurements.laplace
    dt = np.diff(measurements.times)
    return float(np.sum(lap[:-1, :] ** 2 * dt[:, None]))


def realized_variation(measurements: MeasurementSet) -> float:
    """Mean over channels of the summed squared increments of the smoothed field.

    For a noise intensity ``sigma`` and observation duration ``T`` this
    converges to ``T * sigma**2 * norm_K**2`` as the time grid refines,
    which makes it the natural noise calibration for the data-driven
    confidence interval.
    """
    inc = np.diff(measurements.local, axis=0)
    return float(np.sum(inc * inc) / measurements.num_channels)


@dataclass
class EstimateReport:
    """Result bundle of one drift estimation.

    ``ci_plugin`` uses the theoretical asymptotic variance and is absent
    (None) when the point estimate is negative, since the width would
    then require the square root of a negative drift.  ``ci_datadriven``
    is built from the observed information and a noise level that is
    either known or calibrated by realized variation.
    """

    D_hat: float
    fisher_info: float
    noise_qv: float
    delta: float | None
    num_channels: int
    duration: float
    alpha: float = 0.05
    ci_plugin: tuple[float, float] | None = None
    ci_datadriven: tuple[float, float] | None = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        def pair(ci):
            return None if ci is None else [ci[0], ci[1]]

        return {
            "D_hat": self.D_hat,
            "fisher_info": self.fisher_info,
            "noise_qv": self.noise_qv,
            "delta": self.delta,
            "num_channels": self.num_channels,
            "duration": self.duration,
            "alpha": self.alpha,
            "ci_plugin": pair(self.ci_plugin),
            "ci_datadriven": pair(self.ci_datadriven),
            "degenerate": self.degenerate,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def augmented_mle(measurements: MeasurementSet) -> EstimateReport:
    """Point estimate of the activator diffusivity from local observations.

    The estimate is the ratio of the channel-summed left-endpoint
    stochastic integrals of the Laplacian observation against the
    smoothed field to the observed information.

    Args:
        measurements: paired local and Laplacian observations.

    Returns:
        An EstimateReport with the point estimate, observed information,
        and realized variation filled in; confidence intervals are added
        separately by :func:`confidence_intervals`.

    Raises:
        DegenerateDataError: if the observed information is not strictly
            positive (all Laplacian observations vanish).
    """
    info = fisher_information(measurements)
    if not np.isfinite(info) or info <= 0.0:
        raise DegenerateDataError(_l2_bound_note)
    times = measurements.times
    numerator = sum(
        ito_integral(measurements.laplace[:, k], measurements.local[:, k], times)
        for k in range(measurements.num_channels)
    )
    d_hat = float(numerator / info)
    delta = measurements.layout.delta if measurements.layout is not None else None
    return EstimateReport(
        D_hat=d_hat,
        fisher_info=info,
        noise_qv=realized_variation(measurements),
        delta=delta,
        num_channels=measurements.num_channels,
        duration=measurements.duration,
    )


def confidence_intervals(
    report: EstimateReport,
    kernel: Kernel | None = None,
    sigma_known: float | None = None,
    alpha: float = 0.05,
) -> EstimateReport:
    """Attach symmetric confidence intervals to an estimate report.

    Two constructions are used.  The plugin interval has half width
    ``delta * sqrt(D_hat * Sigma / (M T)) * q`` with ``q`` the standard
    normal ``1 - alpha/2`` quantile; it needs the kernel constant
    ``Sigma`` and a nonnegative point estimate, and is omitted (with the
    report flagged degenerate) otherwise.  The data-driven interval has
    half width ``s * q / sqrt(fisher_info)`` where ``s`` is the noise
    scale ``sigma * norm_K``, taken from ``sigma_known`` and the kernel
    norm when the noise intensity is known, and from realized variation
    ``sqrt(noise_qv / T)`` otherwise.

    Args:
        report: output of :func:`augmented_mle`; returned mutated.
        kernel: mother kernel; required for the plugin interval and for
            a known-sigma data-driven interval.
        sigma_known: true noise intensity, if available.
        alpha: nominal non-coverage level in (0, 1].

    Returns:
        The same report with ``ci_plugin``, ``ci_datadriven``, and
        ``alpha`` filled in.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    q = float(_sci_stats.norm.ppf(1.0 - alpha / 2.0))
    report.alpha = alpha

    if sigma_known is not None:
        if kernel is None:
            raise ValueError("kernel is required to convert sigma_known to a noise scale")
        noise_scale = sigma_known * kernel.norm_K
    else:
        noise_scale = math.sqrt(max(report.noise_qv, 0.0) / report.duration)
    half_dd = noise_scale * q / math.sqrt(report.fisher_info)
    report.ci_datadriven = (report.D_hat - half_dd, report.D_hat + half_dd)

    if kernel is not None and report.delta is not None and report.D_hat >= 0.0:
        half_pl = (
            report.delta
            * math.sqrt(report.D_hat * kernel.Sigma / (report.num_channels * report.duration))
            * q
        )
        report.ci_plugin = (report.D_hat - half_pl, report.D_hat + half_pl)
    else:
        report.ci_plugin = None
        if report.D_hat < 0.0:
            report.degenerate = True
    return report


def _require_regular_centers(layout) -> None:
    """Raise unless the layout's centers are evenly spread around the ring."""
    centers = np.sort(np.asarray(layout.centers, dtype=float))
    length = layout.grid.length
    gaps = np.diff(np.concatenate([centers, [centers[0] + length]]))
    expected = length / centers.size
    if not np.allclose(gaps, expected, rtol=1e-9, atol=1e-9 * length):
        raise ValueError(
            "channel-difference operations need evenly spread observation "
            f"centers; gaps range over [{gaps.min():.4g}, {gaps.max():.4g}]"
        )


def fd_laplacian_measurements(
    local: np.ndarray, layout=None, length: float | None = None
) -> np.ndarray:
    """Laplacian observations approximated across observation channels.

    When only smoothed field values on an evenly spread ring of channels
    are available (no Laplacian kernel applied at acquisition time), the
    second spatial derivative is approximated by the periodic second
    difference over neighbouring channels with spacing
    ``h = length / num_channels``.

    Args:
        local: smoothed field values, shape ``(n_times, num_channels)``,
            channels ordered by position around the ring.
        layout: observation layout; its centers must be evenly spread.
            May be None for externally ingested matrices whose channel
            ordering is trusted, in which case ``length`` is required.
        length: domain circumference; ignored when a layout is given.

    Returns:
        Array of the same shape with the finite-difference Laplacian.

    Raises:
        ValueError: if the layout's centers are not evenly spread, or if
            neither a layout nor a length is supplied.
    """
    local = np.asarray(local, dtype=float)
    if local.ndim != 2 or local.shape[1] < 3:
        raise ValueError("need a (n_times, num_channels >= 3) matrix")
    if layout is not None:
        if layout.num_channels != local.shape[1]:
            raise ValueError(
                f"layout has {layout.num_channels} channels but the matrix "
                f"has {local.shape[1]}"
            )
        _require_regular_centers(layout)
        length = layout.grid.length
    elif length is None:
        raise ValueError("need either a layout or the domain circumference")
    h = length / local.shape[1]
    return (np.roll(local, -1, axis=1) - 2.0 * local + np.roll(local, 1, axis=1)) / (h * h)


def spectral_mle(
    local: np.ndarray, layout, times: np.ndarray, n_modes: int | None = None
) -> float:
    """Fourier-mode drift estimator from smoothed field values on a ring.

    The channel values are decomposed into discrete Fourier modes; each
    mode coefficient of wavenumber index ``l`` relaxes with rate
    ``D * (2 pi l / length)**2``, and the diffusivity is estimated by
    pooling left-endpoint stochastic integrals over the first
    ``n_modes`` modes (cosine and sine parts separately):

        D_hat = - sum_l lam_l int v_l dv_l / sum_l lam_l^2 int v_l^2 dt

    Args:
        local: smoothed field values, shape ``(n_times, num_channels)``.
        layout: observation layout; the centers must be evenly spread so
            the discrete Fourier transform across channels is meaningful.
        times: strictly increasing observation times.
        n_modes: number of nonzero modes to pool; defaults to
            ``min(10, num_channels // 4)`` and must stay below
            ``num_channels / 2`` (the aliasing limit).

    Returns:
        The pooled diffusivity estimate.

    Raises:
        DegenerateDataError: if the pooled denominator vanishes.
        ValueError: if the layout's centers are not evenly spread.
    """
    local = np.asarray(local, dtype=float)
    times = np.asarray(times, dtype=float)
    if local.ndim != 2 or local.shape[0] != times.size:
        raise ValueError("local must be (n_times, num_channels) matching times")
    if (np.diff(times) <= 0.0).any():
        raise ValueError("times must be strictly increasing")
    num_channels = local.shape[1]
    if layout.num_channels != num_channels:
        raise ValueError(
            f"layout has {layout.num_channels} channels but the matrix has {num_channels}"
        )
    _require_regular_centers(layout)
    length = layout.grid.length
    if n_modes is None:
        n_modes = min(10, num_channels // 4)
    if n_modes < 1:
        raise ValueError(f"n_modes must be at least 1, got {n_modes}")
    if n_modes >= num_channels / 2:
        raise ValueError(
            f"n_modes = {n_modes} reaches the aliasing limit for {num_channels} channels"
        )

    coeffs = np.fft.rfft(local, axis=1)
    dt = np.diff(times)
    numerator = 0.0
    denominator = 0.0
    for l in range(1, n_modes + 1):
        lam = (2.0 * np.pi * l / length) ** 2
        for part in (coeffs[:, l].real, coeffs[:, l].imag):
            numerator += lam * np.sum(part[:-1] * np.diff(part))
            denominator += lam * lam * np.sum(part[:-1] ** 2 * dt)
    if denominator <= 0.0:
        raise DegenerateDataError("no spectral energy in the requested modes")
    return float(-numerator / denominator)
