"""Local observations of a simulated field through compactly supported kernels.

An observation at resolution ``delta`` and location ``x_k`` is the
spatial inner product of the field with the rescaled kernel
``delta**-0.5 * K((x - x_k) / delta)``.  Alongside each such value the
package records the inner product with the Laplacian of the rescaled
kernel, which carries an extra ``delta**-2`` factor; the pair is what
the drift estimators in :mod:`meinhardt.estimator` consume.  Kernels are
supported on ``[-1, 1]`` before rescaling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate as _sci_integrate

from meinhardt.domain import TorusGrid, canonical_position, signed_displacement
from meinhardt.solver import Trajectory

# Below this many grid cells per unit of delta the sampled kernel is too
# coarse for reliable quadrature.
RESOLUTION_WARN_RATIO = 20.0


@dataclass(frozen=True)
class Kernel:
    """A mother kernel supported on ``[-1, 1]`` with its derived constants.

    Attributes
    ----------
    name:
        Short identifier used in metadata.
    profile:
        Vectorised ``K(x)``, zero outside ``[-1, 1]``.
    second_derivative:
        Vectorised ``K''(x)``, zero outside ``[-1, 1]``.
    norm_K:
        L2 norm of the profile.
    norm_dK:
        L2 norm of the first derivative.
    Sigma:
        The dimensionless ratio ``2 * norm_K**2 / norm_dK**2`` entering
        the asymptotic variance of the drift estimator.
    integral:
        Plain integral of the profile over the line.
    l1_norm:
        Integral of ``|K|``; equals ``integral`` for nonnegative kernels.
    oversample_factor:
        For kernels built from sampled tables, how many table points per
        final sample were used when differentiating; purely documentary
        for analytic kernels.
    """

    name: str
    profile: Callable[[np.ndarray], np.ndarray]
    second_derivative: Callable[[np.ndarray], np.ndarray]
    norm_K: float
    norm_dK: float
    Sigma: float
    integral: float
    l1_norm: float
    oversample_factor: int = 1


def _bump_raw(x: np.ndarray, steepness: float = 10.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    u = x[inside]
    out[inside] = np.exp(-steepness / (1.0 - u * u))
    return out


def _bump_d2_raw(x: np.ndarray, steepness: float = 10.0) -> np.ndarray:
    # With w(x) = -s / (1 - x^2): K = exp(w), K'' = (w'' + w'^2) K where
    # w' = -2 s x / (1 - x^2)^2 and w'' = -2 s (1 + 3 x^2) / (1 - x^2)^3.
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    u = x[inside]
    q = 1.0 - u * u
    w1 = -2.0 * steepness * u / q**2
    w2 = -2.0 * steepness * (1.0 + 3.0 * u * u) / q**3
    out[inside] = (w2 + w1 * w1) * np.exp(-steepness / q)
    return out


def _quad_on_support(f: Callable[[float], float]) -> float:
    value, _ = _sci_integrate.quad(f, -1.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    return value


def bump_kernel(steepness: float = 10.0) -> Kernel:
    """Smooth compactly supported bump ``exp(-steepness / (1 - x^2))``.

    All constants are computed by adaptive quadrature at construction.
    The derivative norm uses the analytic first derivative
    ``K'(x) = -2 s x (1 - x^2)**-2 K(x)``.
    """

    def profile(x):
        return _bump_raw(x, steepness)

    def second_derivative(x):
        return _bump_d2_raw(x, steepness)

    def d1(x):
        q = 1.0 - x * x
        return -2.0 * steepness * x / q**2 * np.exp(-steepness / q)

    norm_k_sq = _quad_on_support(lambda x: float(profile(np.array([x]))[0]) ** 2)
    norm_dk_sq = _quad_on_support(lambda x: d1(x) ** 2 if abs(x) < 1.0 else 0.0)
    total = _quad_on_support(lambda x: float(profile(np.array([x]))[0]))
    norm_k = float(np.sqrt(norm_k_sq))
    norm_dk = float(np.sqrt(norm_dk_sq))
    return Kernel(
        name=f"bump{steepness:g}",
        profile=profile,
        second_derivative=second_derivative,
        norm_K=norm_k,
        norm_dK=norm_dk,
        Sigma=2.0 * norm_k_sq / norm_dk_sq,
        integral=float(total),
        l1_norm=float(total),
        oversample_factor=1,
    )


def kernel_from_samples(
    samples: np.ndarray, name: str = "sampled", oversample_factor: int = 10
) -> Kernel:
    """Build a kernel from profile samples on a uniform grid over ``[-1, 1]``.

    The samples are interpolated linearly; the second derivative is
    obtained from fourth-order central differences on an oversampled
    copy of the table.  Endpoint samples must vanish so the profile
    extends continuously by zero.

    Args:
        samples: profile values at ``numpy.linspace(-1, 1, len(samples))``,
            at least five points.
        name: identifier stored on the kernel.
        oversample_factor: refinement of the differentiation table
            relative to the input table, at least 2.

    Returns:
        A Kernel with numerically derived constants.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size < 5:
        raise ValueError("need a 1D table of at least 5 samples")
    if not np.isfinite(samples).all():
        raise ValueError("kernel samples must be finite")
    if samples[0] != 0.0 or samples[-1] != 0.0:
        raise ValueError("kernel samples must vanish at the support endpoints")
    if oversample_factor < 2:
        raise ValueError("oversample_factor must be at least 2")

    # Fourth-order stencils act on the raw table (zero-extended beyond
    # the support); differentiating an interpolant instead would pile
    # the curvature onto the sample points.
    base = np.linspace(-1.0, 1.0, samples.size)
    h = base[1] - base[0]
    padded = np.concatenate([np.zeros(2), samples, np.zeros(2)])
    d2 = (
        -padded[4:]
        + 16.0 * padded[3:-1]
        - 30.0 * padded[2:-2]
        + 16.0 * padded[1:-3]
        - padded[:-4]
    ) / (12.0 * h * h)
    d1 = (padded[:-4] - 8.0 * padded[1:-3] + 8.0 * padded[3:-1] - padded[4:]) / (12.0 * h)

    def profile(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= 1.0, np.interp(x, base, samples), 0.0)

    def second_derivative(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= 1.0, np.interp(x, base, d2), 0.0)

    fine_n = oversample_factor * (samples.size - 1) + 1
    fine = np.linspace(-1.0, 1.0, fine_n)
    fine_vals = np.interp(fine, base, samples)
    fine_d1 = np.interp(fine, base, d1)
    norm_k_sq = float(np.trapezoid(fine_vals**2, fine))
    norm_dk_sq = float(np.trapezoid(fine_d1**2, fine))
    total = float(np.trapezoid(fine_vals, fine))
    l1 = float(np.trapezoid(np.abs(fine_vals), fine))
    return Kernel(
        name=name,
        profile=profile,
        second_derivative=second_derivative,
        norm_K=float(np.sqrt(norm_k_sq)),
        norm_dK=float(np.sqrt(norm_dk_sq)),
        Sigma=2.0 * norm_k_sq / norm_dk_sq,
        integral=total,
        l1_norm=l1,
        oversample_factor=oversample_factor,
    )


@dataclass(frozen=True)
class MeasurementLayout:
    """Where and how finely the field is observed.

    ``centers`` are folded into ``[0, length)``.  Construction warns when
    ``delta`` is poorly resolved by the grid or when neighbouring kernel
    supports overlap; both situations are legal but degrade accuracy.
    """

    delta: float
    centers: np.ndarray
    grid: TorusGrid

    def __post_init__(self) -> None:
        if not np.isfinite(self.delta) or self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.delta >= self.grid.length / 2.0:
            raise ValueError(
                f"delta = {self.delta} must be below half the circumference "
                f"{self.grid.length / 2}"
            )
        centers = np.atleast_1d(np.asarray(self.centers, dtype=float))
        if centers.ndim != 1 or centers.size < 1:
            raise ValueError("centers must be a nonempty 1D array")
        centers = canonical_position(centers, self.grid)
        centers.flags.writeable = False
        object.__setattr__(self, "centers", centers)

        ratio = self.delta / self.grid.dx
        if ratio < RESOLUTION_WARN_RATIO:
            warnings.warn(
                f"delta/dx = {ratio:.1f} is below {RESOLUTION_WARN_RATIO:g}; "
                "kernel quadrature on this grid will be coarse",
                stacklevel=3,
            )
        if centers.size > 1 and self.min_center_spacing() < 2.0 * self.delta:
            warnings.warn(
                "kernel supports overlap: nearest observation centers are "
                f"{self.min_center_spacing():.4g} apart but supports span "
                f"{2 * self.delta:.4g}",
                stacklevel=3,
            )

    @property
    def num_channels(self) -> int:
        return int(self.centers.size)

    def min_center_spacing(self) -> float:
        c = np.sort(self.centers)
        gaps = np.diff(np.concatenate([c, [c[0] + self.grid.length]]))
        return float(gaps.min())


def regular_layout(delta: float, num_channels: int, grid: TorusGrid) -> MeasurementLayout:
    """Evenly spread observation centers ``x_k = k * length / num_channels``."""
    if num_channels < 1:
        raise ValueError(f"num_channels must be at least 1, got {num_channels}")
    centers = grid.length * np.arange(num_channels) / num_channels
    return MeasurementLayout(delta=delta, centers=centers, grid=grid)


def scaled_kernel_samples(
    kernel: Kernel, delta: float, center: float, grid: TorusGrid
) -> np.ndarray:
    """Node samples of ``delta**-0.5 * K((x - center) / delta)`` on the torus.

    Displacements from the center are folded periodically, so supports
    crossing the coordinate seam at 0 wrap correctly.
    """
    if delta >= grid.length / 2.0:
        raise ValueError("kernel support would wrap onto itself: delta >= length/2")
    arg = signed_displacement(grid.coordinates, center, grid) / delta
    return kernel.profile(arg) / np.sqrt(delta)


def laplace_kernel_samples(
    kernel: Kernel, delta: float, center: float, grid: TorusGrid
) -> np.ndarray:
    """Node samples of the Laplacian of the rescaled kernel.

    Rescaling pulls two inverse powers of ``delta`` out of the second
    derivative, giving ``delta**-2.5 * K''((x - center) / delta)``.
    """
    if delta >= grid.length / 2.0:
        raise ValueError("kernel support would wrap onto itself: delta >= length/2")
    arg = signed_displacement(grid.coordinates, center, grid) / delta
    return kernel.second_derivative(arg) * delta**-2.5


def local_measure(field_values: np.ndarray, kernel_samples: np.ndarray, grid: TorusGrid) -> float:
    """Quadrature inner product of field node values with kernel samples."""
    field_values = np.asarray(field_values, dtype=float)
    if field_values.shape != kernel_samples.shape:
        raise ValueError(
            f"field shape {field_values.shape} does not match kernel samples "
            f"{kernel_samples.shape}"
        )
    return float(grid.dx * (field_values * kernel_samples).sum())


@dataclass
class MeasurementSet:
    """Local observations of the activator field on a time grid.

    ``local[j, k]`` is the smoothed field value and ``laplace[j, k]`` the
    Laplacian observation for channel ``k`` at ``times[j]``.  Channels
    are ordered as in ``layout.centers``; externally ingested data may
    carry no layout, leaving only the matrix ordering.
    """

    times: np.ndarray
    local: np.ndarray
    laplace: np.ndarray
    layout: MeasurementLayout | None
    kernel: Kernel | None = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.local = np.asarray(self.local, dtype=float)
        self.laplace = np.asarray(self.laplace, dtype=float)
        if self.local.ndim != 2 or self.local.shape[1] < 1:
            raise ValueError("local must be a (n_times, num_channels) matrix")
        channels = self.layout.num_channels if self.layout is not None else self.local.shape[1]
        expected = (self.times.size, channels)
        if self.local.shape != expected or self.laplace.shape != expected:
            raise ValueError(
                f"measurement matrices must have shape {expected}, got "
                f"{self.local.shape} and {self.laplace.shape}"
            )
        if self.times.size < 2:
            raise ValueError("need at least two observation times")
        if (np.diff(self.times) <= 0.0).any():
            raise ValueError("observation times must be strictly increasing")

    @property
    def num_channels(self) -> int:
        return self.local.shape[1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])


def measure_trajectory(
    trajectory: Trajectory,
    layout: MeasurementLayout,
    kernel: Kernel,
    time_stride: int = 1,
) -> MeasurementSet:
    """Observe the recorded activator field of a trajectory.

    Args:
        trajectory: simulation output; its grid must match the layout's.
        layout: observation resolution and centers.
        kernel: mother kernel used for both observation types.
        time_stride: keep every ``time_stride``-th recorded frame.

    Returns:
        A MeasurementSet over the retained frames.
    """
    if trajectory.grid != layout.grid:
        raise ValueError("trajectory and layout use different grids")
    if time_stride < 1:
        raise ValueError(f"time_stride must be at least 1, got {time_stride}")
    grid = trajectory.grid
    frames = trajectory.activator_matrix()[::time_stride]
    times = trajectory.times[::time_stride]

    loc_rows = np.stack(
        [scaled_kernel_samples(kernel, layout.delta, c, grid) for c in layout.centers]
    )
    lap_rows = np.stack(
        [laplace_kernel_samples(kernel, layout.delta, c, grid) for c in layout.centers]
    )
    local = grid.dx * frames @ loc_rows.T
    laplace = grid.dx * frames @ lap_rows.T
    return MeasurementSet(times=times, local=local, laplace=laplace, layout=layout, kernel=kernel)
