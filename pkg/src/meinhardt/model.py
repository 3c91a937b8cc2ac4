"""Coefficients, reaction terms, and state container for the cell-polarity model.

The model couples an activator concentration A and an inhibitor
concentration I on a ring.  A static extracellular signal profile biases
activator production toward one side of the domain; the activator
autocatalyses with saturation, is quenched by the combined concentration,
and degrades linearly, while the inhibitor is produced from the activator
and degrades linearly.  Default coefficient values reproduce repolarising
dynamics on a circumference-20 domain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from meinhardt.domain import TorusGrid

# Keys of the flat parameter config format, in canonical order.
PARAM_KEYS = (
    "D_A",
    "D_I",
    "r_A",
    "r_I",
    "b_A",
    "b_I",
    "zeta_A",
    "zeta_I",
    "a",
    "sigma_A",
    "sigma_I",
)


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the stochastic activator-inhibitor system.

    Attributes
    ----------
    D_A, D_I:
        Diffusivities of activator and inhibitor.
    r_A, r_I:
        Linear degradation rates of activator and inhibitor.
    b_A:
        Basal activator production level.
    b_I:
        Inhibitor production rate (proportional to activator).
    zeta_A:
        Saturation coefficient of the activator autocatalysis.
    zeta_I:
        Offset in the quenching denominator; keeps the production term
        bounded when the quenching concentration vanishes, so it must be
        positive.
    a:
        Amplitude of the static extracellular signal modulation.
    sigma_A, sigma_I:
        Noise intensities multiplying the space-time white noise of each
        species.
    quench_norm:
        Which combined concentration enters the quenching denominator:
        ``"inhibitor"`` (the default) uses ``|I|`` alone, ``"l1"`` uses
        ``|A| + |I|``, and ``"l2"`` the Euclidean norm of the pair.
        Only the inhibitor-only reading leaves the required lateral
        inhibition intact: quenching by the activator itself removes the
        effective self-activation at the homogeneous rest state, which
        makes that state stable at every wavelength and suppresses both
        repolarisation and front formation at the default coefficients.
        The pair-norm variants are kept for sensitivity studies.
    """

    D_A: float
    D_I: float
    r_A: float
    r_I: float
    b_A: float
    b_I: float
    zeta_A: float
    zeta_I: float
    a: float
    sigma_A: float = 0.0
    sigma_I: float = 0.0
    quench_norm: str = "inhibitor"

    def __post_init__(self) -> None:
        for name in ("D_A", "D_I", "r_A", "r_I", "b_A", "b_I", "zeta_A"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(f"{name} must be a positive real, got {value}")
        if not np.isfinite(self.zeta_I) or self.zeta_I <= 0.0:
            raise ValueError(
                f"zeta_I must be positive to keep production bounded, got {self.zeta_I}"
            )
        if not 0.0 <= self.a < 1.0:
            raise ValueError(f"signal amplitude a must lie in [0, 1), got {self.a}")
        for name in ("sigma_A", "sigma_I"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be a nonnegative real, got {value}")
        if self.quench_norm not in ("inhibitor", "l1", "l2"):
            raise ValueError(
                f"quench_norm must be 'inhibitor', 'l1', or 'l2', got {self.quench_norm!r}"
            )
        if self.D_I <= self.D_A:
            warnings.warn(
                "inhibitor diffusivity D_I does not exceed activator diffusivity "
                "D_A; lateral inhibition patterning may be lost",
                stacklevel=3,
            )


def default_params() -> ModelParams:
    """Calibrated coefficient set for the repolarisation experiments."""
    return ModelParams(
        D_A=4.415e-2,
        D_I=9.768e-2,
        r_A=2.393e-1,
        r_I=2.378e-1,
        b_A=2.776e-1,
        b_I=2.076e-1,
        zeta_A=5.647e-3,
        zeta_I=3.397e-1,
        a=1.280e-2,
        sigma_A=0.02,
        sigma_I=0.0,
    )


@dataclass
class FieldPair:
    """Activator and inhibitor node values at one instant.

    ``has_negative`` records whether any entry of either field is
    negative at construction time; trajectory-level discarding of
    noise-corrupted paths is built on this flag.
    """

    activator: np.ndarray
    inhibitor: np.ndarray
    time: float = 0.0
    has_negative: bool = field(init=False)

    def __post_init__(self) -> None:
        self.activator = np.asarray(self.activator, dtype=float)
        self.inhibitor = np.asarray(self.inhibitor, dtype=float)
        if self.activator.shape != self.inhibitor.shape or self.activator.ndim != 1:
            raise ValueError(
                "activator and inhibitor must be 1D arrays of equal length, got "
                f"shapes {self.activator.shape} and {self.inhibitor.shape}"
            )
        self.has_negative = bool(
            (self.activator < 0.0).any() or (self.inhibitor < 0.0).any()
        )


def extracellular_signal(x, params: ModelParams, length: float):
    """Static signal profile modulating activator production.

    The profile is ``1 + a * cos(2 pi (x / length + 1/2))``: minimal at
    ``x = 0`` and maximal at the opposite side ``x = length / 2``, with
    relative modulation depth ``a``.
    """
    x = np.asarray(x, dtype=float)
    return 1.0 + params.a * np.cos(2.0 * np.pi * (x / length + 0.5))


def _quench_concentration(activator, inhibitor, params: ModelParams):
    if params.quench_norm == "inhibitor":
        return np.abs(inhibitor)
    if params.quench_norm == "l1":
        return np.abs(activator) + np.abs(inhibitor)
    return np.hypot(activator, inhibitor)


def activator_reaction(activator, inhibitor, x, params: ModelParams, length: float):
    """Reaction term of the activator equation.

    Saturating autocatalytic production, modulated by the extracellular
    signal and quenched by a combined concentration ``|y|`` selected by
    ``params.quench_norm`` (the inhibitor level by default), minus
    linear degradation:

        r_A * signal(x) * (b_A + A^2) / ((zeta_I + |y|) * (1 + zeta_A * A^2))
        - r_A * A

    Args:
        activator, inhibitor: concentrations, scalars or equal-shape arrays.
        x: positions matching the concentration shape.
        params: model coefficients.
        length: domain circumference.

    Returns:
        The reaction value with the broadcast shape of the inputs.

    Raises:
        ValueError: if any input concentration is not finite.
    """
    activator = np.asarray(activator, dtype=float)
    inhibitor = np.asarray(inhibitor, dtype=float)
    if not (np.isfinite(activator).all() and np.isfinite(inhibitor).all()):
        raise ValueError("non-finite concentration passed to activator_reaction")
    signal = extracellular_signal(x, params, length)
    combined = _quench_concentration(activator, inhibitor, params)
    asq = activator * activator
    production = (
        params.r_A
        * signal
        * (params.b_A + asq)
        / ((params.zeta_I + combined) * (1.0 + params.zeta_A * asq))
    )
    return production - params.r_A * activator


def inhibitor_reaction(activator, inhibitor, params: ModelParams):
    """Reaction term of the inhibitor equation: ``b_I * A - r_I * I``."""
    activator = np.asarray(activator, dtype=float)
    inhibitor = np.asarray(inhibitor, dtype=float)
    if not (np.isfinite(activator).all() and np.isfinite(inhibitor).all()):
        raise ValueError("non-finite concentration passed to inhibitor_reaction")
    return params.b_I * activator - params.r_I * inhibitor


def default_initial_condition(
    grid: TorusGrid,
    params: ModelParams,
    peak_height: float = 6.0,
    resting_level: float = 0.7,
) -> FieldPair:
    """Polarised starting state with the activator peak at ``x = 0``.

    The activator is a raised cosine sitting on a uniform resting
    background: it equals ``peak_height`` at ``x = 0`` and decays to
    ``resting_level`` at the antipode.  The inhibitor starts at its
    quasi-steady response ``(b_I / r_I) * A``.

    The resting background keeps the trough well away from zero, which
    matters for noisy runs: concentrations fluctuate around the profile,
    and a trough at zero would send essentially every noisy path
    negative immediately.  The default height and background were fixed
    once against the repolarisation timing of the deterministic system
    and are not meant to be tuned per run.
    """
    if peak_height <= 0.0:
        raise ValueError(f"peak_height must be positive, got {peak_height}")
    if not 0.0 <= resting_level < peak_height:
        raise ValueError(
            f"resting_level must lie in [0, peak_height), got {resting_level}"
        )
    x = grid.coordinates
    bump = 0.5 * (1.0 + np.cos(2.0 * np.pi * x / grid.length))
    activator = resting_level + (peak_height - resting_level) * bump
    inhibitor = (params.b_I / params.r_I) * activator
    return FieldPair(activator=activator, inhibitor=inhibitor, time=0.0)


def params_to_text(params: ModelParams) -> str:
    """Render coefficients as ``key = value`` lines in canonical key order."""
    lines = [f"{key} = {getattr(params, key):.17g}" for key in PARAM_KEYS]
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> ModelParams:
    """Parse coefficients from ``key = value`` lines.

    Blank lines and ``#`` comments are ignored.  All keys must be
    present exactly once and no unknown keys are accepted.
    """
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        if key not in PARAM_KEYS:
            raise ValueError(f"line {lineno}: unknown parameter key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate parameter key {key!r}")
        try:
            values[key] = float(rhs.strip())
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {rhs.strip()!r}") from exc
    missing = [key for key in PARAM_KEYS if key not in values]
    if missing:
        raise ValueError(f"missing parameter keys: {', '.join(missing)}")
    return ModelParams(**values)


def save_params(params: ModelParams, path) -> None:
    """Write coefficients to a flat config file."""
    with open(path, "w", encoding="ascii") as handle:
        handle.write(params_to_text(params))


def load_params(path) -> ModelParams:
    """Read coefficients from a flat config file written by save_params."""
    with open(path, "r", encoding="ascii") as handle:
        return params_from_text(handle.read())
