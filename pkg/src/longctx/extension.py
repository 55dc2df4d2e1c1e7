"""Context-window extension transforms over a rotary frequency basis.

Four methods produce a scaled angle table ``theta'``:

* ``extrapolation`` keeps every angle.
* ``pi`` divides every angle by the scale ``s``.
* ``ntk`` enlarges the base to ``b * s ** (D / (D - 2))``.
* ``mropepp`` keeps the temporal segment, interpolates the width segment
  like ``pi`` and ramps the height segment between the two.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError, InvalidDimensionError, InvalidExtensionError, InvalidScheduleError
from .mrope import DimensionLayout
from .rotary import FrequencyBasis, make_basis

__all__ = [
    "BASE_MEASUREMENTS",
    "BASE_TABLE",
    "METHODS",
    "PROFILE_ORIGINAL_LENGTH",
    "BaseMeasurement",
    "BaseRecommendation",
    "ExtensionPlan",
    "ScheduleStage",
    "base_table_json",
    "extend",
    "extend_extrapolation",
    "extend_mropepp",
    "extend_ntk",
    "extend_pi",
    "mropepp_ramp",
    "progressive_schedule",
    "ratio_profile",
    "recommend_base",
    "scale_factor",
]

METHODS = ("extrapolation", "pi", "ntk", "mropepp")

# Original visual context length per model profile, in tokens.
PROFILE_ORIGINAL_LENGTH = {"qwen2-vl": 16384, "qwen-vl": 2048}
DEFAULT_ORIGINAL_LENGTH = PROFILE_ORIGINAL_LENGTH["qwen2-vl"]


@dataclass(frozen=True)
class ExtensionPlan:
    method: str
    head_dim: int
    base: float
    original_length: float
    target_length: float
    scale: float
    scaled_angles: tuple[float, ...]
    effective_base: float

    def basis(self) -> FrequencyBasis:
        """The scaled angles packaged as a basis usable by the rotary code."""
        return FrequencyBasis(self.head_dim, self.effective_base, self.scaled_angles)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.scaled_angles, dtype=np.float64)


def scale_factor(target_length: float, original_length: float) -> float:
    """Extension ratio ``target_length / original_length``."""
    if not (original_length > 0 and target_length > 0):
        raise InvalidExtensionError("context lengths must be positive")
    if target_length < original_length:
        raise InvalidExtensionError(
            f"target length {target_length} is shorter than the original {original_length}"
        )
    return target_length / original_length


def _check_scale(s: float) -> float:
    s = float(s)
    if not math.isfinite(s) or s < 1.0:
        raise InvalidExtensionError(f"scale must be a finite number >= 1, got {s}")
    return s


def _plan(method, basis, s, original_length, angles, effective_base) -> ExtensionPlan:
    if original_length is None:
        original_length = DEFAULT_ORIGINAL_LENGTH
    return ExtensionPlan(
        method=method,
        head_dim=basis.head_dim,
        base=basis.base,
        original_length=original_length,
        target_length=original_length * s,
        scale=s,
        scaled_angles=tuple(float(a) for a in angles),
        effective_base=effective_base,
    )


def extend_extrapolation(basis: FrequencyBasis, s: float = 1.0, original_length=None) -> ExtensionPlan:
    s = _check_scale(s)
    return _plan("extrapolation", basis, s, original_length, basis.angles, basis.base)


def extend_pi(basis: FrequencyBasis, s: float, original_length=None) -> ExtensionPlan:
    s = _check_scale(s)
    return _plan("pi", basis, s, original_length, [a / s for a in basis.angles], basis.base)


def extend_ntk(basis: FrequencyBasis, s: float, original_length=None) -> ExtensionPlan:
    """Fixed-scale NTK-aware base enlargement.

    The highest pair ends up interpolated by exactly ``1/s`` while pair 0 is
    left untouched.
    """
    s = _check_scale(s)
    dim = basis.head_dim
    if dim <= 2:
        raise InvalidDimensionError("NTK scaling needs head_dim > 2")
    if s == 1.0:
        new_base = basis.base
    else:
        new_base = basis.base * s ** (dim / (dim - 2))
    angles = make_basis(dim, new_base).angles
    return _plan("ntk", basis, s, original_length, angles, new_base)


def ratio_profile(basis: FrequencyBasis, target_length: float) -> np.ndarray:
    """``r_d = target_length / wavelength_d`` for every rotary pair."""
    return target_length * basis.as_array() / (2.0 * math.pi)


def mropepp_ramp(basis: FrequencyBasis, layout: DimensionLayout, target_length: float) -> np.ndarray:
    """Height-segment blend weight, 1 at pair ``2x`` and 0 at pair ``5x``.

    The ramp is linear in ratio space, ``(r_d - r_5x) / (r_2x - r_5x)``,
    clamped to [0, 1]. It is evaluated for every pair, though only the
    height segment uses it.
    """
    layout.check(basis)
    x = layout.granularity
    r = ratio_profile(basis, target_length)
    lo, hi = r[5 * x], r[2 * x]
    if hi == lo:
        return np.ones_like(r)
    return np.clip((r - lo) / (hi - lo), 0.0, 1.0)


def extend_mropepp(basis: FrequencyBasis, layout: DimensionLayout, s: float, original_length=None) -> ExtensionPlan:
    s = _check_scale(s)
    layout.check(basis)
    if original_length is None:
        original_length = DEFAULT_ORIGINAL_LENGTH
    x = layout.granularity
    theta = basis.as_array()
    gamma = mropepp_ramp(basis, layout, original_length * s)
    out = theta.copy()
    height = slice(2 * x, 5 * x)
    out[height] = (1.0 / s + (1.0 - 1.0 / s) * gamma[height]) * theta[height]
    out[5 * x:] = theta[5 * x:] / s
    return _plan("mropepp", basis, s, original_length, out, basis.base)


def extend(method: str, basis: FrequencyBasis, s: float, original_length=None, layout=None) -> ExtensionPlan:
    """Dispatch to one of the four methods by name."""
    method = method.lower().replace("-", "").replace("_", "")
    if method in ("extrapolation", "none", "direct"):
        return extend_extrapolation(basis, s, original_length)
    if method == "pi":
        return extend_pi(basis, s, original_length)
    if method == "ntk":
        return extend_ntk(basis, s, original_length)
    if method in ("mropepp", "mrope++"):
        if layout is None:
            layout = DimensionLayout.for_head_dim(basis.head_dim)
        return extend_mropepp(basis, layout, s, original_length)
    raise ConfigurationError(f"unknown extension method {method!r}; choose from {METHODS}")


@dataclass(frozen=True)
class BaseRecommendation:
    context_length: int
    recommended_base: float
    provenance: str


@dataclass(frozen=True)
class BaseMeasurement:
    """One row of the measured RoPE-base comparison at 128K."""

    base: int
    label: str
    videomme_long: float
    videomme_avg: float
    mme_sum: float
    mmbench: float


BASE_TABLE: tuple[BaseRecommendation, ...] = (
    BaseRecommendation(2048, 10_000.0, "default base of the 2K-context Qwen-VL model"),
    BaseRecommendation(131072, 500_000.0, "selected: best measured base for 128K (VideoMME-Long 43.2)"),
    BaseRecommendation(131072, 4_900_000.0, "external blog recommendation for 128K; reported but not selected"),
)

BASE_MEASUREMENTS: tuple[BaseMeasurement, ...] = (
    BaseMeasurement(10_000, "default", 39.5, 41.1, 1848.29, 60.9),
    BaseMeasurement(500_000, "optimal", 43.2, 51.2, 1862.62, 61.5),
    BaseMeasurement(1_000_000, "", 43.1, 51.1, 1862.20, 61.4),
)


def recommend_base(context_length: int, table=BASE_TABLE) -> BaseRecommendation:
    """Entry for the smallest tabulated length >= ``context_length``.

    Falls back to the largest length. When several rows share a length the
    first one wins, so table order encodes preference.
    """
    table = list(table)
    if not table:
        raise ConfigurationError("base table is empty")
    lengths = [e.context_length for e in table]
    if lengths != sorted(lengths):
        raise ConfigurationError("base table must be sorted by context_length")
    eligible = [n for n in lengths if n >= context_length]
    chosen = min(eligible) if eligible else max(lengths)
    return next(e for e in table if e.context_length == chosen)


def base_table_json(table=BASE_TABLE, measurements=BASE_MEASUREMENTS) -> str:
    payload = {
        "recommendations": [asdict(e) for e in table],
        "measurements_128k": [asdict(m) for m in measurements],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class ScheduleStage:
    index: int
    target_length: int
    scale: float


def progressive_schedule(stage_lengths) -> list[ScheduleStage]:
    """Stages of increasing context length, each scaled against the previous."""
    lengths = [int(n) for n in stage_lengths]
    if not lengths:
        raise InvalidScheduleError("schedule needs at least one stage")
    if lengths[0] <= 0:
        raise InvalidScheduleError("stage lengths must be positive")
    for prev, cur in zip(lengths, lengths[1:]):
        if cur <= prev:
            raise InvalidScheduleError(f"stage lengths must strictly increase: {lengths}")
    stages = [ScheduleStage(0, lengths[0], 1.0)]
    for k in range(1, len(lengths)):
        stages.append(ScheduleStage(k, lengths[k], lengths[k] / lengths[k - 1]))
    return stages
