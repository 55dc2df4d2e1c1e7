"""Rotary position-embedding extension and long-context tooling for vision-language models."""

from ._kernels import BACKEND
from .errors import (
    ConfigurationError,
    DimensionMismatchError,
    InvalidBaseError,
    InvalidDimensionError,
    InvalidExtensionError,
    InvalidInputError,
    InvalidScheduleError,
    LongCtxError,
    MissingSampleError,
)
from .rotary import FrequencyBasis, apply_rotary, make_basis, rotation_matrix, wavelength
from .mrope import DimensionLayout, Image, Position3D, Text, Video, apply_mrope, assign_positions, mrope_score
from .extension import (
    ExtensionPlan,
    extend,
    extend_extrapolation,
    extend_mropepp,
    extend_ntk,
    extend_pi,
    progressive_schedule,
    recommend_base,
    scale_factor,
)
from .attention import AttentionInput, HaystackConfig, MRoPE, RoPE, attention, effective_length, run_haystack
from .hybrid import HybridConfig, compare_budgets, plan, tradeoff_table
from .packing import RecipeConfig, Sample, Turn, pack, sample_corpus, serialize_chatml, parse_chatml

__version__ = "0.1.0"
