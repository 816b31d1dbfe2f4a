"""Shapley values of points for the mean width of their 3-D convex hull."""

from .dynconv import ConvQueue, DynamicConvolution, KernelFn, NaiveDynamicConvolution, convolve
from .errors import (
    DegenerateInput,
    EmptyInputError,
    EmptyQueueError,
    KernelWindowError,
    ParseError,
    Shapley3DError,
    SizeLimitError,
)
from .geometry import check_general_position, polar_order, project_along
from .oracle import exact_shapley, mc_mean_width, mc_shapley, mean_width_exact
from .shapley import ShapleyResult, shapley_mean_width

__all__ = [
    "ConvQueue",
    "DegenerateInput",
    "DynamicConvolution",
    "EmptyInputError",
    "EmptyQueueError",
    "KernelFn",
    "KernelWindowError",
    "NaiveDynamicConvolution",
    "ParseError",
    "Shapley3DError",
    "ShapleyResult",
    "SizeLimitError",
    "check_general_position",
    "convolve",
    "exact_shapley",
    "mc_mean_width",
    "mc_shapley",
    "mean_width_exact",
    "polar_order",
    "project_along",
    "shapley_mean_width",
]
