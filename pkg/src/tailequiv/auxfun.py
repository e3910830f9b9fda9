"""Bounded odd link functions used to compress log-ratios into [-1, 1]."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ParameterError

KINDS = ("clamp", "arctan", "normcdf")


@dataclass(frozen=True)
class AuxFunction:
    """An increasing, odd, bounded map h: R -> [-1, 1] with h(0) = 0.

    ``scale`` is the saturation point of the clamp kind, ``x / scale``
    clipped to [-1, 1]; the smooth kinds ignore it.
    """

    kind: str
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown link kind {self.kind!r}; expected one of {KINDS}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ParameterError(f"link scale must be positive and finite, got {self.scale}")

    def __call__(self, x):
        return evaluate(self, x)

    def derivative(self, x):
        return derivative(self, x)

    @property
    def saturation(self) -> float:
        """sup{x : h(x) in (0, 1)}; infinite for the smooth kinds."""
        return self.scale if self.kind == "clamp" else math.inf

    def __str__(self):
        if self.kind == "clamp":
            return f"clamp({self.scale:g})"
        return self.kind


def make_clamp(scale: float) -> AuxFunction:
    if not scale > 0:
        raise ParameterError(f"clamp scale must be positive, got {scale}")
    return AuxFunction("clamp", float(scale))


def make_arctan() -> AuxFunction:
    return AuxFunction("arctan")


def make_normcdf() -> AuxFunction:
    return AuxFunction("normcdf")


def _unwrap(out):
    return float(out) if np.ndim(out) == 0 else out


def evaluate(h: AuxFunction, x):
    x = np.asarray(x, dtype=float)
    if h.kind == "clamp":
        out = np.clip(x / h.scale, -1.0, 1.0)
    elif h.kind == "arctan":
        out = (2.0 / math.pi) * np.arctan(x)
    else:
        # 2 * (Phi(x) - 1/2), written via erf-free ndtr so that h(-x) = -h(x)
        out = np.where(x >= 0, 1.0 - 2.0 * ndtr(-x), 2.0 * ndtr(x) - 1.0)
    return _unwrap(out)


def derivative(h: AuxFunction, x):
    """Derivative of ``h``; at the clamp kinks the interior slope is used."""
    x = np.asarray(x, dtype=float)
    if h.kind == "clamp":
        out = np.where(np.abs(x) <= h.scale, 1.0 / h.scale, 0.0)
    elif h.kind == "arctan":
        out = (2.0 / math.pi) / (1.0 + x * x)
    else:
        out = 2.0 * np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return _unwrap(out)


_SPEC = re.compile(r"^\s*(clamp|arctan|normcdf)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def parse_aux(text: str) -> AuxFunction:
    """Parse a config value such as ``clamp(1.5)``, ``arctan`` or ``normcdf``."""
    m = _SPEC.match(text)
    if not m:
        raise ParameterError(f"cannot parse link function {text!r}")
    kind, arg = m.group(1), m.group(2)
    if kind == "clamp":
        if not arg:
            raise ParameterError("clamp needs a numeric scale, e.g. clamp(1.5)")
        try:
            return make_clamp(float(arg))
        except ValueError as exc:
            raise ParameterError(f"bad clamp scale {arg!r}") from exc
    if arg:
        raise ParameterError(f"{kind} takes no argument")
    return AuxFunction(kind)
