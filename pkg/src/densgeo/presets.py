"""Analytic initial-data presets; part of the CLI contract.

Raw formulas (before role normalization):
  uniform                          1
  zero                             0
  cos-bump amplitude a mode m      1 + a*cos(m*x)         (|a| < 1)
  sin-bump amplitude a mode m      a*sin(m*x)
  gauss-like center c width w      0.5 + exp((cos(x-c)-1)/w^2)
                                   (2-D: cos(x-c)+cos(y-c)-2 in the exponent)

A field used as a density is normalized to unit mass and must be positive; a
field used as a momentum potential is projected to mean zero.
"""
from __future__ import annotations

import numpy as np

from .spectral import Grid, ScalarField


class PresetError(ValueError):
    """Unknown preset or parameters out of the documented range."""


def _parse_kv(tokens: list) -> dict:
    if len(tokens) % 2 != 0:
        raise PresetError(f"preset arguments must come in pairs: {tokens}")
    out = {}
    for name, value in zip(tokens[::2], tokens[1::2]):
        try:
            out[name] = float(value)
        except ValueError:
            raise PresetError(f"bad numeric value {value!r} for {name!r}") from None
    return out


def raw_preset(grid: Grid, spec: str) -> np.ndarray:
    tokens = spec.split()
    if not tokens:
        raise PresetError("empty preset")
    name, args = tokens[0], _parse_kv(tokens[1:])
    x = grid.coords[0]
    if name == "uniform":
        return np.ones(grid.shape)
    if name == "zero":
        return np.zeros(grid.shape)
    if name == "cos-bump":
        a, m = args.get("amplitude", 0.5), int(args.get("mode", 1))
        if abs(a) >= 1.0:
            raise PresetError(f"cos-bump amplitude must satisfy |a| < 1, got {a}")
        return 1.0 + a * np.cos(m * x)
    if name == "sin-bump":
        a, m = args.get("amplitude", 0.5), int(args.get("mode", 1))
        return a * np.sin(m * x)
    if name == "gauss-like":
        c, w = args.get("center", np.pi), args.get("width", 0.7)
        if w <= 0.0:
            raise PresetError(f"gauss-like width must be positive, got {w}")
        expo = np.cos(x - c) - 1.0
        if grid.dim == 2:
            expo = expo + np.cos(grid.coords[1] - c) - 1.0
        return 0.5 + np.exp(expo / w ** 2)
    raise PresetError(f"unknown preset {name!r}")


def density_preset(grid: Grid, spec: str) -> ScalarField:
    vals = raw_preset(grid, spec)
    mass = vals.mean()
    if vals.min() <= 0.0 or mass <= 0.0:
        raise PresetError(f"preset {spec!r} is not a positive density")
    return ScalarField(grid, vals / mass)


def momentum_preset(grid: Grid, spec: str) -> ScalarField:
    vals = raw_preset(grid, spec)
    return ScalarField(grid, vals - vals.mean(), mean_zero=True)
