"""Named initial-data recipes used by the CLI and the experiment drivers."""

from __future__ import annotations

import numpy as np

from ..forms import EnergyForm, assemble, harmonic_extension
from ..geometry import ApproxGraph, FractalKind, build_graph, canonicalize
from ..spectral import EigenBasis


def bump_field(form: EnergyForm, depth: int) -> np.ndarray:
    """Nonnegative tent supported in the depth-`depth` cell at corner 0.

    The tent sits at the midpoint vertex opposite corner 0 inside the
    cell with word (0, ..., 0), is harmonic elsewhere at level depth+1,
    and is normalized to sup = 1. It vanishes on V_0 whenever depth >= 1.
    """
    g = form.graph
    if depth + 1 > g.level:
        raise ValueError(f"bump of depth {depth} needs level >= {depth + 1}")
    spec = g.spec
    tip_level = depth + 1
    g_tip = build_graph(spec, tip_level)
    form_tip = assemble(spec, g_tip)
    word = (0,) * depth
    tip = g_tip.index[canonicalize(word + (1,), 1 if spec.num_maps == 2 else 2)]
    delta = np.zeros(g_tip.num_vertices)
    delta[tip] = 1.0
    if tip_level == g.level:
        return delta
    return harmonic_extension(form_tip, form, delta)


def sine_field(g: ApproxGraph, k: int) -> np.ndarray:
    """sin(k pi x) sampled at the vertex coordinates (interval only)."""
    if g.spec.kind is not FractalKind.INTERVAL:
        raise ValueError("sine preset is interval-only")
    return np.sin(k * np.pi * g.coords[:, 0])


def make_field(
    preset: str,
    form: EnergyForm,
    basis: EigenBasis | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Build the field a preset string names.

    Recognized presets: eigenmode:N (1-based), bump:DEPTH, constant:C,
    sin:K (interval), random, zero.
    """
    name, _, arg = preset.partition(":")
    n = form.num_vertices
    if name == "eigenmode":
        if basis is None:
            raise ValueError("eigenmode preset needs an eigenbasis")
        idx = int(arg) - 1
        if not 0 <= idx < basis.size:
            raise ValueError(f"eigenmode {arg} out of range (basis has {basis.size})")
        return basis.phis[:, idx].copy()
    if name == "bump":
        return bump_field(form, int(arg) if arg else 2)
    if name == "constant":
        return np.full(n, float(arg) if arg else 1.0)
    if name == "sin":
        return sine_field(form.graph, int(arg) if arg else 1)
    if name == "random":
        if rng is None:
            raise ValueError("random preset needs a seeded generator")
        return rng.standard_normal(n)
    if name == "zero":
        return np.zeros(n)
    raise ValueError(f"unknown preset {preset!r}")
