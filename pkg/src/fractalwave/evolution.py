"""Time evolution: leapfrog scheme, spectral solvers, transmutation.

The leapfrog recurrence is
    u(t+1) = 2 u(t) - u(t-1) + h^2 mu^-1 H u(t)
with starter frame u(1) = f + h g + (h^2/2) mu^-1 H f and boundary rows
pinned to zero after every update. Stability requires the eigenvalues of
-h^2 mu^-1 H to stay at or below the three-term recurrence's safe bound
of 3 (the energy estimate degrades between 3 and the hard limit 4 and
the scheme blows up beyond it).

The heat solution is recovered from wave data by the Gaussian average
    v(x,t) = integral (4 pi t)^{-1/2} exp(-s^2/(4t)) u(x,s) ds,
using the standard normalization, which is the one that satisfies
v(x,0) = f(x).
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import quad_vec
from scipy.interpolate import CubicSpline

from .errors import CflViolationError, CoverageError
from .forms import EnergyForm, values_of
from .spectral import EigenBasis, expand, synthesize

# exp(-x^2) tail beyond x = 5.3 is below 1e-12 of the Gaussian mass
GAUSSIAN_TAIL_CUT = 5.3


class Scheme(str, Enum):
    LEAPFROG = "leapfrog"
    SPECTRAL_WAVE = "spectral_wave"
    SPECTRAL_HEAT = "spectral_heat"


@dataclass(frozen=True)
class WaveInput:
    """Initial position f and velocity g, both vanishing on the boundary set."""

    f: np.ndarray
    g: np.ndarray
    boundary: frozenset[int]

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if f.shape != g.shape:
            raise ValueError("f and g must have the same length")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        b = sorted(self.boundary)
        scale = max(np.abs(f).max(initial=0.0), np.abs(g).max(initial=0.0), 1.0)
        if b and max(np.abs(f[b]).max(), np.abs(g[b]).max()) > 1e-12 * scale:
            raise ValueError("initial data must vanish on the boundary set")


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed fields produced by one solver run (t0 = 0)."""

    scheme: Scheme
    h: float
    level: int
    frames: np.ndarray              # (steps+1, n)
    boundary: frozenset[int]

    @property
    def steps(self) -> int:
        return self.frames.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.frames.shape[0])

    def to_csv(self, path, stride: int = 1) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "vertex", "value"])
            for k in range(0, self.frames.shape[0], stride):
                for v, val in enumerate(self.frames[k]):
                    writer.writerow([k, v, repr(float(val))])


TRAJECTORY_MAGIC = b"FWAVTRJ1"
TRAJECTORY_VERSION = 1


def trajectory_to_binary(traj: Trajectory, path) -> None:
    """Compact frame dump: header (magic, version, level, steps, h) + f64 data."""
    with open(path, "wb") as fh:
        fh.write(TRAJECTORY_MAGIC)
        fh.write(struct.pack("<IIQQd", TRAJECTORY_VERSION, traj.level,
                             traj.frames.shape[0], traj.frames.shape[1], traj.h))
        fh.write(np.ascontiguousarray(traj.frames, dtype="<f8").tobytes())


def trajectory_from_binary(path) -> Trajectory:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != TRAJECTORY_MAGIC:
            raise ValueError("not a trajectory file")
        version, level, nframes, nverts, h = struct.unpack("<IIQQd", fh.read(32))
        if version != TRAJECTORY_VERSION:
            raise ValueError(f"unsupported trajectory version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(nframes, nverts)
    return Trajectory(Scheme.LEAPFROG, h, level, data.copy(), frozenset())


def cfl_timestep(form: EnergyForm, epsilon: float = 0.01) -> float:
    """Largest safe step: lambda_max(-h^2 mu^-1 H) = 3 (1 - epsilon)."""
    lam = form.lambda_max()
    return float(np.sqrt(3.0 * (1.0 - epsilon) / lam))


def scaled_spectral_radius(form: EnergyForm, h: float) -> float:
    """lambda_max(-h^2 mu^-1 H) for a candidate step h."""
    return h * h * form.lambda_max()


def leapfrog(
    form: EnergyForm,
    data: WaveInput,
    h: float,
    steps: int,
    allow_unstable: bool = False,
) -> Trajectory:
    """Explicit three-term scheme for the graph wave equation."""
    lam_scaled = scaled_spectral_radius(form, h)
    if lam_scaled > 3.0 + 1e-9:
        if not allow_unstable:
            raise CflViolationError(h, lam_scaled)
        warnings.warn(
            f"proceeding with unstable step: lambda_max(-h^2 mu^-1 H) = {lam_scaled:.4g}",
            RuntimeWarning,
            stacklevel=2,
        )
    n = form.num_vertices
    f = values_of(data.f, n)
    g = values_of(data.g, n)
    b = sorted(data.boundary)

    u0 = f.copy()
    u0[b] = 0.0
    u1 = f + h * g + 0.5 * h * h * form.apply_operator(f)
    u1[b] = 0.0
    return leapfrog_from_frames(form, u0, u1, h, steps, data.boundary)


def leapfrog_from_frames(
    form: EnergyForm,
    u0: np.ndarray,
    u1: np.ndarray,
    h: float,
    steps: int,
    boundary: frozenset[int] = frozenset(),
) -> Trajectory:
    """Continue the three-term recurrence from two given frames.

    The recurrence is time-symmetric: restarting from (u(T), u(T-1))
    runs the evolution backwards.
    """
    n = form.num_vertices
    b = sorted(boundary)
    frames = np.empty((steps + 1, n))
    frames[0] = u0
    if steps >= 1:
        frames[1] = u1
    H, mu = form.H, form.mu
    for k in range(2, steps + 1):
        u = frames[k - 1]
        nxt = 2.0 * u - frames[k - 2] + h * h * ((H @ u) / mu)
        nxt[b] = 0.0
        frames[k] = nxt
    return Trajectory(Scheme.LEAPFROG, h, form.level, frames, boundary)


def _split_zero_modes(basis: EigenBasis) -> np.ndarray:
    lam = basis.lambdas
    return lam <= 1e-9 * max(1.0, lam[-1] if len(lam) else 1.0)


def spectral_wave(basis: EigenBasis, data: WaveInput, t: float) -> np.ndarray:
    """Eigenfunction-expansion wave solution at time t.

    Zero modes (Neumann) contribute alpha + beta t, the limit of the
    sin(sqrt(lam) t)/sqrt(lam) velocity kernel as lam -> 0.
    """
    if frozenset(data.boundary) != basis.boundary:
        raise ValueError("wave input boundary set does not match the basis")
    alpha = expand(basis, data.f)
    beta = expand(basis, data.g)
    zero = _split_zero_modes(basis)
    lam = basis.lambdas
    root = np.sqrt(np.where(zero, 1.0, lam))
    coeffs = np.where(
        zero,
        alpha + beta * t,
        alpha * np.cos(root * t) + beta * np.sin(root * t) / root,
    )
    return synthesize(basis, coeffs)


def wave_operator(basis: EigenBasis, f, t: float) -> np.ndarray:
    """W_t f: wave solution with initial position f and zero velocity."""
    alpha = expand(basis, f)
    zero = _split_zero_modes(basis)
    root = np.sqrt(np.where(zero, 1.0, basis.lambdas))
    coeffs = np.where(zero, alpha, alpha * np.cos(root * t))
    return synthesize(basis, coeffs)


def spectral_heat(basis: EigenBasis, f, t: float) -> np.ndarray:
    """P_t f: coefficients damped by exp(-lambda t); t = 0 is the identity."""
    if t < 0:
        raise ValueError("spectral_heat needs t >= 0")
    coeffs = expand(basis, f) * np.exp(-basis.lambdas * t)
    return synthesize(basis, coeffs)


def heat_kernel(basis: EigenBasis, x: int, y: int, t: float) -> float:
    """p(x, y, t) = sum_n exp(-lambda_n t) phi_n(x) phi_n(y)."""
    if t <= 0:
        raise ValueError("heat_kernel needs t > 0")
    return float(np.sum(np.exp(-basis.lambdas * t) * basis.phis[x] * basis.phis[y]))


def heat_kernel_row(basis: EigenBasis, x: int, t: float) -> np.ndarray:
    """p(x, ., t) for all vertices at once."""
    if t <= 0:
        raise ValueError("heat_kernel needs t > 0")
    return basis.phis @ (np.exp(-basis.lambdas * t) * basis.phis[x])


def complex_heat(basis: EigenBasis, f, z: complex) -> np.ndarray:
    """P_z f for complex time, Re z > 0; agrees with spectral_heat on the reals."""
    z = complex(z)
    if z.real <= 0:
        raise ValueError("complex_heat needs Re z > 0")
    coeffs = expand(basis, f).astype(complex) * np.exp(-basis.lambdas * z)
    return basis.phis @ coeffs


def gaussian_span(t: float) -> float:
    """Truncation S with Gaussian tail mass below 1e-12 for variance 2t."""
    return GAUSSIAN_TAIL_CUT * 2.0 * np.sqrt(t)


def transmute(
    source: EigenBasis | Trajectory,
    data: WaveInput,
    t: float,
    quad_tol: float = 1e-9,
) -> np.ndarray:
    """Heat solution as the Gaussian time-average of the wave solution.

    v(x,t) = integral (4 pi t)^{-1/2} exp(-s^2/(4t)) u(x,s) ds, computed
    by adaptive quadrature over [0, S] using u(x,-s) = u(x,s) (zero
    initial velocity). With an eigenbasis source, wave samples are exact;
    with a leapfrog trajectory they come from a cubic spline of the
    frames and the achievable accuracy drops to the interpolation error.
    """
    if t <= 0:
        raise ValueError("transmute needs t > 0")
    if np.abs(data.g).max(initial=0.0) > 1e-12 * max(1.0, np.abs(data.f).max(initial=0.0)):
        raise ValueError("transmutation requires zero initial velocity")
    S = gaussian_span(t)

    if isinstance(source, EigenBasis):
        def u_at(s: float) -> np.ndarray:
            return wave_operator(source, data.f, s)
    else:
        span = source.h * source.steps
        if span < S:
            raise CoverageError(S, span)
        spline = CubicSpline(source.times, source.frames, axis=0)

        def u_at(s: float) -> np.ndarray:
            return spline(s)

    weight = 1.0 / np.sqrt(4.0 * np.pi * t)

    def integrand(s: float) -> np.ndarray:
        return np.exp(-s * s / (4.0 * t)) * u_at(s)

    val, _ = quad_vec(integrand, 0.0, S, epsabs=quad_tol, epsrel=quad_tol, norm="max")
    return 2.0 * weight * val


def mollified_wave(basis: EigenBasis, f, sigma: float, t: float) -> np.ndarray:
    """Gaussian-in-time mollified wave: coefficients damped by exp(-sigma lambda / 2).

    Equals the convolution of W_. f with phi_sigma(s) =
    (2 pi sigma)^{-1/2} exp(-s^2 / (2 sigma)) evaluated at t.
    """
    if sigma <= 0:
        raise ValueError("mollified_wave needs sigma > 0")
    alpha = expand(basis, f)
    zero = _split_zero_modes(basis)
    lam = basis.lambdas
    root = np.sqrt(np.where(zero, 1.0, lam))
    coeffs = np.where(zero, alpha, alpha * np.exp(-0.5 * sigma * lam) * np.cos(root * t))
    return synthesize(basis, coeffs)


def mollified_wave_by_convolution(
    basis: EigenBasis, f, sigma: float, t: float, quad_tol: float = 1e-10
) -> np.ndarray:
    """Time-domain oracle: direct Gaussian convolution of spectral_wave."""
    if sigma <= 0:
        raise ValueError("needs sigma > 0")
    S = GAUSSIAN_TAIL_CUT * np.sqrt(2.0 * sigma)
    weight = 1.0 / np.sqrt(2.0 * np.pi * sigma)

    def integrand(s: float) -> np.ndarray:
        return np.exp(-s * s / (2.0 * sigma)) * wave_operator(basis, f, t - s)

    val, _ = quad_vec(integrand, -S, S, epsabs=quad_tol, epsrel=quad_tol, norm="max")
    return weight * val
