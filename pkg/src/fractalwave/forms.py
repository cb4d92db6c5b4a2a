"""Self-similar Dirichlet forms on the graph approximations.

Assembles the compatible energies E_m(u) = sum_e c_e (u(x)-u(y))^2 with
cell conductances r_word^-1 (unit conductance on Gamma_0), the symmetric
operator H with E(u, v) = -(u, H v), and the vertex measure weights
mu_{m,x} (each cell's measure split equally among its corners, which
equals the integral of the harmonic tent function at x).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import ApproxGraph, FractalSpec, cell_pullback_indices, embed_indices


@dataclass(frozen=True)
class Field:
    """Per-vertex real values at a fixed approximation level."""

    level: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


def values_of(u, n: int) -> np.ndarray:
    """Coerce a Field or array-like to a validated ndarray of length n."""
    v = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"field has shape {v.shape}, expected ({n},)")
    return v


class EnergyForm:
    """Conductances, operator H and measure weights of E_m on one graph.

    Immutable after assembly; all methods are pure.
    """

    def __init__(self, graph: ApproxGraph, conductances: np.ndarray, mu: np.ndarray):
        self.graph = graph
        self.conductances = conductances
        self.mu = mu
        n = graph.num_vertices
        a, b = graph.edges[:, 0], graph.edges[:, 1]
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([b, a, a, b])
        vals = np.concatenate([conductances, conductances, -conductances, -conductances])
        self.H = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        self._lambda_max: float | None = None

    @property
    def level(self) -> int:
        return self.graph.level

    @property
    def num_vertices(self) -> int:
        return self.graph.num_vertices

    def apply_operator(self, u) -> np.ndarray:
        """Pointwise Laplacian candidate mu^-1 H u."""
        v = values_of(u, self.num_vertices)
        return (self.H @ v) / self.mu

    def laplacian_matrix(self) -> sp.csr_matrix:
        """-H as a sparse positive semidefinite matrix."""
        return (-self.H).tocsr()

    def weighted_norm(self, u) -> float:
        v = values_of(u, self.num_vertices)
        return float(np.sqrt(np.sum(v * v * self.mu)))

    def weighted_inner(self, u, v) -> float:
        a = values_of(u, self.num_vertices)
        b = values_of(v, self.num_vertices)
        return float(np.sum(a * b * self.mu))

    def lambda_max(self, tol: float = 1e-10, max_iter: int = 100_000) -> float:
        """Largest eigenvalue of -mu^-1 H by power iteration.

        Computed on the symmetric similarity M^-1/2 (-H) M^-1/2 so the
        Rayleigh quotient is monotone; the result is cached.
        """
        if self._lambda_max is not None:
            return self._lambda_max
        s = np.sqrt(self.mu)
        L = self.laplacian_matrix()

        def matvec(x):
            return (L @ (x / s)) / s

        rng = np.random.default_rng(0x5EED)
        x = rng.standard_normal(self.num_vertices)
        x /= np.linalg.norm(x)
        lam = 0.0
        for _ in range(max_iter):
            y = matvec(x)
            lam_new = float(x @ y)
            ny = np.linalg.norm(y)
            if ny == 0.0:
                raise RuntimeError("power iteration collapsed to zero vector")
            x = y / ny
            if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
                self._lambda_max = lam_new
                return lam_new
            lam = lam_new
        raise RuntimeError(
            f"power iteration did not converge after {max_iter} steps; "
            "this indicates an assembly bug"
        )


def assemble(spec: FractalSpec, g: ApproxGraph) -> EnergyForm:
    """Assemble E_m, H and mu on a graph built from the same spec."""
    if g.spec.kind is not spec.kind:
        raise ValueError("graph was built from a different fractal spec")

    r_word_inv = np.empty(len(g.cells), dtype=float)
    mu_word = [Fraction(0)] * len(g.cells)
    for ci, (word, _) in enumerate(g.cells):
        rw = reduce(lambda acc, i: acc * spec.r[i], word, Fraction(1))
        mw = reduce(lambda acc, i: acc * spec.mu[i], word, Fraction(1))
        r_word_inv[ci] = float(1 / rw)
        mu_word[ci] = mw

    conductances = r_word_inv[g.edge_cell]

    # mu_{m,x} = sum over cells containing x of mu_word / |V0|, done in
    # exact arithmetic so the weights sum to 1 to the last bit.
    mu_frac = [Fraction(0)] * g.num_vertices
    share = Fraction(1, spec.v0_size)
    for ci, (_, cell_corners) in enumerate(g.cells):
        part = mu_word[ci] * share
        for v in cell_corners:
            mu_frac[v] += part
    mu = np.array([float(m) for m in mu_frac])

    return EnergyForm(g, conductances, mu)


def energy(form: EnergyForm, u, v=None) -> float:
    """E_m(u, v) = sum_e c_e (u(x)-u(y)) (v(x)-v(y)); E_m(u) when v omitted."""
    a = values_of(u, form.num_vertices)
    b = a if v is None else values_of(v, form.num_vertices)
    i, j = form.graph.edges[:, 0], form.graph.edges[:, 1]
    return float(np.sum(form.conductances * (a[i] - a[j]) * (b[i] - b[j])))


def harmonic_extension(form_m: EnergyForm, form_n: EnergyForm, u) -> np.ndarray:
    """Energy-minimizing extension of u from V_m to V_n, n > m.

    Solves the Laplace system on the new vertices with the V_m values
    held fixed; the result agrees with u on V_m and has E_n equal to
    E_m(u).
    """
    if form_n.level <= form_m.level:
        raise ValueError("target level must exceed source level")
    u = values_of(u, form_m.num_vertices)
    fixed = embed_indices(form_m.graph, form_n.graph)
    n = form_n.num_vertices
    is_fixed = np.zeros(n, dtype=bool)
    is_fixed[fixed] = True
    free = np.flatnonzero(~is_fixed)

    full = np.zeros(n)
    full[fixed] = u
    L = form_n.laplacian_matrix()
    rhs = -(L[free][:, fixed] @ u)
    sol = spla.spsolve(L[free][:, free].tocsc(), rhs)
    full[free] = sol

    residual = np.abs(L[free] @ full).max()
    scale = max(np.abs(u).max(), 1.0)
    assert residual <= 1e-8 * scale * form_n.conductances.max(), (
        "harmonic extension solve left a large residual"
    )
    return full


def resistance(form: EnergyForm, x: int, y: int) -> float:
    """Effective resistance R(x, y) = 1 / min{E(v) : v(x)=1, v(y)=0}.

    By compatibility the value is independent of the level used, as long
    as both points exist at that level.
    """
    if x == y:
        raise ValueError("resistance requires two distinct vertices")
    n = form.num_vertices
    if not (0 <= x < n and 0 <= y < n):
        raise IndexError("vertex index out of range")
    L = form.laplacian_matrix()
    free = np.array([i for i in range(n) if i not in (x, y)], dtype=np.int64)
    v = np.zeros(n)
    v[x] = 1.0
    if len(free):
        rhs = -(L[free][:, [x]] @ np.ones(1))
        v[free] = spla.spsolve(L[free][:, free].tocsc(), rhs)
    e = energy(form, v)
    return 1.0 / e


def resistance_matrix(form: EnergyForm) -> np.ndarray:
    """All-pairs effective resistance via the Laplacian pseudoinverse."""
    L = form.laplacian_matrix().toarray()
    Lp = np.linalg.pinv(L, rcond=1e-12)
    d = np.diag(Lp)
    return d[:, None] + d[None, :] - 2.0 * Lp


def self_similar_energy_parts(
    spec: FractalSpec, form_coarse: EnergyForm, form_fine: EnergyForm, u
) -> float:
    """sum_i r_i^-1 E_m(u o F_i) for u on V_{m+1} (self-similarity check)."""
    u = values_of(u, form_fine.num_vertices)
    total = 0.0
    for i in range(spec.num_maps):
        pull = cell_pullback_indices(form_coarse.graph, form_fine.graph, i)
        total += float(1 / spec.r[i]) * energy(form_coarse, u[pull])
    return total
