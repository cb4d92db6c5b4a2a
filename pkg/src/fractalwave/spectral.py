"""Eigenbasis of the measure Laplacian and Sierpinski-gasket spectral decimation.

Eigenvalues follow the continuous normalization: eigendecompose returns
eigenpairs of -mu^-1 H, so gasket eigenvalues carry the (3/2) 5^m scale
and interval eigenvalues converge to (k pi)^2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DecimationError, ResourceCapError
from .forms import EnergyForm, assemble, values_of
from .geometry import (
    ApproxGraph,
    BoundaryCondition,
    FractalKind,
    FractalSpec,
    build_graph,
    canonicalize,
    embed_indices,
    gasket_spec,
)

DENSE_CAP = 4000


@dataclass(frozen=True)
class EigenBasis:
    """Eigenpairs (lambda_n, phi_n) of -mu^-1 H, orthonormal in (u,v)_m.

    phis has one eigenfunction per column; boundary rows are exactly
    zero. lambdas is nondecreasing and the Neumann zero mode, when
    present, is the constant function of unit weighted norm.
    """

    form: EnergyForm
    boundary: frozenset[int]
    lambdas: np.ndarray
    phis: np.ndarray

    @property
    def level(self) -> int:
        return self.form.level

    @property
    def mu(self) -> np.ndarray:
        return self.form.mu

    @property
    def size(self) -> int:
        return len(self.lambdas)

    def inner(self, u, v) -> float:
        return self.form.weighted_inner(u, v)


def _group_degenerate(lambdas: np.ndarray, scale: float) -> list[slice]:
    """Slices of numerically equal eigenvalues (ties from symmetry)."""
    tol = 1e-10 * max(1.0, scale)
    groups = []
    start = 0
    for i in range(1, len(lambdas) + 1):
        if i == len(lambdas) or lambdas[i] - lambdas[i - 1] > tol:
            groups.append(slice(start, i))
            start = i
    return groups


def _sign_fix(vec: np.ndarray) -> np.ndarray:
    """Make the first significantly nonzero component positive."""
    thresh = 1e-10 * np.abs(vec).max()
    for v in vec:
        if abs(v) > thresh:
            return vec if v > 0 else -vec
    return vec


def _deterministic_orthonormalize(
    phis: np.ndarray, mu: np.ndarray, groups: list[slice]
) -> np.ndarray:
    """Fix each degenerate eigenspace by Gram-Schmidt in vertex-index order.

    Within a group, the basis is rebuilt from projections of the
    coordinate vectors e_0, e_1, ... so the output depends only on the
    eigenspace, not on solver-internal choices.
    """
    out = phis.copy()
    for g in groups:
        block = phis[:, g]
        dim = block.shape[1]
        if dim == 1:
            out[:, g.start] = _sign_fix(block[:, 0])
            continue
        coeff_rows = block * mu[:, None]        # row v = coefficients of P e_v
        basis: list[np.ndarray] = []
        for v in np.argsort(-np.linalg.norm(coeff_rows, axis=1), kind="stable"):
            cand = block @ coeff_rows[v]
            for b in basis:
                cand = cand - b * np.sum(b * cand * mu)
            norm = np.sqrt(np.sum(cand * cand * mu))
            if norm > 1e-8:
                basis.append(_sign_fix(cand / norm))
            if len(basis) == dim:
                break
        if len(basis) != dim:
            raise RuntimeError("degenerate eigenspace re-orthonormalization failed")
        out[:, g] = np.column_stack(basis)
    return out


def eigendecompose(
    form: EnergyForm,
    boundary: frozenset[int] | None = None,
    dense_cap: int = DENSE_CAP,
) -> EigenBasis:
    """Full eigenbasis of -mu^-1 H on the non-boundary subspace.

    Solves the symmetric similarity M^-1/2 (-H) M^-1/2 with a dense
    solver and maps eigenvectors back, so the basis is orthonormal in
    the weighted inner product by construction.
    """
    if boundary is None:
        boundary = form.graph.boundary
    n = form.num_vertices
    keep = np.array(sorted(set(range(n)) - set(boundary)), dtype=np.int64)
    if len(keep) > dense_cap:
        raise ResourceCapError(
            "dense eigensolve too large; use a coarser level", len(keep), dense_cap
        )
    s = np.sqrt(form.mu[keep])
    A = (-form.H).toarray()[np.ix_(keep, keep)]
    A /= s[:, None]
    A /= s[None, :]
    A = 0.5 * (A + A.T)
    w, V = sla.eigh(A)
    scale = max(abs(w[0]), abs(w[-1]), 1.0)
    if w[0] < -1e-9 * scale:
        raise RuntimeError(f"negative eigenvalue {w[0]} from a PSD operator")
    w = np.maximum(w, 0.0)

    phis = np.zeros((n, len(keep)))
    phis[keep] = V / s[:, None]
    phis = _deterministic_orthonormalize(phis, form.mu, _group_degenerate(w, scale))
    return EigenBasis(form=form, boundary=frozenset(boundary), lambdas=w, phis=phis)


def partial_eigendecompose(
    form: EnergyForm,
    boundary: frozenset[int] | None = None,
    k: int = 16,
) -> EigenBasis:
    """Lowest k eigenpairs via a sparse shift-invert solve.

    Used where the dense cap would be exceeded but only the bottom of
    the spectrum is needed (e.g. fine reference solutions). The shift -1
    keeps the factorized matrix positive definite for both boundary
    conditions.
    """
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    if boundary is None:
        boundary = form.graph.boundary
    n = form.num_vertices
    keep = np.array(sorted(set(range(n)) - set(boundary)), dtype=np.int64)
    if k >= len(keep) - 1:
        full = eigendecompose(form, boundary, dense_cap=max(DENSE_CAP, len(keep)))
        return EigenBasis(form, full.boundary, full.lambdas[:k], full.phis[:, :k])
    s = np.sqrt(form.mu[keep])
    A = (-form.H).tocsr()[keep][:, keep].tocoo()
    A = sp.csr_matrix((A.data / (s[A.row] * s[A.col]), (A.row, A.col)), shape=A.shape)
    w, V = spla.eigsh(A, k=k, sigma=-1.0, which="LM")
    order = np.argsort(w)
    w = np.maximum(w[order], 0.0)
    phis = np.zeros((n, k))
    phis[keep] = V[:, order] / s[:, None]
    scale = max(1.0, w[-1])
    phis = _deterministic_orthonormalize(phis, form.mu, _group_degenerate(w, scale))
    return EigenBasis(form=form, boundary=frozenset(boundary), lambdas=w, phis=phis)


def expand(basis: EigenBasis, u) -> np.ndarray:
    """Coefficients of u in the eigenbasis (weighted projections)."""
    v = values_of(u, basis.form.num_vertices)
    return basis.phis.T @ (v * basis.mu)


def synthesize(basis: EigenBasis, coeffs: np.ndarray) -> np.ndarray:
    """Field with the given eigenbasis coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.size,):
        raise ValueError(f"expected {basis.size} coefficients, got {coeffs.shape}")
    return basis.phis @ coeffs


def eigen_residuals(basis: EigenBasis) -> np.ndarray:
    """Relative residual ||-H phi - lam M phi|| / ||M phi|| per eigenpair.

    Rows in the boundary set are excluded: the eigenproblem only
    constrains the non-boundary block.
    """
    form = basis.form
    keep = np.array(sorted(set(range(form.num_vertices)) - basis.boundary), dtype=np.int64)
    L = form.laplacian_matrix()
    R = (L @ basis.phis) - basis.mu[:, None] * basis.phis * basis.lambdas[None, :]
    Mphi = basis.mu[:, None] * basis.phis
    num = np.linalg.norm(R[keep], axis=0)
    den = np.linalg.norm(Mphi[keep], axis=0)
    return num / den


def gram_error(basis: EigenBasis) -> float:
    """Max deviation of the weighted Gram matrix from the identity."""
    G = basis.phis.T @ (basis.phis * basis.mu[:, None])
    return float(np.abs(G - np.eye(basis.size)).max())


def weyl_exponent(basis: EigenBasis, resolution_factor: float = 8.0) -> float:
    """Least-squares slope of log lambda_n against log n.

    The fit runs over the resolved middle band of the spectrum, between
    the low eigenvalues (boundary detail, not the counting law) and the
    top of the spectrum, where discreteness distorts the counting
    function; everything above lambda_max / resolution_factor is
    dropped. Two details keep the fit stable against the staircase shape
    of self-similar spectra: the band spans a factor num_maps^2 in n, a
    whole number of periods of the counting function's log-periodic
    oscillation, and both band ends snap outward to multiplicity-cluster
    boundaries so no degenerate cluster is split.
    """
    lam = basis.lambdas
    if len(lam) < 100:
        raise ValueError(f"need at least 100 eigenvalues, got {len(lam)}")
    positive = lam[lam > 1e-9 * max(1.0, lam[-1])]
    tol = 1e-8 * positive[-1]

    hi = int(np.searchsorted(positive, positive[-1] / resolution_factor, side="right")) - 1
    while hi + 1 < len(positive) and positive[hi + 1] - positive[hi] <= tol:
        hi += 1
    branching = basis.form.graph.spec.num_maps
    lo = max(6, (hi + 1) // branching**2)
    while lo > 1 and positive[lo - 1] - positive[lo - 2] <= tol:
        lo -= 1
    n = np.arange(1, len(positive) + 1, dtype=float)
    mask = (n >= lo) & (n <= hi + 1)
    if mask.sum() < 20:
        raise ValueError("fewer than 20 eigenvalues in the resolved fit band")
    slope, _ = np.polyfit(np.log(n[mask]), np.log(positive[mask]), 1)
    return float(slope)


def export_spectrum_csv(basis: EigenBasis, path, include_vectors: bool = False) -> None:
    """Write n, lambda (and optionally the eigenfunction values) as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if include_vectors:
            header = ["n", "lambda"] + [f"v{j}" for j in range(basis.form.num_vertices)]
        else:
            header = ["n", "lambda"]
        writer.writerow(header)
        for i, lam in enumerate(basis.lambdas, start=1):
            row = [i, repr(float(lam))]
            if include_vectors:
                row += [repr(float(x)) for x in basis.phis[:, i - 1]]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Spectral decimation on the gasket
# ---------------------------------------------------------------------------

FORBIDDEN = (2.0, 5.0, 6.0)
# Graph eigenvalues evolve between levels by lam_k = lam_{k+1} (5 - lam_{k+1});
# the scale factor between graph and continuum normalization is (3/2) 5^m.
GRAPH_TO_CONTINUUM = 1.5


@dataclass(frozen=True)
class DecimatedPair:
    """One decimated eigenpair with its generation history."""

    lam: float                  # continuum normalization at the target level
    graph_value: float          # graph eigenvalue at the target level
    vector: np.ndarray
    birth_level: int
    birth_value: float
    branches: tuple[str, ...]   # "lo"/"hi" continuation choices, coarse to fine


def _graph_scale(level: int) -> float:
    return GRAPH_TO_CONTINUUM * 5.0**level


def _extend_eigenvector(
    g_coarse: ApproxGraph, g_fine: ApproxGraph, u: np.ndarray, lam_fine: float
) -> np.ndarray:
    """Local decimation extension of an eigenfunction one level down.

    New midpoint values inside each coarse cell come from the classical
    rule y_opp(c) = ((4 - lam)(u_a + u_b) + 2 u_c) / ((2 - lam)(5 - lam))
    where (a, b) is the midpoint's edge and c the opposite corner.
    """
    denom = (2.0 - lam_fine) * (5.0 - lam_fine)
    if abs(denom) < 1e-12:
        raise DecimationError(f"extension undefined at forbidden value {lam_fine}")
    out = np.zeros(g_fine.num_vertices)
    out[embed_indices(g_coarse, g_fine)] = u
    for word, cell_corners in g_coarse.cells:
        vals = [u[c] for c in cell_corners]
        for a, b, c in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            mid = g_fine.index[canonicalize(word + (a,), b)]
            out[mid] = ((4.0 - lam_fine) * (vals[a] + vals[b]) + 2.0 * vals[c]) / denom
    return out


def _born_eigenspace(
    form: EnergyForm, boundary: frozenset[int], lam_graph: float
) -> list[np.ndarray]:
    """Eigenvectors at one of the forbidden graph values, at its birth level.

    These modes have no coarser ancestor, so they are extracted directly
    as the eigenspace of the symmetric operator at the known value.
    """
    n = form.num_vertices
    keep = np.array(sorted(set(range(n)) - boundary), dtype=np.int64)
    target = _graph_scale(form.level) * lam_graph
    s = np.sqrt(form.mu[keep])
    A = (-form.H).toarray()[np.ix_(keep, keep)]
    A /= s[:, None]
    A /= s[None, :]
    A = 0.5 * (A + A.T)
    width = 1e-8 * max(1.0, target)
    w, V = sla.eigh(A, subset_by_value=(target - width, target + width), driver="evr")
    vecs = []
    for j in range(len(w)):
        full = np.zeros(n)
        full[keep] = V[:, j] / s
        vecs.append(full)
    if vecs:
        block = np.column_stack(vecs)
        groups = [slice(0, block.shape[1])]
        block = _deterministic_orthonormalize(block, form.mu, groups)
        vecs = [block[:, j] for j in range(block.shape[1])]
    return vecs


def _level_zero_pairs(
    form: EnergyForm, boundary: frozenset[int]
) -> list[DecimatedPair]:
    """Neumann spectrum of Gamma_0 (complete graph on V_0): graph values 0, 6, 6."""
    n = form.num_vertices
    pairs: list[DecimatedPair] = []
    if boundary:
        return pairs  # Dirichlet leaves no free vertex at level 0
    const = np.ones(n)
    const /= form.weighted_norm(const)
    pairs.append(DecimatedPair(0.0, 0.0, const, 0, 0.0, ()))
    for vec in _born_eigenspace(form, boundary, 6.0):
        pairs.append(DecimatedPair(_graph_scale(0) * 6.0, 6.0, vec, 0, 6.0, ()))
    return pairs


def decimate_sg(
    target_level: int,
    depth: int | None = None,
    boundary: BoundaryCondition | str = BoundaryCondition.NEUMANN,
    spec: FractalSpec | None = None,
    dense_cap: int = DENSE_CAP,
) -> list[DecimatedPair]:
    """Generate the complete gasket spectrum at target_level by decimation.

    Existing eigenvalues continue by the inverse map
    lam' = (5 +/- sqrt(25 - 4 lam)) / 2, skipping branches that land on
    the forbidden values {2, 5, 6}; eigenfunctions extend cell-by-cell
    with the local rule. Eigenvalues born at each level (at the
    forbidden graph values) are picked up as exact eigenspaces of that
    level's operator, with the dense solver as the normalization
    authority. A dimension audit at every level catches any branch
    bookkeeping error.
    """
    spec = spec or gasket_spec()
    if spec.kind is not FractalKind.SIERPINSKI_GASKET:
        raise ValueError("spectral decimation is implemented for the gasket only")
    boundary = BoundaryCondition(boundary)
    if target_level < 0:
        raise ValueError("target_level must be nonnegative")

    graphs = [build_graph(spec, m, boundary) for m in range(target_level + 1)]
    if graphs[-1].num_vertices > dense_cap:
        raise ResourceCapError(
            "decimation target too large", graphs[-1].num_vertices, dense_cap
        )
    forms = [assemble(spec, g) for g in graphs]

    pairs = _level_zero_pairs(forms[0], graphs[0].boundary)
    for k in range(1, target_level + 1):
        nxt: list[DecimatedPair] = []
        for p in pairs:
            disc = 25.0 - 4.0 * p.graph_value
            if disc < -1e-12:
                raise DecimationError(
                    f"graph value {p.graph_value} exceeds 25/4; cannot invert"
                )
            root = np.sqrt(max(disc, 0.0))
            for name, lam_new in (("lo", (5.0 - root) / 2.0), ("hi", (5.0 + root) / 2.0)):
                if any(abs(lam_new - f) < 1e-9 for f in FORBIDDEN):
                    continue
                vec = _extend_eigenvector(graphs[k - 1], graphs[k], p.vector, lam_new)
                nxt.append(
                    DecimatedPair(
                        lam=_graph_scale(k) * lam_new,
                        graph_value=lam_new,
                        vector=vec,
                        birth_level=p.birth_level,
                        birth_value=p.birth_value,
                        branches=p.branches + (name,),
                    )
                )
        for lam_born in FORBIDDEN:
            for vec in _born_eigenspace(forms[k], graphs[k].boundary, lam_born):
                nxt.append(
                    DecimatedPair(
                        lam=_graph_scale(k) * lam_born,
                        graph_value=lam_born,
                        vector=vec,
                        birth_level=k,
                        birth_value=lam_born,
                        branches=(),
                    )
                )
        expected = graphs[k].num_vertices - len(graphs[k].boundary)
        if len(nxt) != expected:
            raise DecimationError(
                f"level {k}: generated {len(nxt)} eigenpairs, expected {expected}; "
                "continuation/born bookkeeping is inconsistent"
            )
        pairs = nxt

    form = forms[target_level]
    normalized = []
    for p in pairs:
        vec = p.vector / form.weighted_norm(p.vector)
        normalized.append(
            DecimatedPair(p.lam, p.graph_value, _sign_fix(vec), p.birth_level,
                          p.birth_value, p.branches)
        )
    normalized.sort(key=lambda p: p.lam)
    if depth is not None:
        normalized = normalized[:depth]
    return normalized


def decimation_residuals(form: EnergyForm, pairs: list[DecimatedPair],
                         boundary: frozenset[int]) -> np.ndarray:
    """Relative eigen-residuals of decimated pairs (same test as eigendecompose)."""
    keep = np.array(sorted(set(range(form.num_vertices)) - boundary), dtype=np.int64)
    L = form.laplacian_matrix()
    out = np.empty(len(pairs))
    for i, p in enumerate(pairs):
        r = (L @ p.vector) - p.lam * form.mu * p.vector
        out[i] = np.linalg.norm(r[keep]) / np.linalg.norm((form.mu * p.vector)[keep])
    return out
