import csv

import numpy as np
import pytest

from fractalwave import (
    ResourceCapError,
    eigen_residuals,
    eigendecompose,
    energy,
    expand,
    export_spectrum_csv,
    gram_error,
    resistance_matrix,
    synthesize,
    weyl_exponent,
)
from fractalwave.spectral import EigenBasis, partial_eigendecompose


@pytest.mark.parametrize(
    "kind,m,bc",
    [("interval", 4, "neumann"), ("interval", 4, "dirichlet"),
     ("sg", 3, "neumann"), ("sg", 3, "dirichlet")],
)
def test_residuals_and_orthonormality(basis_of, kind, m, bc):
    basis = basis_of(kind, m, bc)
    assert eigen_residuals(basis).max() <= 1e-9
    assert gram_error(basis) <= 1e-9


def test_interval_dirichlet_bottom_eigenvalue(basis_of):
    basis = basis_of("interval", 6, "dirichlet")
    assert abs(basis.lambdas[0] - np.pi**2) / np.pi**2 < 0.01


def test_neumann_zero_mode(basis_of):
    for kind in ("interval", "sg"):
        basis = basis_of(kind, 3)
        assert basis.lambdas[0] == pytest.approx(0.0, abs=1e-10)
        phi1 = basis.phis[:, 0]
        assert np.ptp(phi1) < 1e-9  # constant
        assert basis.form.weighted_norm(phi1) == pytest.approx(1.0, rel=1e-12)
        assert basis.lambdas[1] > 1e-6


def test_dirichlet_positive_bottom_and_boundary_rows(basis_of, graph_of):
    basis = basis_of("sg", 2, "dirichlet")
    g = graph_of("sg", 2, "dirichlet")
    assert basis.lambdas[0] > 0
    for b in g.boundary:
        assert np.abs(basis.phis[b]).max() == 0.0


def test_eigenpair_count(basis_of, graph_of):
    for kind, m, bc in (("sg", 2, "dirichlet"), ("sg", 2, "neumann"), ("interval", 3, "dirichlet")):
        g = graph_of(kind, m, bc)
        basis = basis_of(kind, m, bc)
        assert basis.size == g.num_vertices - len(g.boundary)


def test_expand_synthesize_round_trip(basis_of, rng):
    basis = basis_of("sg", 3)
    u = rng.standard_normal(basis.form.num_vertices)
    coeffs = expand(basis, u)
    back = synthesize(basis, coeffs)
    assert np.abs(back - u).max() <= 1e-10
    # Parseval in the weighted norm
    assert np.sum(coeffs**2) == pytest.approx(basis.form.weighted_norm(u) ** 2, rel=1e-10)


def test_expand_of_eigenfunction_is_unit_vector(basis_of):
    basis = basis_of("sg", 2)
    coeffs = expand(basis, basis.phis[:, 2])
    expected = np.zeros(basis.size)
    expected[2] = 1.0
    assert np.abs(coeffs - expected).max() <= 1e-10
    assert np.abs(expand(basis, np.zeros(basis.form.num_vertices))).max() == 0.0


def test_energy_identity(basis_of, rng):
    # E(sum a_n phi_n) = sum a_n^2 lambda_n
    for kind, m in (("interval", 4), ("sg", 3)):
        basis = basis_of(kind, m)
        a = rng.standard_normal(basis.size)
        u = synthesize(basis, a)
        assert energy(basis.form, u) == pytest.approx(
            float(np.sum(a * a * basis.lambdas)), rel=1e-9
        )


def test_sobolev_bound_with_explicit_constant(basis_of, rng):
    # ||u||_inf <= sqrt(R_diam) + lambda_1^{-1/2} for E-normalized u, Dirichlet
    basis = basis_of("sg", 3, "dirichlet")
    R_diam = resistance_matrix(basis.form).max()
    bound = np.sqrt(R_diam) + basis.lambdas[0] ** -0.5
    for _ in range(10):
        a = rng.standard_normal(basis.size)
        a /= np.sqrt(np.sum(a * a * basis.lambdas))
        u = synthesize(basis, a)
        assert np.abs(u).max() <= bound + 1e-9


def test_weyl_exponent_interval(basis_of):
    w = weyl_exponent(basis_of("interval", 8))
    assert abs(w - 2.0) / 2.0 <= 0.05


def test_weyl_exponent_gasket(basis_of):
    w = weyl_exponent(basis_of("sg", 6))
    target = np.log(5.0) / np.log(3.0)
    assert abs(w - target) / target <= 0.10


def test_weyl_exponent_scale_invariant(basis_of):
    basis = basis_of("interval", 7)
    scaled = EigenBasis(basis.form, basis.boundary, 17.0 * basis.lambdas, basis.phis)
    assert weyl_exponent(scaled) == pytest.approx(weyl_exponent(basis), rel=1e-12)


def test_weyl_exponent_needs_enough_eigenvalues(basis_of):
    with pytest.raises(ValueError):
        weyl_exponent(basis_of("sg", 2))


def test_spectrum_invariant_under_vertex_permutation(form_of, rng):
    import scipy.sparse as sp

    from fractalwave import EnergyForm

    form = form_of("sg", 2)
    n = form.num_vertices
    perm = rng.permutation(n)
    P = sp.csr_matrix((np.ones(n), (perm, np.arange(n))), shape=(n, n))
    permuted = EnergyForm.__new__(EnergyForm)
    permuted.graph = form.graph
    permuted.conductances = form.conductances
    permuted.mu = np.asarray(P @ form.mu).ravel()
    permuted.H = (P @ form.H @ P.T).tocsr()
    permuted._lambda_max = None
    a = eigendecompose(form, frozenset()).lambdas
    b = eigendecompose(permuted, frozenset()).lambdas
    assert np.abs(a - b).max() <= 1e-10 * max(1.0, a[-1])


def test_dense_cap(form_of):
    with pytest.raises(ResourceCapError):
        eigendecompose(form_of("sg", 3), dense_cap=10)


def test_partial_matches_dense(form_of, basis_of, graph_of):
    g = graph_of("sg", 3, "dirichlet")
    part = partial_eigendecompose(form_of("sg", 3, "dirichlet"), g.boundary, k=8)
    full = basis_of("sg", 3, "dirichlet")
    assert np.abs(part.lambdas - full.lambdas[:8]).max() <= 1e-8 * full.lambdas[7]
    assert eigen_residuals(part).max() <= 1e-9


def test_export_spectrum_golden(basis_of, tmp_path, bless):
    from pathlib import Path

    basis = basis_of("sg", 2)
    out = tmp_path / "spectrum.csv"
    export_spectrum_csv(basis, out)
    golden = Path(__file__).parent / "golden" / "sg_level2_neumann_spectrum.csv"
    if bless:
        golden.parent.mkdir(exist_ok=True)
        golden.write_text(out.read_text())
    assert golden.exists(), "golden file missing; run pytest --bless once"
    with open(out) as fh:
        got = list(csv.DictReader(fh))
    with open(golden) as fh:
        want = list(csv.DictReader(fh))
    assert len(got) == len(want)
    for a, b in zip(got, want):
        assert a["n"] == b["n"]
        assert float(a["lambda"]) == pytest.approx(float(b["lambda"]), rel=1e-9, abs=1e-9)


def test_export_spectrum_with_vectors(basis_of, tmp_path):
    basis = basis_of("interval", 2)
    out = tmp_path / "spec.csv"
    export_spectrum_csv(basis, out, include_vectors=True)
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "lambda"] + [f"v{j}" for j in range(5)]
    assert len(rows) == 1 + basis.size
