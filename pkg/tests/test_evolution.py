import numpy as np
import pytest

from fractalwave import (
    CflViolationError,
    CoverageError,
    WaveInput,
    cfl_timestep,
    complex_heat,
    energy,
    expand,
    heat_kernel,
    heat_kernel_row,
    leapfrog,
    leapfrog_from_frames,
    mollified_wave,
    mollified_wave_by_convolution,
    scaled_spectral_radius,
    spectral_heat,
    spectral_wave,
    synthesize,
    transmute,
    trajectory_from_binary,
    trajectory_to_binary,
    wave_operator,
)
from fractalwave.evolution import gaussian_span
from fractalwave.forms import EnergyForm


def _neumann_input(f=None, g=None, n=None):
    if n is None:
        n = len(f) if f is not None else len(g)
    if f is None:
        f = np.zeros(n)
    if g is None:
        g = np.zeros(n)
    return WaveInput(f=f, g=g, boundary=frozenset())


# ---------------------------------------------------------------------------
# CFL time step
# ---------------------------------------------------------------------------

def test_cfl_interval_formula(form_of):
    # lambda_max(-mu^-1 H) = 4 * 4^m exactly for the half-weight Neumann
    # chain; the top two eigenvalues nearly coincide there, which limits
    # power iteration to about 1e-7 relative accuracy
    for m in (3, 5):
        form = form_of("interval", m)
        assert form.lambda_max() == pytest.approx(4.0 * 4.0**m, rel=1e-6)
        h = cfl_timestep(form)
        expected = (np.sqrt(3.0) / 2.0) * 2.0**-m * np.sqrt(0.99)
        assert h == pytest.approx(expected, rel=1e-6)


def test_cfl_gasket_below_folklore_step(form_of):
    # the stable step is below 5^(-m/2); 5^(-m/2) itself yields a scaled
    # spectral radius of 9, not <= 3 (see test_gasket_operator_scale)
    for m in (2, 4):
        form = form_of("sg", m)
        h = cfl_timestep(form)
        assert h <= 5.0 ** (-m / 2.0)
        assert scaled_spectral_radius(form, h) == pytest.approx(2.97, rel=1e-8)
        assert scaled_spectral_radius(form, 5.0 ** (-m / 2.0)) == pytest.approx(9.0, rel=1e-8)


def test_cfl_scales_with_conductance(form_of):
    base = form_of("sg", 2)
    doubled = EnergyForm(base.graph, 2.0 * base.conductances, base.mu)
    assert cfl_timestep(doubled) == pytest.approx(cfl_timestep(base) / np.sqrt(2.0), rel=1e-8)


# ---------------------------------------------------------------------------
# Leapfrog scheme
# ---------------------------------------------------------------------------

def test_leapfrog_constant_neumann(form_of):
    form = form_of("sg", 2)
    c = 2.25
    data = _neumann_input(f=np.full(form.num_vertices, c))
    traj = leapfrog(form, data, cfl_timestep(form), 50)
    assert np.abs(traj.frames - c).max() <= 1e-12


def test_leapfrog_eigenmode_exact_recurrence(form_of, basis_of):
    # discrete mode evolves as cos(theta t) with theta = arccos(1 - lam h^2 / 2)
    form = form_of("sg", 3)
    basis = basis_of("sg", 3)
    h = cfl_timestep(form)
    for n in (1, 4, 10):
        phi, lam = basis.phis[:, n], basis.lambdas[n]
        traj = leapfrog(form, _neumann_input(f=phi), h, 100)
        theta = np.arccos(1.0 - lam * h * h / 2.0)
        steps = np.arange(101)
        expected = np.cos(theta * steps)[:, None] * phi[None, :]
        assert np.abs(traj.frames - expected).max() <= 1e-8


def test_leapfrog_time_reversible(form_of, rng):
    form = form_of("sg", 2)
    f = rng.standard_normal(form.num_vertices)
    g = rng.standard_normal(form.num_vertices)
    h = cfl_timestep(form)
    T = 200
    traj = leapfrog(form, WaveInput(f=f, g=g, boundary=frozenset()), h, T)
    back = leapfrog_from_frames(form, traj.frames[T], traj.frames[T - 1], h, T)
    assert np.abs(back.frames[T] - traj.frames[0]).max() <= 1e-8


def test_leapfrog_dirichlet_pins_boundary(form_of, graph_of, rng):
    g = graph_of("sg", 2, "dirichlet")
    form = form_of("sg", 2, "dirichlet")
    f = rng.standard_normal(form.num_vertices)
    f[sorted(g.boundary)] = 0.0
    traj = leapfrog(form, WaveInput(f=f, g=np.zeros_like(f), boundary=g.boundary),
                    cfl_timestep(form), 60)
    assert np.abs(traj.frames[:, sorted(g.boundary)]).max() == 0.0


def test_leapfrog_refuses_unstable_step(form_of):
    form = form_of("sg", 2)
    data = _neumann_input(n=form.num_vertices)
    bad_h = 5.0**-1.0  # scaled radius 9 at level 2
    with pytest.raises(CflViolationError) as err:
        leapfrog(form, data, bad_h, 10)
    assert err.value.lam_max_scaled == pytest.approx(9.0, rel=1e-6)
    with pytest.warns(RuntimeWarning):
        leapfrog(form, data, bad_h, 10, allow_unstable=True)


def test_wave_input_must_vanish_on_boundary():
    with pytest.raises(ValueError):
        WaveInput(f=np.ones(5), g=np.zeros(5), boundary=frozenset({0}))


def test_energy_bound_homogeneous_leapfrog(form_of, rng):
    # E_H(u(t)) <= 4 ||g_tilde||^2 under the spectral condition <= 3
    # (the discrete energy estimate, tested at the stable step)
    form = form_of("sg", 3)
    h = cfl_timestep(form)
    for _ in range(3):
        g = rng.standard_normal(form.num_vertices)
        data = _neumann_input(g=g)
        traj = leapfrog(form, data, h, 2000)
        bound = 4.0 * (h * form.weighted_norm(g)) ** 2
        energies = h * h * np.array([energy(form, fr) for fr in traj.frames])
        assert energies.max() <= bound * (1 + 1e-9)


def test_leapfrog_mode_amplitudes_do_not_drift(form_of, basis_of, rng):
    form = form_of("sg", 2)
    basis = basis_of("sg", 2)
    h = cfl_timestep(form)
    f = rng.standard_normal(form.num_vertices)
    g = rng.standard_normal(form.num_vertices)
    traj = leapfrog(form, WaveInput(f=f, g=g, boundary=frozenset()), h, 1000)
    theta = np.arccos(np.clip(1.0 - basis.lambdas * h * h / 2.0, -1.0, 1.0))

    def invariants(k):
        c0 = expand(basis, traj.frames[k])
        c1 = expand(basis, traj.frames[k + 1])
        s2 = np.sin(theta) ** 2
        s2[s2 < 1e-30] = 1.0
        return (c0**2 + c1**2 - 2.0 * np.cos(theta) * c0 * c1) / s2

    early, late = invariants(0), invariants(998)
    scale = np.abs(early).max()
    assert np.abs(late - early).max() <= 1e-8 * scale


def test_leapfrog_mass_is_exactly_linear(form_of, rng):
    form = form_of("sg", 2)
    f = rng.standard_normal(form.num_vertices)
    g = rng.standard_normal(form.num_vertices)
    h = cfl_timestep(form)
    traj = leapfrog(form, WaveInput(f=f, g=g, boundary=frozenset()), h, 400)
    mass = traj.frames @ form.mu
    t = traj.times
    expected = mass[0] + (mass[1] - mass[0]) / h * t
    assert np.abs(mass - expected).max() <= 1e-10 * max(1.0, np.abs(mass).max())


# ---------------------------------------------------------------------------
# Spectral wave
# ---------------------------------------------------------------------------

def test_spectral_wave_at_zero_is_f(basis_of, rng):
    basis = basis_of("sg", 3)
    f = rng.standard_normal(basis.form.num_vertices)
    out = spectral_wave(basis, _neumann_input(f=f), 0.0)
    assert np.abs(out - f).max() <= 1e-10


def test_spectral_wave_constant_velocity_grows_linearly(basis_of):
    basis = basis_of("sg", 2)
    c = 0.75
    g = np.full(basis.form.num_vertices, c)
    for t in (0.3, 1.7):
        out = spectral_wave(basis, _neumann_input(g=g), t)
        assert np.abs(out - c * t).max() <= 1e-10


def test_spectral_wave_interval_matches_continuum(basis_of, graph_of):
    g = graph_of("interval", 8, "dirichlet")
    basis = basis_of("interval", 8, "dirichlet")
    x = g.coords[:, 0]
    f = np.sin(np.pi * x)
    out = spectral_wave(basis, WaveInput(f=f, g=np.zeros_like(f), boundary=g.boundary), 0.3)
    assert np.abs(out - np.cos(0.3 * np.pi) * f).max() <= 1e-3


def test_spectral_wave_boundary_mismatch(basis_of):
    basis = basis_of("sg", 2)
    with pytest.raises(ValueError):
        spectral_wave(basis, WaveInput(f=np.zeros(15), g=np.zeros(15),
                                       boundary=frozenset({0})), 0.1)


def test_wave_mass_linear_heat_mass_constant(basis_of, rng):
    basis = basis_of("sg", 3)
    mu = basis.form.mu
    f = rng.standard_normal(basis.form.num_vertices)
    g = rng.standard_normal(basis.form.num_vertices)
    a1 = float(np.sum(f * mu))
    b1 = float(np.sum(g * mu))
    for t in (0.2, 1.1, 3.4):
        w = spectral_wave(basis, WaveInput(f=f, g=g, boundary=frozenset()), t)
        assert float(np.sum(w * mu)) == pytest.approx(a1 + b1 * t, abs=1e-10)
        p = spectral_heat(basis, f, t)
        assert float(np.sum(p * mu)) == pytest.approx(a1, abs=1e-10)


# ---------------------------------------------------------------------------
# Heat semigroup and kernel
# ---------------------------------------------------------------------------

def test_heat_identities(basis_of, rng):
    basis = basis_of("sg", 3)
    f = rng.standard_normal(basis.form.num_vertices)
    assert np.abs(spectral_heat(basis, f, 0.0) - f).max() <= 1e-10
    a = spectral_heat(basis, spectral_heat(basis, f, 0.3), 0.7)
    b = spectral_heat(basis, f, 1.0)
    assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(b).max())
    mean = float(np.sum(f * basis.form.mu))
    far = spectral_heat(basis, f, 50.0)
    assert np.abs(far - mean).max() <= 1e-8
    with pytest.raises(ValueError):
        spectral_heat(basis, f, -0.1)


def test_heat_kernel_properties(basis_of):
    basis = basis_of("sg", 3)
    n = basis.form.num_vertices
    x, y = 3, 11
    for t in (0.01, 0.5):
        assert heat_kernel(basis, x, y, t) == heat_kernel(basis, y, x, t)
        row = heat_kernel_row(basis, x, t)
        assert float(np.sum(row * basis.form.mu)) == pytest.approx(1.0, abs=1e-10)
    assert heat_kernel(basis, x, x, 100.0) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValueError):
        heat_kernel(basis, x, y, 0.0)


def test_complex_heat(basis_of, rng):
    basis = basis_of("sg", 2)
    f = rng.standard_normal(basis.form.num_vertices)
    real = complex_heat(basis, f, 0.3 + 0.0j)
    assert np.abs(real - spectral_heat(basis, f, 0.3)).max() <= 1e-12
    z = 0.2 + 1.3j
    out = complex_heat(basis, f, z)
    coeff_bound = synthesize(basis, np.abs(expand(basis, f)) * np.exp(-basis.lambdas * z.real))
    norm = lambda v: float(np.sqrt(np.sum(np.abs(v) ** 2 * basis.form.mu)))
    assert norm(out) <= norm(coeff_bound) + 1e-12
    with pytest.raises(ValueError):
        complex_heat(basis, f, -0.1 + 1.0j)


def test_complex_heat_decays_with_support_distance(basis_of, graph_of):
    # |P_(t + 1/z) f(x)| shrinks as the support moves away from x
    basis = basis_of("sg", 5)
    g = graph_of("sg", 5)
    x = g.corner_index(0)
    t = 0.01
    gamma = 1.0
    sups = []
    for word in ((0, 0, 0), (0, 1, 1), (1, 1, 1)):  # cells at growing distance
        f = np.zeros(g.num_vertices)
        f[g.embed_point(word + (1,), 2)] = 1.0
        vals = [
            abs(complex_heat(basis, f, t + 1.0 / (gamma + 1j * s))[x])
            for s in np.linspace(-40.0, 40.0, 33)
        ]
        sups.append(max(vals))
    assert sups[0] > sups[1] > sups[2]


# ---------------------------------------------------------------------------
# Transmutation
# ---------------------------------------------------------------------------

def test_transmute_single_mode_gaussian_cosine_integral(basis_of):
    # quadrature of the Gaussian-cosine integral reproduces exp(-lam t)
    basis = basis_of("sg", 2)
    n = 5
    phi, lam = basis.phis[:, n], basis.lambdas[n]
    t = 0.02
    out = transmute(basis, _neumann_input(f=phi), t)
    assert np.abs(out - np.exp(-lam * t) * phi).max() <= 1e-9


def test_transmute_constant(basis_of):
    basis = basis_of("sg", 2)
    f = np.full(basis.form.num_vertices, 1.5)
    out = transmute(basis, _neumann_input(f=f), 0.1)
    assert np.abs(out - 1.5).max() <= 1e-9


def test_transmute_matches_heat(basis_of, rng):
    basis = basis_of("sg", 3)
    for t in (0.01, 0.1):
        f = rng.standard_normal(basis.form.num_vertices)
        v = transmute(basis, _neumann_input(f=f), t)
        assert np.abs(v - spectral_heat(basis, f, t)).max() <= 1e-6


def test_transmute_requires_zero_velocity(basis_of):
    basis = basis_of("sg", 2)
    n = basis.form.num_vertices
    with pytest.raises(ValueError):
        transmute(basis, WaveInput(f=np.ones(n), g=np.ones(n), boundary=frozenset()), 0.1)


def test_transmute_from_trajectory(form_of, basis_of, rng):
    form = form_of("sg", 2)
    basis = basis_of("sg", 2)
    f = rng.standard_normal(form.num_vertices)
    data = _neumann_input(f=f)
    t = 0.005
    h = cfl_timestep(form)
    steps = int(np.ceil(gaussian_span(t) / h)) + 2
    traj = leapfrog(form, data, h, steps)
    v = transmute(traj, data, t)
    assert np.abs(v - spectral_heat(basis, f, t)).max() <= 1e-4

    short = leapfrog(form, data, h, 3)
    with pytest.raises(CoverageError):
        transmute(short, data, t)


# ---------------------------------------------------------------------------
# Mollified wave
# ---------------------------------------------------------------------------

def test_mollified_wave_identities(basis_of, rng):
    basis = basis_of("sg", 3)
    f = rng.standard_normal(basis.form.num_vertices)
    t = 0.4
    # sigma -> 0: damping factor -> 1, controlled by exp(-sigma lam_max / 2)
    sigma = 1e-9
    plain = spectral_wave(basis, _neumann_input(f=f), t)
    moll = mollified_wave(basis, f, sigma, t)
    coeff_scale = np.abs(expand(basis, f)).sum()
    bound = (1.0 - np.exp(-sigma * basis.lambdas[-1] / 2.0)) * coeff_scale
    assert np.abs(moll - plain).max() <= bound + 1e-12
    # t = 0 reduces to the heat flow at sigma/2
    sigma = 0.05
    assert np.abs(
        mollified_wave(basis, f, sigma, 0.0) - spectral_heat(basis, f, sigma / 2.0)
    ).max() <= 1e-12
    with pytest.raises(ValueError):
        mollified_wave(basis, f, 0.0, 1.0)


def test_mollified_wave_matches_time_domain_convolution(basis_of, rng):
    basis = basis_of("sg", 2)
    f = rng.standard_normal(basis.form.num_vertices)
    for sigma, t in ((0.05, 0.3), (0.2, 1.0)):
        a = mollified_wave(basis, f, sigma, t)
        b = mollified_wave_by_convolution(basis, f, sigma, t)
        assert np.abs(a - b).max() <= 1e-8


def test_wave_operator_matches_spectral_wave(basis_of, rng):
    basis = basis_of("sg", 2)
    f = rng.standard_normal(basis.form.num_vertices)
    t = 0.7
    a = wave_operator(basis, f, t)
    b = spectral_wave(basis, _neumann_input(f=f), t)
    assert np.abs(a - b).max() <= 1e-12


# ---------------------------------------------------------------------------
# Trajectory formats
# ---------------------------------------------------------------------------

def test_trajectory_binary_round_trip(form_of, rng, tmp_path):
    form = form_of("sg", 1)
    f = rng.standard_normal(form.num_vertices)
    traj = leapfrog(form, _neumann_input(f=f), cfl_timestep(form), 7)
    path = tmp_path / "traj.bin"
    trajectory_to_binary(traj, path)
    back = trajectory_from_binary(path)
    assert back.h == traj.h
    assert back.level == traj.level
    assert np.array_equal(back.frames, traj.frames)
    with pytest.raises(ValueError):
        path2 = tmp_path / "bad.bin"
        path2.write_bytes(b"NOTMAGIC" + b"\x00" * 40)
        trajectory_from_binary(path2)


def test_trajectory_csv(form_of, tmp_path):
    form = form_of("interval", 1)
    traj = leapfrog(form, _neumann_input(n=form.num_vertices), cfl_timestep(form), 2)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,vertex,value"
    assert len(lines) == 1 + 3 * form.num_vertices
