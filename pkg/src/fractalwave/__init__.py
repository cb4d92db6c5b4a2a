"""Numerical laboratory for wave and heat equations on self-similar fractals.

Supported spaces: the Sierpinski gasket and the unit interval (the
classical control case). The package builds graph approximations,
assembles the compatible self-similar Dirichlet forms, computes
eigenbases (densely or by spectral decimation on the gasket), evolves
waves with a leapfrog scheme or spectrally, and ships experiment drivers
that probe propagation speed, heat-kernel decay and mollified-wave decay.
"""

from .errors import (
    CflViolationError,
    CoverageError,
    DecimationError,
    FractalwaveError,
    HorizonError,
    ResourceCapError,
)
from .evolution import (
    Scheme,
    Trajectory,
    WaveInput,
    cfl_timestep,
    complex_heat,
    heat_kernel,
    heat_kernel_row,
    leapfrog,
    leapfrog_from_frames,
    mollified_wave,
    mollified_wave_by_convolution,
    scaled_spectral_radius,
    spectral_heat,
    spectral_wave,
    transmute,
    trajectory_from_binary,
    trajectory_to_binary,
    wave_operator,
)
from .forms import (
    EnergyForm,
    Field,
    assemble,
    energy,
    harmonic_extension,
    resistance,
    resistance_matrix,
    self_similar_energy_parts,
)
from .geometry import (
    ApproxGraph,
    BoundaryCondition,
    FractalKind,
    FractalSpec,
    VertexId,
    build_graph,
    canonicalize,
    cell_star,
    embed_indices,
    gasket_spec,
    graph_distance,
    graph_from_json,
    graph_to_json,
    interval_spec,
    metric_distance,
    spec_for,
)
from .spectral import (
    DecimatedPair,
    EigenBasis,
    decimate_sg,
    decimation_residuals,
    eigen_residuals,
    eigendecompose,
    expand,
    export_spectrum_csv,
    gram_error,
    synthesize,
    weyl_exponent,
)

__version__ = "0.1.0"
