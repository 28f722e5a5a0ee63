"""qclab: a numerical laboratory for the quantum-classical transition.

One dimensionless knob interpolates between ordinary linear wave
mechanics and classical Hamilton-Jacobi flow by suppressing the
density-curvature potential.  The package evolves the interpolating
wave equation spectrally, reads it hydrodynamically, advects Bohmian
trajectories, runs the equivalent phase-space amplitude transport, and
restores genuine classical multi-streaming with incoherent sheet
mixtures; every regime is cross-checked against independent analytic
oracles.
"""

__version__ = "0.1.0"

from .grids import (  # noqa: F401
    PhaseSpaceGrid,
    SpatialGrid,
    gradient,
    integrate,
    integrate_2d,
    laplacian,
    make_grid,
)
from .hydro import (  # noqa: F401
    MadelungFields,
    PhysicalParams,
    decompose,
    energy_functional,
    make_params,
    quantum_potential,
    reconstruct,
    velocity_field,
)
from .solver import (  # noqa: F401
    EvolutionResult,
    SolverConfig,
    WaveState,
    effective_hbar,
    evolve,
    step,
)
