# Solver, stochastic verifier and diagnostics for the Landau equation with soft potentials

from .phase_grid import DistributionField, PhaseGrid, make_grid
