"""Desk-scale numerical laboratory for KdV/mKdV kink and soliton stability.

Submodules
----------
grid          periodic grid, spectral calculus, Sobolev norms
profiles      solitons, kinks, weights and potentials
miura         Miura maps, Galilean/scaling symmetries, kink-frame algebra
evolution     exponential-integrator time stepping and conserved quantities
schroedinger  ground states, Riccati shooting and the inverse Miura branches
quadform      coercivity quadratic forms and spectral bounds
stability     modulation tracking and stability experiment pipelines
cli           command-line entry point and experiment configuration
"""

__version__ = "0.1.0"
