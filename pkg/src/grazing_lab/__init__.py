"""grazing-lab: a numerical laboratory for delocalised-collision kinetic
operators, their entropy/dissipation/action functionals, and the small-angle
limit that turns the jump (Boltzmann-type) operator into the diffusive
(Landau-type) one.

Subpackages by concern:

- ``geometry``      collision map, tangent sphere, projected gradients
- ``kernels``       kinetic/angular/spatial kernels and cross-sections
- ``dualpairs``     (Psi, Psi*, Theta) dissipation-pair algebra
- ``densities``     Gaussian-mixture phase-space densities, kNN entropy
- ``quadrature``    importance-sampled Monte Carlo and tensor-grid oracles
- ``functionals``   dissipations, actions, weak collision pairings
- ``grazing``       epsilon-sweeps and pointwise-limit verifiers
- ``dsmc``          delocalised-collision particle solver
- ``service``/``cli``  FastAPI wrapper and its thin command-line client
"""

__version__ = "0.1.0"
