"""Desk-scale laboratory for quasihyperbolic geometry on planar grid domains.

Subpackages build on each other roughly bottom-up:

grid        occupancy-grid domains, boundary distance, intrinsic metrics
gallery     analytic fixture generators (disk, slit disk, comb, ...)
whitney     dyadic Whitney decomposition
qh          quasihyperbolic metric, geodesics, radial tree, delta estimation
properties  ball separation / Gehring-Hayman / uniformity / radial checkers
uniformize  conformal deformation rho_eps and deformed metrics
decomposition  core/tentacle decomposition with trails, covers and chains
poly        moment-fitted approximating polynomials
pou         smooth partition of unity subordinate to the decomposition
approx      assembled smooth approximant and error-decay experiments
svg         layered standalone SVG figure emission
report      JSON/CSV emitters, experiment runner, hashed manifest
cli         command-line entry points
"""

__version__ = "0.1.0"
