"""Trefftz discretisations of the 2D Helmholtz equation.

Modules: ``mesh`` (polygonal meshes and skeletons), ``specialfn`` (Bessel and
Hankel functions), ``basis`` (local Trefftz spaces), ``quadrature``,
``forms`` (global systems of each formulation), ``linalg`` (dense solvers,
condition numbers), ``analysis`` (norms, errors, conditioning) and ``cli``.
"""

__version__ = "0.1.0"
