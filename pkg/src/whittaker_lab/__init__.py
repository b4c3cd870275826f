"""Numerical laboratory for GL(n) Whittaker functions and their probability.

Subpackages by theme:

* ``specfun``  -- gamma/digamma, the determinant ratio J, Macdonald K,
  Sklyanin density, fundamental series, theta density.
* ``gtpoly``   -- triangular patterns, their polytopes, volumes, and the
  exponential-weight sampling routes.
* ``givental`` -- integral/Monte-Carlo/quadrature routes to the recurrent
  Whittaker function.
* ``paths``    -- path transforms, the triangular-array SDE, interacting
  particle systems, polymer free energy.
* ``cells``    -- factorization coordinates on unipotent groups, reduced
  words, the flow interpretation of the path transform.
* ``qdeform``  -- q-deformed Markov kernels, intertwining, Pitman/Burke
  style checks.
"""

__version__ = "0.1.0"

from . import specfun  # noqa: F401

__all__ = ["specfun", "__version__"]
