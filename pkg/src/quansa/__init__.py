"""Classical simulator for a nondestructive quantum-estimation stack.

The package builds up, layer by layer, the machinery needed to estimate
Gibbs partition functions of small combinatorial models on a desk-scale
classical simulator:

- ``qcore``: dense statevector primitives and seeded randomness,
- ``phase``: phase-estimation distributions and the unbiased phase estimator,
- ``amplitude``: amplitude-estimation distributions, the restoring coin flip,
  and the nondestructive/unbiased amplitude estimators,
- ``mean``: unbiased mean, median, and product-of-means estimators,
- ``gibbs``: combinatorial Gibbs models, annealing schedules, and walk gaps,
- ``pipeline``: the end-to-end partition-function experiment with resource
  accounting, plus the CSV/JSON reporting used by the CLI.

Every estimator tracks the quantum resources it *would* consume (reflections,
controlled walk ops, qsample copies) and whether the input state survived
nondestructively, so the statistical contracts can be checked wholesale by
``quansa.acceptance``.
"""

from __future__ import annotations

from quansa.qcore import RandomSource

__all__ = ["RandomSource", "__version__"]

__version__ = "0.1.0"
