"""Deep Galerkin Method solvers for PDEs arising in quantitative finance.

Submodules: ``autodiff`` (reverse-mode tape), ``network`` (DGM and dense
networks), ``sampling``, ``residuals`` (finite-difference derivatives and the
loss), ``problems`` (PDE definitions and reference solutions), ``baselines``
(classical solvers), ``training`` and ``cli``.
"""

__version__ = "0.1.0"
