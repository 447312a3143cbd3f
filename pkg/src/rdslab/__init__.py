"""Numerics for random dynamical systems on truncated Hilbert spaces.

Subpackages cover reproducible noise paths and OU processes, solution and
linear cocycles, Lyapunov spectra with Oseledets splittings, exponential
trichotomy frames with tempered bound estimates, Lyapunov-Perron computation
of stochastic center manifolds, and the stochastic Burgers benchmark with its
explicit reduced model.
"""

__version__ = "0.1.0"
