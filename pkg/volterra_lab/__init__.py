"""
Numerical lab for perturbed nonlinear Volterra integro-differential equations.

Integrates x(t) = psi + int_0^t M(t-s) f(x(s)) ds + H(t) (and its Brownian /
alpha-stable counterparts), evaluates the growth clocks F and Phi, the
L-functional and the iterated-logarithm envelope, and classifies runs into
growth regimes.
"""

__version__ = "0.3.0"
