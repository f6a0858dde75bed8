"""Desk-scale laboratory for semilinear stochastic reaction-diffusion equations.

Simulates du = [Au + f(u)]dt + sigma(u, grad u) dW + jump integrals against a
compensated Poisson measure on simple bounded domains, and checks the
qualitative behaviour of the solutions (positivity, finite-time blow-up of
mean functionals with computable time bounds, Lyapunov-certified global
existence) against independent analytic machinery.
"""

__version__ = "0.1.0"
