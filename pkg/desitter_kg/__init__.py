"""de Sitter Klein-Gordon toolkit.

This package evaluates the hypergeometric kernels of the integral transform
for the Klein-Gordon equation in de Sitter spacetime, solves the linear and
semilinear problems on periodic grids, and checks the decay, bound and
lifespan estimates numerically.
"""
