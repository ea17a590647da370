"""Numerical core: special functions, kernels, solvers and checks."""
