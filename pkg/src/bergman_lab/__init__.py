"""Numerical laboratory for weighted Bergman spaces and Riemann-Stieltjes operators."""
