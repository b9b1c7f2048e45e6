"""Iterative solvers and verification harnesses for tame maps on graded Fréchet spaces."""
__version__ = "0.1.0"
