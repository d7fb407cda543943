"""Lazy cell-wise finite element assembly with Poisson and Stokes drivers."""
