"""Reversionary Heston toolkit: characteristic functions, COS pricing, calibration and Monte Carlo"""
