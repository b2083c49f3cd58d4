"""Gradient-based inversion and the hybrid gradient/branch-and-bound coordinator"""
