"""Piecewise-linear neural surrogate models"""
