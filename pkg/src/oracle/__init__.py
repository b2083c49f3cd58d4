"""Exhaustive reference solvers for small instances"""
