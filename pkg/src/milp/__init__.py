"""MILP data model, dense simplex and branch-and-bound"""
