"""Encoding of inverse-design queries as MILP models"""
