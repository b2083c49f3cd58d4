"""Run metrics, solution documents and reports"""
