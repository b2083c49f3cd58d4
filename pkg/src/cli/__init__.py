"""Command-line commands, run context and benchmark sweeps"""
