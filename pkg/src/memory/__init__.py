"""Run history of past commands"""
