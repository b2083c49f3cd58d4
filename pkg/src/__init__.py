"""milp-inverse - globally optimal inverse design through ReLU network surrogates"""

__version__ = "0.3.0"
