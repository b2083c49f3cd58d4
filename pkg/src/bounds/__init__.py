"""Per-node bound computation and ReLU stability classification"""
