"""
Convergence diagnostics
"""
