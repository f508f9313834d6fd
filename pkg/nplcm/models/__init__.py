"""
Likelihood, parameter containers and run manifests
"""
