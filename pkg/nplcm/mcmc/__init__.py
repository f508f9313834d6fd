"""
Data-augmented Metropolis-within-Gibbs sampler
"""
