"""
Prior densities, samplers and elicitation helpers
"""
