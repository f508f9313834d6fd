"""
Penalized B-spline bases
"""
