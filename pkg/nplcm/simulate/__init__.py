"""
Ground-truth data generators
"""
