"""
Middleware package for command error handling
"""
