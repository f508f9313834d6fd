"""
Data model: datasets, schemas and configuration documents
"""
