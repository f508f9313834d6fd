"""
Services package - orchestration of fits and replication studies
"""
