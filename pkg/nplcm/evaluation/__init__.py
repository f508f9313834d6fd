"""
Posterior summaries and replication metrics
"""
