"""
Services package: probability model, solvers, exploration, inference and metrics
"""
