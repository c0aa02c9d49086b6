"""
Bayesian NMF Posterior Explorer
"""
