# Shapley effects from a single random forest
__version__ = "0.1.0"
