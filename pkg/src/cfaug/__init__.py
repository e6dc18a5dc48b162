"""Counterfactual data augmentation under spuriously correlated attributes."""
__version__ = "0.1.0"
