"""Fractal classification distributions, their exact ReLU classifiers, and training/analysis tools."""
