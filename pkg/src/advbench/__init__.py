"""Adversarial attacks and defenses for image classifiers and graph neural networks."""

__version__ = "0.1.0"
