"""Tabular GAN augmentation toolkit for circuit performance data.

Trains spectrally conditioned GANs on small circuit datasets, validates
generated samples against analytic circuit simulators, and measures the
downstream effect of augmentation on delay prediction for composed
digital circuits.
"""

__version__ = "0.1.0"
