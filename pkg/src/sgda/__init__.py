"""Signature-guided spectral augmentation for induction-motor fault diagnosis.

Train a fault classifier from healthy motor-current recordings only: the
characteristic fault frequencies of the motor tell the augmenter where to
inject synthetic spectral peaks.
"""

__version__ = "0.1.0"
