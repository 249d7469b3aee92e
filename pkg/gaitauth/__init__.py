"""
Gait authentication package

Orientation-invariant gait verification and identification from mobile
inertial-sensor logs: ingest, Earth-frame transformation, cycle segmentation,
feature extraction, PCA + kNN/SVM recognition and biometric evaluation.
"""

__version__ = "1.0.0"
