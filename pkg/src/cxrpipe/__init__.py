"""Chest X-ray classification pipeline.

CLAHE contrast enhancement, aspect-preserving resize, seeded on-the-fly
augmentation, stratified K-fold cross-validation, softmax/Adam training
(or an external classifier attached over a subprocess bridge), and
confusion-matrix / ROC / AUC evaluation with per-fold aggregation.
"""

__version__ = "0.1.0"
