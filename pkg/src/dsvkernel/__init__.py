"""Tunable-width Gaussian kernels from displaced-squeezed-vacuum overlaps,
a truncated-basis simulator that computes the same quantity as a detection
probability, and a from-scratch kernel SVM with a reproducible experiment
harness."""

__version__ = "0.1.0"
