"""Thin wrappers around external neural models that emit the curation
engine's exchange files: teacher posteriors, embedding sets, face boxes,
attribute records, and generator image batches.

The engine is consumed only through its file formats; nothing here imports
it. Model weights are never vendored: deterministic stub backends cover
the format contract, and TorchScript checkpoints plug in for real runs.
"""

__version__ = "0.1.0"
