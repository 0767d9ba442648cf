"""ferforge: dataset-curation engine for class-balanced facial expression
recognition corpora.

Pipelines: pseudo-label filtering, prompt-grid synthesis for diffusion
generators, expression-edit compositing with pre-restoration degradation,
dataset-assembly regimes, and evaluation metrics. All neural inference is
external, isolated behind file-exchange formats (see ferforge.core).
"""

__version__ = "0.1.0"
