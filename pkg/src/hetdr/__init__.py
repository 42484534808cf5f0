"""Heterogeneous-network drug repurposing toolkit.

Builds per-network node embeddings (random surfing -> shifted PPMI ->
stacked denoising autoencoder), fits a PU-weighted inductive matrix
completion model over drug/protein features, and ranks candidate
drug-protein associations with cross-validation and external-set
evaluation.
"""

__version__ = "0.1.0"

from hetdr.errors import NumericalError

__all__ = ["NumericalError", "__version__"]
