"""corpa-forge: concept-vector labelling and clinically perturbed report synthesis.

The package turns a corpus of free-text chest X-ray reports into binary
clinical concept vectors, generates inter- and outer-class perturbations of
those vectors, rewrites the source reports to match, and scores external
model predictions for robustness.
"""

__version__ = "0.1.0"

from .errors import CorpaForgeError

__all__ = ["CorpaForgeError", "__version__"]
