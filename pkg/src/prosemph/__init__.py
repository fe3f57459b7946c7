"""prosemph: prosodic emphasis toolkit.

Unsupervised CWT prominence labeling of speech, a gated graph-network
emphasis predictor over dependency-parsed text, and phone-level
linguistic/emphasis conditioning export for downstream acoustic models.
"""

from .corpus import DepAnnotation, EmphasisLabels, Utterance  # noqa: F401
from .tagset import Tagset, default_tagset  # noqa: F401

__version__ = "0.1.0"
