"""labelloop: a self-hosted human-in-the-loop text classification platform.

Upload a corpus split into sentences, label a binary category, and let the
system train classifiers in the background, guide labeling via active
learning, surface likely label errors, and estimate precision. A headless
simulation harness benchmarks labeling policies against gold labels.
"""

from . import corpus, datagen, evaluation, learning, policy, quality, store
from .errors import LabelLoopError

__version__ = "0.1.0"

__all__ = [
    "LabelLoopError",
    "__version__",
    "corpus",
    "datagen",
    "evaluation",
    "learning",
    "policy",
    "quality",
    "store",
]
