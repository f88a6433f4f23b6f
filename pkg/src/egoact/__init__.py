"""First-person activity recognition: motion descriptors, bag-of-words
encoding, and multi-kernel SVM fusion."""

__version__ = "0.1.0"
