"""EEG cleaning, feature extraction, selection, and classifier sweep toolkit."""

__version__ = "0.1.0"
