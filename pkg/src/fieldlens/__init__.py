"""fieldlens: delineate a research specialty inside multi-topic journals and
measure its social and cognitive distinctness."""

__version__ = "0.1.0"
