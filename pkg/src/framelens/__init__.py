"""framelens: measure differential framing of topics across text sources.

The pipeline turns per-source masked-token predictions into aligned framing
vectors, compares sources by mean cosine distance, ranks them by similarity,
and validates the rankings against ground-truth data with Kendall's tau-b.
"""

__version__ = "0.1.0"
