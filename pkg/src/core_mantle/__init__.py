"""k-core structure of sparse random graphs: peeling, Warning Propagation,
the limiting multi-type branching processes and local-law comparisons."""

__version__ = "0.1.0"
