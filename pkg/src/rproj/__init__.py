"""Restricted projections in the 9-dim representation: algebra, partitions,
regularization, energies, non-degeneracy scans, experiments and the
bootstrap ledger."""

__version__ = "0.1.0"
