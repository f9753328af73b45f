"""Detect low-quality statements in knowledge-graph dumps.

Three indicators: statements the community removed for good, statements
with deprecated rank, and statements violating property constraints.
"""

__version__ = "0.1.0"
