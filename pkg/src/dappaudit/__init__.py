"""Audits DApp contracts for inconsistencies with their advertised behavior."""
from __future__ import annotations

__version__ = "0.1.0"
