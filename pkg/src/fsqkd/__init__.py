"""Free-space B92 quantum key distribution simulator and satellite link budget."""
from __future__ import annotations

__version__ = "0.1.0"
