"""First-passage transforms for broken-drift Brownian motion below a jumping boundary.

Submodules are imported on demand; :mod:`brokenfpt.montecarlo` pulls in numba.
"""

from __future__ import annotations

__all__ = ["spectral", "greens", "inversion", "transforms", "montecarlo", "cli"]

__version__ = "0.1.0"
