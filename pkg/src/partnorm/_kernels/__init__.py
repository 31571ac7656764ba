"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set ``PARTNORM_BACKEND=python``
to force the fallback.  ``BACKEND`` names the active implementation.
"""
import os

from . import _fallback

BACKEND = "python"
siddon_system = _fallback.siddon_system

if os.environ.get("PARTNORM_BACKEND", "").lower() != "python":
    try:
        from . import _siddon
    except ImportError:  # extension not built
        _siddon = None
    if _siddon is not None:
        siddon_system = _siddon.siddon_system
        BACKEND = "cython"

__all__ = ["BACKEND", "siddon_system"]
