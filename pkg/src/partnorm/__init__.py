"""Domain-partitioned linear inverse problems with diagonal-circulant
normal-operator approximations."""
__version__ = "0.1.0"
