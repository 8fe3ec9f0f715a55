"""Simulation lab for one-round non-local quantum computation.

Modules: dense qudit simulation (``qudit``), symplectic Pauli/Clifford
machinery (``pauli``), Bell and port-based teleportation (``teleport``),
the one-round protocol engine (``engine``), protocol surgery
(``surgery``), garden-hose routing (``gardenhose``), threshold-code
routing (``coderouting``), vacuum AdS3 causal geometry (``geometry``),
and the ``nlqc`` command line (``cli``).
"""

from . import (  # noqa: F401
    coderouting,
    engine,
    errors,
    gardenhose,
    geometry,
    pauli,
    qudit,
    surgery,
    teleport,
)

__version__ = "0.1.0"
