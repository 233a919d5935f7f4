"""On-demand transit dispatch simulator and evaluation toolkit.

Zone-based shuttle service building blocks: domain types and the event log,
travel providers, a fixed-route comparison router, an insertion-based
dispatch engine (native kernel with pure-Python fallback), a fleet lifecycle
state machine, a deterministic discrete-event simulator, and the analytics
that evaluate a run.
"""

from .kernels import backend_name

__version__ = "0.1.0"

__all__ = ["__version__", "backend_name"]
