"""planarmpc: whole-body MPC for planar legged systems.

Finite-difference iLQR over smooth soft-contact dynamics, a residual-based
cost library, an asynchronous planner/feedback runtime, and an interactive
session server.
"""

__version__ = "0.1.0"
