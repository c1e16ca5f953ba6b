"""Split manufacturing for face-to-face 3D ICs: protect a gate-level design, then attack it."""

from .flow import ProtectConfig, Protected, protect
from .netlist import Netlist, levelize, parse_bench, simulate
from .partition import cut_size, make_partition
from .proximity import run_proximity_attack
from .rdl import apply_key, build_plan, public_view

__version__ = "0.1.0"

__all__ = [
    "ProtectConfig", "Protected", "protect", "Netlist", "levelize", "parse_bench", "simulate",
    "cut_size", "make_partition", "run_proximity_attack", "apply_key", "build_plan",
    "public_view", "__version__",
]
