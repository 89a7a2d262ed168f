from .dtmc import bounded_reach
from .dtmc import build_dtmc
from .dtmc import check_bisimilar
from .dtmc import check_preservation
from .frontend import parse
from .frontend import print_program
from .interference import build_ig
from .interference import welsh_powell
from .liveness import lra
from .reduce import Reduction
from .reduce import RvoMode
from .reduce import rao
from .reduce import reduce
from .reduce import rvo

__all__ = [
    "Reduction",
    "RvoMode",
    "bounded_reach",
    "build_dtmc",
    "build_ig",
    "check_bisimilar",
    "check_preservation",
    "lra",
    "parse",
    "print_program",
    "rao",
    "reduce",
    "rvo",
    "welsh_powell",
]
