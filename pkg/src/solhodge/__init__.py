"""Leafwise Hodge theory on linear foliations of flat tori, in the Fourier basis.

Submodules
----------
lattice    integer mode enumeration and multi-index combinatorics
foliation  orthonormal leaf frames, per-mode frequencies and multipliers
forms      exterior calculus, Hodge star, Green operator, decompositions
smalldiv   continued fractions, divisor records, the primitive equation
current    Ruelle-Sullivan current: closed form and flow-box quadrature
cli        batch command-line driver writing JSON reports and CSV tables

Submodules are imported lazily so the command-line entry point can
configure threading before any numerical library loads.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = ("lattice", "foliation", "forms", "smalldiv", "current", "cli", "errors")


def __getattr__(name):
    if name in _SUBMODULES:
        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
