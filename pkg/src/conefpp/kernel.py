"""Backend facade.

Selects the compiled search kernel when it imported cleanly and the
call is within its envelope (d <= 3), otherwise the pure-Python twin.
``CONEFPP_PURE_PYTHON=1`` forces the pure backend.  Both backends are
bit-identical on shared inputs; the test suite enforces this.
"""

import os

from . import _pykernel

try:
    from . import _kernel
except ImportError:  # extension not built
    _kernel = None

if os.environ.get("CONEFPP_PURE_PYTHON") == "1":
    _kernel = None

MASK64 = _pykernel.MASK64
STATUS_EXHAUSTED = _pykernel.STATUS_EXHAUSTED
STATUS_TARGET = _pykernel.STATUS_TARGET
STATUS_BOUND = _pykernel.STATUS_BOUND
STATUS_CAP = _pykernel.STATUS_CAP

mix64 = _pykernel.mix64
derive_seed = _pykernel.derive_seed
pack_site = _pykernel.pack_site
unpack_site = _pykernel.unpack_site


def backend_name():
    return "compiled" if _kernel is not None else "pure-python"


def has_compiled():
    return _kernel is not None


def u01(seed, coords, axis, stream, index):
    if _kernel is not None and len(coords) <= 4:
        return _kernel.u01_scalar(seed & MASK64, tuple(coords), axis,
                                  stream, index)
    return _pykernel.u01(seed & MASK64, tuple(coords), axis, stream, index)


def edge_weight(seed, coords, axis, dist, mode):
    if _kernel is not None and len(coords) <= 4:
        return _kernel.edge_weight(seed & MASK64, tuple(coords), axis,
                                   dist, mode)
    return _pykernel.edge_weight(seed & MASK64, tuple(coords), axis,
                                 dist, mode)


def ring_times(seed, coords, axis, rate, t0, t1):
    if _kernel is not None and len(coords) <= 4:
        return _kernel.ring_times(seed & MASK64, tuple(coords), axis,
                                  rate, t0, t1)
    return _pykernel.ring_times(seed & MASK64, tuple(coords), axis,
                                rate, t0, t1)


def member(region, coords):
    if _kernel is not None and len(coords) <= 4:
        return _kernel.member(region, tuple(coords))
    return _pykernel.member(region, tuple(coords))


def explore(seed, d, region, dist, mode, sources, stop_kind=0,
            stop_val=None, bound=float("inf"), cap=50_000_000):
    if _kernel is not None and d <= 3:
        return _kernel.explore(seed & MASK64, d, region, dist, mode,
                               sources, stop_kind, stop_val, bound, cap)
    return _pykernel.explore(seed & MASK64, d, region, dist, mode,
                             sources, stop_kind, stop_val, bound, cap)
