"""Kernel dispatch: the compiled extension when available, numpy otherwise.

Set ``CONTEST_OPT_PURE=1`` to force the numpy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("CONTEST_OPT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels

canonical_sweep = _impl.canonical_sweep
coarse_allocate = _impl.coarse_allocate
pair_rule_moments = _impl.pair_rule_moments
vcg_utilities = _impl.vcg_utilities

__all__ = ["BACKEND", "canonical_sweep", "coarse_allocate", "pair_rule_moments", "vcg_utilities"]
