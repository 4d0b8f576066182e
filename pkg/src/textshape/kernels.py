"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python ``_pykernels`` module is used. Setting ``TEXTSHAPE_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _pykernels

if os.environ.get("TEXTSHAPE_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

held_karp_path = _impl.held_karp_path
two_opt_path = _impl.two_opt_path
minhash_signatures = _impl.minhash_signatures

__all__ = ["BACKEND", "held_karp_path", "two_opt_path", "minhash_signatures"]
