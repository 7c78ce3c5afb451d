"""Hot-loop kernels with a compiled core and a pure numpy fallback.

The native extension is preferred when importable; set
SPADESYNTH_KERNELS=python|native to force a backend. Both produce
bit-identical results, so the choice only affects speed.
"""

import importlib
import os

from . import _python

_FORCED = os.environ.get("SPADESYNTH_KERNELS", "").strip().lower()

_native = None
if _FORCED != "python":
    # import_module, not `from . import`: this module sets the _native
    # attribute first, which a from-import would bind without importing.
    try:
        _native = importlib.import_module(__name__ + "._native")
    except ImportError:
        _native = None
        if _FORCED == "native":
            raise ImportError(
                "SPADESYNTH_KERNELS=native but the compiled extension is not "
                "available; build it with `pip install -e .` or drop the override"
            )

_impl = _native if _native is not None else _python

BACKEND = _impl.BACKEND

im2col = _impl.im2col
col2im_add = _impl.col2im_add
upsample_nearest = _impl.upsample_nearest
upsample_nearest_back = _impl.upsample_nearest_back


def backends():
    """Importable kernel backends, for tests and benchmarks."""
    out = {"python": _python}
    if _native is not None:
        out["native"] = _native
    return out


def set_backend(name: str) -> None:
    """Rebind the kernel entry points; call sites look them up per call."""
    mod = backends()[name]
    global BACKEND, im2col, col2im_add, upsample_nearest, upsample_nearest_back
    BACKEND = mod.BACKEND
    im2col = mod.im2col
    col2im_add = mod.col2im_add
    upsample_nearest = mod.upsample_nearest
    upsample_nearest_back = mod.upsample_nearest_back
