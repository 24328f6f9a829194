"""Kernel backend selection.

The subspace-search inner loops are written once, in the numpy subset that
numba's nopython mode accepts, and decorated with :func:`jit`. When numba is
importable (and not vetoed) the decorator compiles them; otherwise it is the
identity and the same source runs as plain numpy.

Control via the ``RESPENV_NUMBA`` environment variable, read at import time:

* unset or ``auto`` -- compile when numba imports cleanly, fall back silently;
* ``1`` / ``on``     -- require numba, raise if it is missing;
* ``0`` / ``off``    -- force the pure-numpy path.
"""

import os

_FLAG = os.environ.get("RESPENV_NUMBA", "auto").strip().lower()
_OFF = {"0", "off", "false", "no"}
_ON = {"1", "on", "true", "yes", "force"}


def _resolve() -> bool:
    if _FLAG in _OFF:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        if _FLAG in _ON:
            raise ImportError(
                "RESPENV_NUMBA=%s requires numba, which is not installed" % _FLAG
            )
        return False
    return True


NUMBA_ENABLED = _resolve()

if NUMBA_ENABLED:
    import numba

    def jit(func):
        return numba.njit(cache=True, nogil=True)(func)

else:

    def jit(func):
        return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def python_reference(kernel):
    """The uncompiled twin of a kernel (the kernel itself on the numpy path)."""
    return getattr(kernel, "py_func", kernel)
