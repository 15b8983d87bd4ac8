"""Kernel backend selection.

The inner-loop kernels (3x3 convolution, 2x2 pooling, bilinear resize)
exist twice: a compiled Cython extension and a pure-NumPy fallback with
identical conventions. The compiled core is preferred when built; set
``ADASISE_BACKEND=numpy`` or call :func:`set_backend` to force the
fallback (the kernel benchmark flips between the two this way).
"""

import os
import warnings

from . import _kernels_np

_BACKENDS = {"numpy": _kernels_np}

try:
    from . import _kernels as _kernels_cy

    _BACKENDS["cython"] = _kernels_cy
except ImportError:
    _kernels_cy = None

_active_name = "cython" if _kernels_cy is not None else "numpy"

_env = os.environ.get("ADASISE_BACKEND", "").strip().lower()
if _env:
    if _env in _BACKENDS:
        _active_name = _env
    else:
        warnings.warn(
            "ADASISE_BACKEND=%r is not available (choices: %s); using %r"
            % (_env, ", ".join(sorted(_BACKENDS)), _active_name),
            stacklevel=1,
        )

_impl = _BACKENDS[_active_name]


def available_backends():
    return tuple(sorted(_BACKENDS))


def get_backend():
    return _active_name


def set_backend(name):
    """Switch kernel implementations at runtime (mainly for tests/benchmarks)."""
    global _active_name, _impl
    if name not in _BACKENDS:
        raise ValueError(
            "unknown backend %r (available: %s)" % (name, ", ".join(sorted(_BACKENDS)))
        )
    _active_name = name
    _impl = _BACKENDS[name]


def conv2d_forward(x, w, bias):
    return _impl.conv2d_forward(x, w, bias)


def conv2d_input_grad(dy, w):
    return _impl.conv2d_input_grad(dy, w)


def maxpool2_forward(x):
    return _impl.maxpool2_forward(x)


def maxpool2_backward(dy, arg):
    return _impl.maxpool2_backward(dy, arg)


def avgpool2_forward(x):
    return _impl.avgpool2_forward(x)


def avgpool2_backward(dy):
    return _impl.avgpool2_backward(dy)


def bilinear_resize2d(src, out_h, out_w):
    return _impl.bilinear_resize2d(src, out_h, out_w)
