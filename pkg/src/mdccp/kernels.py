"""Select the compiled kernels when built, else the numpy fallback.

Set ``MDCCP_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("MDCCP_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

moving_average = _impl.moving_average
box_cov = _impl.box_cov
power_means = _impl.power_means

__all__ = ["BACKEND", "moving_average", "box_cov", "power_means"]
