"""Metric depth calibration, semantic voxel fusion, and grid evaluation.

The heavy lifting lives in the compiled ``_primivox`` extension; this
package just re-exports its surface. Bundles, frames, and configs are plain
dicts of numpy arrays — see the function docstrings for the expected keys.
"""

try:
    from _primivox import *  # noqa: F401,F403  (module on sys.path)
    from _primivox import __doc__ as _core_doc  # noqa: F401
except ImportError:  # installed layout: extension inside the package
    from primivox._primivox import *  # noqa: F401,F403

__all__ = [name for name in dir() if not name.startswith("_")]
