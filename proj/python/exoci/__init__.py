"""Confidence intervals for the slope in random-intercept panels with
uncertain exogeneity: panel fitting, interval-shape optimization, grids,
and Monte Carlo coverage/length studies."""

try:
    from ._exoci import *  # noqa: F401,F403  (installed wheel layout)
    from ._exoci import __doc__ as _core_doc  # noqa: F401
except ImportError:  # in-tree builds put _exoci on sys.path directly
    from _exoci import *  # noqa: F401,F403

__version__ = "0.1.0"
