"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy versions
in :mod:`pmots._purepy`.  Set ``PMOTS_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from pmots import _purepy

BACKEND = "python"
_impl = _purepy

if os.environ.get("PMOTS_PURE_PYTHON") != "1":
    try:
        from pmots import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _purepy

dominator_counts = _impl.dominator_counts
wlp_block_stats = _impl.wlp_block_stats
wlp_criteria = _impl.wlp_criteria
wlp_throughput = _purepy.wlp_throughput
wsn_reach = _impl.wsn_reach
wsn_criteria = _impl.wsn_criteria
wsn_link_matrix = _impl.wsn_link_matrix

__all__ = ["BACKEND", "dominator_counts", "wlp_block_stats", "wlp_criteria", "wlp_throughput", "wsn_criteria",
           "wsn_link_matrix", "wsn_reach"]
