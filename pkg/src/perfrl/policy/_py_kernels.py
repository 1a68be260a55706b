"""Pure-numpy kernels: single-step next-token log-probs for the windowed net.

The compiled backend in _c_kernels.pyx implements the same signature for the
decode hot loop; this module is the always-available fallback and reference.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def step_log_probs(embed, w1, b1, w2, b2, window) -> np.ndarray:
    """Log-probs over the vocabulary for one context window of token ids."""
    e = embed[window].reshape(-1)
    h = np.tanh(e @ w1 + b1)
    logits = h @ w2 + b2
    m = logits.max()
    return logits - (m + np.log(np.exp(logits - m).sum()))
