"""Pure-NumPy forward-backward, used when the compiled core is unavailable.

Same contract as spanweak._core.forward_backward; see spanweak.kernels.
"""

from __future__ import annotations

import numpy as np


def forward_backward(b, mu, T, offsets):
    """Scaled forward-backward over a batch of independent chains.

    b: (n, K) per-token emission likelihoods (pre-scaled by the caller),
    mu: (K,) initial distribution, T: (K, K) row-stochastic transitions,
    offsets: (S+1,) int64 token offsets delimiting the chains.

    Returns (gamma, xi_sum, loglik): per-token posterior marginals (n, K),
    expected transition counts summed over all chains (K, K), and the sum of
    per-chain log-likelihoods of the (scaled) observations.
    """
    b = np.asarray(b, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    n, K = b.shape
    gamma = np.empty((n, K))
    xi_sum = np.zeros((K, K))
    loglik = 0.0
    for s in range(len(offsets) - 1):
        lo, hi = int(offsets[s]), int(offsets[s + 1])
        L = hi - lo
        alpha = np.empty((L, K))
        c = np.empty(L)
        a = mu * b[lo]
        c[0] = a.sum()
        alpha[0] = a / c[0]
        for t in range(1, L):
            a = (alpha[t - 1] @ T) * b[lo + t]
            c[t] = a.sum()
            alpha[t] = a / c[t]
        beta = np.ones(K)
        gamma[hi - 1] = alpha[L - 1]
        for t in range(L - 2, -1, -1):
            w = b[lo + t + 1] * beta
            xi_sum += alpha[t][:, None] * T * w[None, :] / c[t + 1]
            beta = (T @ w) / c[t + 1]
            g = alpha[t] * beta
            gamma[lo + t] = g / g.sum()
        loglik += float(np.log(c).sum())
    return gamma, xi_sum, loglik
