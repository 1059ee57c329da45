"""NumPy reference implementation of the switched-state recursion.

This is the import-time fallback when the compiled extension is absent
(or when ``RACCESS_PURE_PYTHON=1``), and the baseline the extension is
benchmarked against. Both backends compute

    x_{k+1} = A_closed x_k + w_k   if gamma_k
            = A_open   x_k + w_k   otherwise

for a precomputed delivery sequence gamma and noise block w.
"""

import numpy as np


def state_recursion(a_closed, a_open, gamma, noise, x0):
    """Run the two-mode linear recursion, returning every post-update state.

    Parameters
    ----------
    a_closed, a_open : ndarray, shape (n, n)
    gamma : ndarray, shape (N,), integer 0/1 per slot
    noise : ndarray, shape (N, n)
    x0 : ndarray, shape (n,)

    Returns
    -------
    ndarray, shape (N, n)
        States x_1 .. x_N.
    """
    n_slots = gamma.shape[0]
    out = np.empty((n_slots, x0.shape[0]))
    x = np.array(x0, dtype=float, copy=True)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_slots):
            a = a_closed if gamma[k] else a_open
            x = a @ x + noise[k]
            out[k] = x
    return out
