"""Elementwise bracketing root finder used by the equilibrium solver."""
import numpy as np
from scipy.optimize.elementwise import find_root


def bracket_root(func, lo, hi, xtol=0.0, rtol=1e-14):
    """Find roots of ``func`` elementwise on brackets ``lo < hi``.

    ``func(x, idx)`` receives the abscissae of the rows still iterating and
    their flat row indices, so it can select per-row data; converged rows
    are not re-evaluated. scipy's Chandrupatla solver does the work, which
    also makes each row's result independent of the rest of the batch.

    Returns
    -------
    x : ndarray
        Root estimates, NaN where ``[lo, hi]`` does not bracket a sign change.
    converged : ndarray of bool
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    idx = np.arange(lo.size).reshape(lo.shape)
    res = find_root(func, (lo, hi), args=(idx,),
                    tolerances=dict(xatol=xtol, xrtol=rtol, fatol=0.0, frtol=0.0))
    return res.x, res.success
