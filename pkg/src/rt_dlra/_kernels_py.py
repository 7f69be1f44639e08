"""NumPy implementation of the upwind differencing kernel."""
import numpy as np


def upwind_diff(a, lo, hi, signs, scale, inv_h, axis):
    n = a.shape[axis]
    padded = np.concatenate(
        [np.expand_dims(lo, axis), a, np.expand_dims(hi, axis)], axis=axis)
    d = np.diff(padded, axis=axis)
    back = d.take(np.arange(n), axis=axis)
    fwd = d.take(np.arange(1, n + 1), axis=axis)
    w = scale * inv_h
    return back * np.where(signs > 0, w, 0.0) + fwd * np.where(signs < 0, w, 0.0)
