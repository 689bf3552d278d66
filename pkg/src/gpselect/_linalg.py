import numpy as np
from numba import njit


@njit(cache=True)
def explained_variance(upper, t, cross, ids, out):
    """out[j] = ||L^-1 k(ids[j])||^2 with L = upper[:t, :t].T.

    Each column is solved on its own with a fixed operation order, so the
    result for an item does not depend on which other items are in the batch.
    Lazy and full recomputation therefore agree bit for bit.
    """
    buf = np.empty(t)
    for j in range(ids.size):
        v = ids[j]
        for i in range(t):
            buf[i] = cross[v, i]
        s = 0.0
        for k in range(t):
            w = buf[k] / upper[k, k]
            s += w * w
            row = upper[k]
            for i in range(k + 1, t):
                buf[i] -= row[i] * w
        out[j] = s
