"""Pure numpy implementations of the hot loops.

Summation order matches the compiled kernels term for term: moving sums run
from position k back to k - l, box sums run left to right, power sums run
over boxes in index order (``cumsum`` is sequential). Powers are taken as
exp(q * log(a / ref)) with the logs computed once per column.
"""

import numpy as np


def moving_average(profile, window, literal=False):
    x = np.ascontiguousarray(profile, dtype=np.float64)
    n = x.shape[0]
    acc = x.copy()
    for j in range(1, min(window, n - 1) + 1):
        acc[j:] += x[:-j]
    if literal:
        return acc / window
    count = np.minimum(np.arange(n) + 1, window + 1).astype(np.float64)
    return acc / count


def box_cov(resid, starts, s):
    resid = np.ascontiguousarray(resid, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.intp)
    n_assets = resid.shape[0]
    out = np.empty((len(starts), n_assets, n_assets))
    for i in range(n_assets):
        for j in range(i, n_assets):
            prod = resid[i] * resid[j]
            acc = np.zeros(len(starts))
            for o in range(s):
                acc += prod[starts + o]
            acc /= s
            out[:, i, j] = acc
            out[:, j, i] = acc
    return out


def power_means(a, qs, q0_literal=False):
    a = np.ascontiguousarray(a, dtype=np.float64)
    n_boxes = a.shape[0]
    qs = np.asarray(qs, dtype=np.float64)
    out = np.empty((len(qs), a.shape[1]))
    hi = a.max(axis=0)
    lo = a.min(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_sum = np.cumsum(np.log(a), axis=0)[-1]
        l_hi = np.log(a / hi)
        l_lo = np.log(a / lo)
    for iq, q in enumerate(qs):
        if q == 0.0:
            out[iq] = np.exp(log_sum / (2 * n_boxes if q0_literal else n_boxes))
            continue
        ref = hi if q > 0 else lo
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            acc = np.cumsum(np.exp(q * (l_hi if q > 0 else l_lo)), axis=0)[-1]
            res = ref * np.power(acc / n_boxes, 1.0 / q)
        if q > 0:
            res = np.where(hi == 0.0, 0.0, res)
        out[iq] = res
    return out
