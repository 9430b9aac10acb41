"""numpy implementations of the row kernels, used when the extension is unavailable."""
import numpy as np


def _mean_ss(x):
    # A constant row gets exactly zero spread; rounding in the mean would otherwise leave a tiny residue.
    n = x.shape[1]
    mean = x.sum(axis=1) / n
    dev = x - mean[:, None]
    ss = np.einsum("ij,ij->i", dev, dev)
    constant = np.all(x == x[:, :1], axis=1)
    mean[constant] = x[constant, 0]
    ss[constant] = 0.0
    return mean, ss


def one_sample_t(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[1]
    mean, ss = _mean_ss(x)
    flagged = ~(ss > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        stats = np.sqrt(n) * mean / np.sqrt(ss / (n - 1))
    stats[flagged] = np.nan
    return stats, flagged


def two_sample_t(x, y):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n1, n2 = x.shape[1], y.shape[1]
    mx, ssx = _mean_ss(x)
    my, ssy = _mean_ss(y)
    vx = ssx / (n1 - 1) / n1
    vy = ssy / (n2 - 1) / n2
    se2 = vx + vy
    flagged = ~(se2 > 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        stats = (mx - my) / np.sqrt(se2)
        dof = se2 * se2 / (vx * vx / (n1 - 1) + vy * vy / (n2 - 1))
    stats[flagged] = np.nan
    dof[flagged] = np.nan
    return stats, dof, flagged


def g_hat_grid(abs_sorted, cgrid):
    abs_sorted = np.asarray(abs_sorted, dtype=np.float64)
    cgrid = np.asarray(cgrid, dtype=np.float64)
    m = abs_sorted.size
    k = np.searchsorted(abs_sorted, cgrid, side="left")
    prefix = np.concatenate(([0.0], np.cumsum(abs_sorted)))
    return (prefix[k] + cgrid * (m - k)) / (cgrid * m)
