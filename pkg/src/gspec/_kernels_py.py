"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

from collections import deque

import numpy as np


def scatter_products(va, offa, vb, offb, out):
    for a, oa in zip(va, offa):
        if a == 0.0:
            continue
        out[oa + offb] += a * vb


def torus_lp_norms(cre, cim, p, n_points):
    K = cre.shape[1]
    t = np.arange(n_points) / n_points
    basis = np.exp(2j * np.pi * np.outer(np.arange(K), t))
    vals = (np.asarray(cre) + 1j * np.asarray(cim)) @ basis
    return np.mean(np.abs(vals) ** p, axis=1) ** (1.0 / p)


def _wrap(d):
    return (d + np.pi) % (2 * np.pi) - np.pi


def unwrap_bfs(phase, mask, shape, start):
    shape = tuple(int(s) for s in shape)
    ph = np.asarray(phase).reshape(shape)
    msk = np.asarray(mask, dtype=bool).reshape(shape)
    out = np.zeros(shape)
    seen = np.zeros(shape, dtype=bool)
    s0 = np.unravel_index(start, shape)
    out[s0] = ph[s0]
    seen[s0] = True
    queue = deque([s0])
    while queue:
        cur = queue.popleft()
        for d in range(len(shape)):
            for step in (-1, 1):
                c = cur[d] + step
                if c < 0 or c >= shape[d]:
                    continue
                nb = cur[:d] + (c,) + cur[d + 1:]
                if seen[nb] or not msk[nb]:
                    continue
                seen[nb] = True
                out[nb] = out[cur] + _wrap(ph[nb] - ph[cur])
                queue.append(nb)
    return out.ravel(), seen.ravel()
