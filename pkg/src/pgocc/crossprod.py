"""Cross-products X' Omega X and X' k for designs made of an optional
intercept, a dense covariate block and one-hot (categorical) blocks.

The one-hot blocks are never materialised.  Every block is a weighted count
over the rows, so the whole product is a few ``np.bincount`` passes: linear in
the number of rows, plus rows * p^2 for the dense covariate block.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Design:
    """Row layout of a regression design.

    Columns are ordered ``[intercept?, X, onehot_0, onehot_1, ...]``.
    """

    X: np.ndarray                 # (n, p) dense covariates
    groups: tuple                 # ((index array (n,), n_levels), ...)
    intercept: bool = True

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def slices(self) -> dict:
        out = {}
        pos = 0
        if self.intercept:
            out["intercept"] = slice(0, 1)
            pos = 1
        out["X"] = slice(pos, pos + self.X.shape[1])
        pos += self.X.shape[1]
        for g, (_, size) in enumerate(self.groups):
            out[f"group{g}"] = slice(pos, pos + size)
            pos += size
        return out

    @property
    def dim(self) -> int:
        return (1 if self.intercept else 0) + self.X.shape[1] + sum(s for _, s in self.groups)

    def subset(self, rows) -> "Design":
        return Design(self.X[rows], tuple((idx[rows], s) for idx, s in self.groups), self.intercept)

    def matvec(self, beta) -> np.ndarray:
        """Linear predictor X beta for every row."""
        sl = self.slices()
        out = self.X @ beta[sl["X"]]
        if self.intercept:
            out = out + beta[0]
        for g, (idx, _) in enumerate(self.groups):
            out = out + beta[sl[f"group{g}"]][idx]
        return out

    def dense(self) -> np.ndarray:
        """Materialise the full design (debug / oracle use only)."""
        cols = []
        if self.intercept:
            cols.append(np.ones((self.n, 1)))
        cols.append(self.X)
        for idx, size in self.groups:
            oh = np.zeros((self.n, size))
            oh[np.arange(self.n), idx] = 1.0
            cols.append(oh)
        return np.hstack(cols)


def sparse_cross_products(design: Design, omega, kvec):
    """Return ``(X' diag(omega) X, X' kvec)`` for ``design``.

    Parameters
    ----------
    design : Design
    omega : (n,) array
        Row weights, the PG auxiliaries.
    kvec : (n,) array
        Pseudo-responses.

    Returns
    -------
    P : (q, q) ndarray
    r : (q,) ndarray
    """
    omega = np.asarray(omega, dtype=float)
    kvec = np.asarray(kvec, dtype=float)
    X = design.X
    p = X.shape[1]
    q = design.dim
    sl = design.slices()
    P = np.zeros((q, q))
    r = np.zeros(q)
    Xw = X * omega[:, None]

    xs = sl["X"]
    P[xs, xs] = X.T @ Xw
    r[xs] = X.T @ kvec
    if design.intercept:
        P[0, 0] = omega.sum()
        P[0, xs] = Xw.sum(axis=0)
        r[0] = kvec.sum()

    for g, (idx, size) in enumerate(design.groups):
        gs = sl[f"group{g}"]
        wsum = np.bincount(idx, weights=omega, minlength=size)
        P[gs, gs] = np.diag(wsum)
        r[gs] = np.bincount(idx, weights=kvec, minlength=size)
        if design.intercept:
            P[0, gs] = wsum
        for c in range(p):
            P[xs.start + c, gs] = np.bincount(idx, weights=Xw[:, c], minlength=size)
        for h in range(g + 1, len(design.groups)):
            idx2, size2 = design.groups[h]
            hs = sl[f"group{h}"]
            joint = np.bincount(idx * size2 + idx2, weights=omega, minlength=size * size2)
            P[gs, hs] = joint.reshape(size, size2)

    # mirror the upper triangle
    iu = np.triu_indices(q, 1)
    P[(iu[1], iu[0])] = P[iu]
    return P, r
