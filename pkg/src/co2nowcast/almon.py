"""Restricted Almon lag polynomial weighting for the weekly MIDAS block.

The C high-frequency lags are compressed into p+1-r transformed regressors
via w_tilde = Q w. Lag weights are a degree-p polynomial in the lag index
c = 0..C-1 (c = 0 is the newest lag); end-point restrictions force the
polynomial's value (r >= 1) and slope (r = 2) to zero at the last lag,
so the weights decay smoothly toward zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DomainError, LengthError


@dataclass(frozen=True)
class AlmonSpec:
    p: int = 3  # polynomial degree
    r: int = 2  # end-point restrictions (0: none, 1: value, 2: value+slope)
    C: int = 52  # number of high-frequency lags

    def __post_init__(self):
        if self.p < 1:
            raise DomainError("polynomial degree p must be >= 1")
        if not 0 <= self.r <= 2:
            raise DomainError("number of end-point restrictions r must be in {0,1,2}")
        if self.C < self.p + 1:
            raise DomainError("need C >= p+1 lags")
        if self.p + 1 - self.r < 1:
            raise DomainError("p+1-r must be >= 1")

    @property
    def n_params(self) -> int:
        return self.p + 1 - self.r


@dataclass(frozen=True)
class AlmonMap:
    spec: AlmonSpec
    Q: np.ndarray = field(repr=False)  # (p+1-r, C)
    basis: np.ndarray = field(repr=False)  # (p+1, p+1-r) null-space basis N


def _vandermonde(C: int, p: int) -> np.ndarray:
    c = np.arange(C, dtype=float)
    return c[:, None] ** np.arange(p + 1)[None, :]


def restriction_matrix(spec: AlmonSpec) -> np.ndarray:
    """Rows constraining the weight polynomial at the last lag c = C-1."""
    p, C = spec.p, spec.C
    rows = []
    if spec.r >= 1:
        rows.append(float(C - 1) ** np.arange(p + 1))  # value at last lag = 0
    if spec.r >= 2:
        l = np.arange(p + 1, dtype=float)
        row = np.zeros(p + 1)
        row[1:] = l[1:] * float(C - 1) ** (l[1:] - 1)  # slope at last lag = 0
        rows.append(row)
    return np.array(rows).reshape(spec.r, p + 1)


def build_almon_map(spec: AlmonSpec) -> AlmonMap:
    """Q = (V N)' where N spans the null space of the restriction matrix.

    Regressing on Q w is exactly regressing on the free polynomial
    parameters; the implied full weight vector is b = V N gamma.
    """
    V = _vandermonde(spec.C, spec.p)
    if spec.r == 0:
        N = np.eye(spec.p + 1)
    else:
        A = restriction_matrix(spec)
        N = scipy.linalg.null_space(A)
        if N.shape != (spec.p + 1, spec.n_params):
            raise DomainError(
                f"restriction matrix rank-deficient: null space {N.shape}"
            )
        # deterministic sign convention: first nonzero entry of each column > 0
        for j in range(N.shape[1]):
            col = N[:, j]
            lead = col[np.nonzero(np.abs(col) > 1e-12)[0][0]]
            if lead < 0:
                N[:, j] = -col
    Q = (V @ N).T
    Q.setflags(write=False)
    N.setflags(write=False)
    return AlmonMap(spec=spec, Q=Q, basis=N)


def implied_weights(amap: AlmonMap, gamma, normalize: bool = False) -> np.ndarray:
    """Per-lag weights b = V N gamma (reporting only, not estimation).

    With normalize=True the weights are rescaled to sum to one; the scale is
    otherwise absorbed by the slopes on the transformed regressors.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (amap.spec.n_params,):
        raise LengthError(
            f"gamma must have length {amap.spec.n_params}, got {gamma.shape}"
        )
    V = _vandermonde(amap.spec.C, amap.spec.p)
    b = V @ amap.basis @ gamma
    if normalize:
        total = b.sum()
        if abs(total) < 1e-14:
            raise DomainError("cannot normalize weights summing to zero")
        b = b / total
    return b
