"""Seedable random generation: normal data, Wishart and inverse-Wishart draws.

Inverse-Wishart parameters follow the convention where the density is
proportional to ``|S|^(-nu/2) exp(-tr(S^-1 B) / 2)``. In the usual
(Gelman / scipy) convention this is ``IW(B, nu - p - 1)``; every sampler here
maps ``nu`` through :func:`standard_df` before drawing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .linalg import as_cov, cholesky

__all__ = [
    "RNG_FAMILY",
    "RngStream",
    "IWParams",
    "standard_df",
    "sample_mvn",
    "bartlett_factor",
    "sample_wishart",
    "sample_inverse_wishart",
    "second_moment",
    "posterior_params",
    "default_prior",
]

RNG_FAMILY = "numpy.random.Philox(SeedSequence(master_seed, spawn_key=path))"


@dataclass(frozen=True)
class RngStream:
    """Immutable descriptor of a reproducible random stream.

    A stream is identified by a master seed and a path of integer keys; the
    same pair always yields the same sequence, regardless of which process
    builds the generator. Child streams extend the path.
    """

    master_seed: int
    path: tuple[int, ...] = ()

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.master_seed, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def as_stream(rng: "RngStream | int") -> RngStream:
    return rng if isinstance(rng, RngStream) else RngStream(int(rng))


@dataclass(frozen=True)
class IWParams:
    """Inverse-Wishart ``IW_p(scale, nu)`` with density exponent ``-nu/2``."""

    scale: np.ndarray
    nu: float

    def __post_init__(self):
        scale = as_cov(self.scale)
        scale.setflags(write=False)
        object.__setattr__(self, "scale", scale)
        p = scale.shape[0]
        if not self.nu > 2 * p:
            raise ValueError(f"nu must exceed 2p = {2 * p}, got {self.nu}")
        cholesky(scale)

    @property
    def dim(self) -> int:
        return self.scale.shape[0]

    def __eq__(self, other):
        if not isinstance(other, IWParams):
            return NotImplemented
        return self.nu == other.nu and np.array_equal(self.scale, other.scale)

    __hash__ = None


def standard_df(nu: float, p: int) -> float:
    """Degrees of freedom in the standard convention, ``nu - p - 1``."""
    return nu - p - 1


def sample_mvn(mean, cov, n: int, rng: "RngStream | int") -> np.ndarray:
    """``n`` i.i.d. rows from ``N(mean, cov)`` via the Cholesky transform."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cov = as_cov(cov)
    p = cov.shape[0]
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (p,))
    L = cholesky(cov)
    z = as_stream(rng).generator().standard_normal((n, p))
    return mean + z @ L.T


@lru_cache(maxsize=32)
def _layout(p: int):
    low = np.tril_indices(p, -1)
    return np.arange(p), low, len(low[0])


def bartlett_factor(p: int, df: float, gen: np.random.Generator) -> np.ndarray:
    """Lower-triangular ``A`` with ``A @ A.T ~ Wishart(I_p, df)``."""
    diag, low, n_low = _layout(p)
    A = np.zeros((p, p))
    A[diag, diag] = np.sqrt(gen.chisquare(df - diag))
    A[low] = gen.standard_normal(n_low)
    return A


def sample_wishart(scale_chol: np.ndarray, df: float, rng: "RngStream | int") -> np.ndarray:
    """One ``Wishart(L @ L.T, df)`` draw given the lower Cholesky factor ``L``."""
    p = scale_chol.shape[0]
    if not df > p - 1:
        raise ValueError(f"Wishart df must exceed p - 1 = {p - 1}, got {df}")
    T = scale_chol @ bartlett_factor(p, df, as_stream(rng).generator())
    return T @ T.T


def _inv_scale_chol(scale: np.ndarray) -> np.ndarray:
    # Cholesky factor of scale^-1, i.e. the Wishart scale we invert
    p = scale.shape[0]
    Lb = cholesky(scale)
    inv = solve_triangular(Lb, np.eye(p), lower=True)
    return cholesky(inv.T @ inv)


def _iw_draw(inv_chol: np.ndarray, df: float, gen: np.random.Generator) -> np.ndarray:
    p = inv_chol.shape[0]
    T = inv_chol @ bartlett_factor(p, df, gen)
    Tinv, info = lapack.dtrtri(T, lower=1)
    if info != 0:
        raise np.linalg.LinAlgError(f"singular Bartlett factor (dtrtri info={info})")
    draw = Tinv.T @ Tinv
    return (draw + draw.T) / 2


def sample_inverse_wishart(params: IWParams, rng: "RngStream | int", size: int | None = None) -> np.ndarray:
    """Inverse-Wishart draw(s).

    Draws ``W ~ Wishart(scale^-1, nu - p - 1)`` by Bartlett decomposition and
    returns ``W^-1``. With ``size`` given, returns ``(size, p, p)`` where draw
    ``k`` comes from ``rng.child(k)`` so any subset of indices can be
    regenerated independently.
    """
    stream = as_stream(rng)
    df = standard_df(params.nu, params.dim)
    inv_chol = _inv_scale_chol(params.scale)
    if size is None:
        return _iw_draw(inv_chol, df, stream.generator())
    return draw_block(inv_chol, df, stream, range(size))


def draw_block(inv_chol: np.ndarray, df: float, stream: RngStream, indices: Sequence[int]) -> np.ndarray:
    p = inv_chol.shape[0]
    out = np.empty((len(indices), p, p))
    for j, k in enumerate(indices):
        out[j] = _iw_draw(inv_chol, df, stream.child(k).generator())
    return out


def second_moment(data, demean: bool = False) -> np.ndarray:
    """``n^-1 sum x_i x_i^T``; column means are removed first when ``demean``."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("data must be a 2-d array with at least one row")
    if demean:
        X = X - X.mean(axis=0)
    S = X.T @ X / X.shape[0]
    return (S + S.T) / 2


def posterior_params(prior: IWParams, data, demean: bool = False) -> IWParams:
    """Conjugate update ``IW(B0 + n S_n, nu0 + n)``."""
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("data must have at least one row")
    if X.shape[1] != prior.dim:
        raise ValueError(f"data has {X.shape[1]} columns, prior has dim {prior.dim}")
    n = X.shape[0]
    return IWParams(prior.scale + n * second_moment(X, demean), prior.nu + n)


def default_prior(data, demean: bool = False) -> IWParams:
    """``IW(sbar * I_p, 2p + 2)`` with ``sbar`` the mean sample variance."""
    S = second_moment(data, demean)
    p = S.shape[0]
    return IWParams(np.mean(np.diag(S)) * np.eye(p), 2 * p + 2)
