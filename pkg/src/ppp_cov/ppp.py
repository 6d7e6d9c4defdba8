"""Thresholding post-processed posterior.

Each inverse-Wishart posterior draw is hard-thresholded at
``gamma * sqrt(log p / n)`` and, if its smallest eigenvalue falls below
``epsilon``, shifted by ``(epsilon - lambda_min) * I``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import partial
from pathlib import Path

import numpy as np

from ._parallel import chunks, pmap
from .sampling import (
    RNG_FAMILY,
    IWParams,
    RngStream,
    _inv_scale_chol,
    as_stream,
    draw_block,
    posterior_params,
    standard_df,
)

__all__ = [
    "DEFAULT_EPSILON",
    "ThresholdConfig",
    "PosteriorEnsemble",
    "hard_threshold",
    "pd_adjust",
    "post_process",
    "generate_ppp_ensemble",
    "ensemble_mean",
    "write_ensemble",
    "read_ensemble",
]

DEFAULT_EPSILON = 1e-4


@dataclass(frozen=True)
class ThresholdConfig:
    gamma: float
    n: int
    p: int
    epsilon: float = DEFAULT_EPSILON
    preserve_diagonal: bool = False

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be >= 1")

    @property
    def cutoff(self) -> float:
        return self.gamma * math.sqrt(math.log(self.p) / self.n)

    def with_(self, **changes) -> "ThresholdConfig":
        return ThresholdConfig(**{**asdict(self), **changes})


def _check_dim(m: np.ndarray, cfg: ThresholdConfig):
    if m.shape[-1] != cfg.p:
        raise ValueError(f"matrix has dim {m.shape[-1]}, config expects p = {cfg.p}")


def hard_threshold(m, cfg: ThresholdConfig) -> np.ndarray:
    """Zero every entry with ``|m_ij| < cutoff``; entries at the cutoff are kept.

    Works on a single matrix or a ``(N, p, p)`` stack.
    """
    a = np.asarray(m, dtype=float)
    _check_dim(a, cfg)
    out = np.where(np.abs(a) >= cfg.cutoff, a, 0.0)
    if cfg.preserve_diagonal:
        idx = np.arange(cfg.p)
        out[..., idx, idx] = a[..., idx, idx]
    return out


def pd_adjust(m, cfg: ThresholdConfig) -> np.ndarray:
    """Shift the diagonal so the smallest eigenvalue is at least ``epsilon``.

    Only applied when ``lambda_min < epsilon`` (strict).
    """
    a = np.array(m, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    lam = np.linalg.eigvalsh(a)[..., 0]
    shift = np.where(lam < cfg.epsilon, cfg.epsilon - lam, 0.0)
    idx = np.arange(a.shape[-1])
    a[..., idx, idx] += shift[..., None] if a.ndim == 3 else shift
    return a


def post_process(m, cfg: ThresholdConfig) -> np.ndarray:
    return pd_adjust(hard_threshold(m, cfg), cfg)



@dataclass(frozen=True, eq=False)
class PosteriorEnsemble:
    """``N`` covariance draws (``draws[k]`` is ``p x p``) plus provenance."""

    draws: np.ndarray
    config: ThresholdConfig
    prior: IWParams
    seed: RngStream
    post_processed: bool = True

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=float)
        if d.ndim != 3 or d.shape[1] != d.shape[2] or d.shape[0] < 1:
            raise ValueError(f"draws must be a non-empty (N, p, p) stack, got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "draws", d)

    def __len__(self) -> int:
        return self.draws.shape[0]

    @property
    def dim(self) -> int:
        return self.draws.shape[1]


def _ensemble_chunk(job):
    inv_chol, df, stream, idx, cfg, post = job
    raw = draw_block(inv_chol, df, stream, idx)
    return post_process(raw, cfg) if post else raw


def generate_ppp_ensemble(
    prior: IWParams,
    data,
    cfg: ThresholdConfig,
    N: int,
    seed: "RngStream | int",
    *,
    demean: bool = False,
    raw: bool = False,
    workers: int = 1,
) -> PosteriorEnsemble:
    """Draw ``N`` posterior samples and post-process each one.

    Draw ``k`` uses the substream ``seed.child(k)``, so the result does not
    depend on ``workers``. ``raw=True`` skips post-processing and returns the
    plain inverse-Wishart posterior draws (the IW method).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    stream = as_stream(seed)
    post = posterior_params(prior, data, demean=demean)
    if post.dim != cfg.p:
        raise ValueError(f"config p = {cfg.p} does not match data dim {post.dim}")
    inv_chol = _inv_scale_chol(post.scale)
    df = standard_df(post.nu, post.dim)
    jobs = [(inv_chol, df, stream, idx, cfg, not raw) for idx in chunks(N, max(workers, 1))]
    draws = np.concatenate(pmap(_ensemble_chunk, jobs, workers))
    return PosteriorEnsemble(draws, cfg, prior, stream, post_processed=not raw)


def ensemble_mean(e: PosteriorEnsemble) -> np.ndarray:
    if len(e) == 0:
        raise ValueError("empty ensemble")
    m = e.draws.mean(axis=0)
    return (m + m.T) / 2


def _meta(e: PosteriorEnsemble, assets=None) -> dict:
    return {
        "N": len(e),
        "p": e.dim,
        "master_seed": e.seed.master_seed,
        "stream_path": list(e.seed.path),
        "rng": RNG_FAMILY,
        "config": asdict(e.config),
        "prior": {"nu": e.prior.nu, "scale": e.prior.scale.tolist()},
        "post_processed": e.post_processed,
        "triangle": "upper",
        "assets": list(assets) if assets is not None else None,
    }


def write_ensemble(e: PosteriorEnsemble, path, assets=None) -> tuple[Path, Path]:
    """Write ``draw_index,i,j,value`` rows (upper triangle) plus ``<stem>.json``."""
    path = Path(path)
    p = e.dim
    iu, ju = np.triu_indices(p)
    k = np.repeat(np.arange(len(e)), len(iu))
    rows = np.column_stack([k, np.tile(iu, len(e)), np.tile(ju, len(e)), e.draws[:, iu, ju].ravel()])
    np.savetxt(path, rows, fmt=["%d", "%d", "%d", "%.17g"], delimiter=",",
               header="draw_index,i,j,value", comments="")
    meta_path = path.with_suffix(".json")
    meta_path.write_text(json.dumps(_meta(e, assets), indent=2))
    return path, meta_path


def read_ensemble(path) -> tuple[PosteriorEnsemble, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    N, p = int(meta["N"]), int(meta["p"])
    k, i, j = (rows[:, c].astype(int) for c in range(3))
    draws = np.zeros((N, p, p))
    draws[k, i, j] = rows[:, 3]
    draws[k, j, i] = rows[:, 3]
    prior = IWParams(np.array(meta["prior"]["scale"]), meta["prior"]["nu"])
    cfg = ThresholdConfig(**meta["config"])
    seed = RngStream(int(meta["master_seed"]), tuple(meta["stream_path"]))
    return PosteriorEnsemble(draws, cfg, prior, seed, bool(meta["post_processed"])), meta
