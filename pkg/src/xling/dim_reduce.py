"""PCA-based reduction of embedding spaces to a shared dimensionality.

The pipeline is: remove the mean and the top ``D`` principal directions,
project onto the leading principal components, then post-process again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed_store import WordEmbeddings
from .errors import InsufficientDataError


@dataclass(frozen=True)
class ReductionConfig:
    target_dim: int = 100
    ppa_components: int = 7

    def __post_init__(self):
        if self.target_dim < 1:
            raise ValueError("target_dim must be positive")
        if not 0 <= self.ppa_components < self.target_dim:
            raise ValueError("ppa_components must lie in [0, target_dim)")


def principal_components(matrix: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Top ``n`` principal directions (rows) and their variances.

    Directions come from the SVD of the mean-centred matrix. Each direction is
    sign-fixed so its largest-magnitude entry is positive.
    """
    x = np.asarray(matrix, dtype=np.float64)
    centred = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    comps = vt[:n].copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(len(comps)), pivot])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    variances = s[:n] ** 2 / max(x.shape[0] - 1, 1)
    return comps, variances


def post_process(matrix: np.ndarray, n_components: int) -> np.ndarray:
    """Mean-centre, then subtract projections onto the top principal directions."""
    x = np.asarray(matrix, dtype=np.float64)
    n, d = x.shape
    if n < 2 or n <= n_components:
        raise InsufficientDataError(f"post-processing {n_components} components needs more than "
                                    f"{n_components} rows (and at least 2), got {n}")
    if n_components > d:
        raise InsufficientDataError(f"cannot remove {n_components} components from {d} dimensions")
    centred = x - x.mean(axis=0)
    if n_components == 0:
        return centred
    comps, _ = principal_components(centred, n_components)
    return centred - (centred @ comps.T) @ comps


def pca_project(matrix: np.ndarray, n_components: int) -> np.ndarray:
    """Coordinates of the centred rows along the top principal components."""
    x = np.asarray(matrix, dtype=np.float64)
    comps, _ = principal_components(x, n_components)
    return (x - x.mean(axis=0)) @ comps.T


def reduce_matrix(matrix: np.ndarray, config: ReductionConfig) -> np.ndarray:
    x = np.asarray(matrix, dtype=np.float64)
    n, d = x.shape
    if d <= config.target_dim:
        raise InsufficientDataError(f"input dim {d} is not above target dim {config.target_dim}")
    if n <= config.target_dim:
        raise InsufficientDataError(f"{n} vectors cannot support {config.target_dim} components")
    x = post_process(x, config.ppa_components)
    x = pca_project(x, config.target_dim)
    return post_process(x, config.ppa_components)


def reduce(embeddings: WordEmbeddings, config: ReductionConfig) -> WordEmbeddings:
    """Reduce ``embeddings`` to ``config.target_dim`` dimensions.

    A space already at the target dimension is returned unchanged.
    """
    if embeddings.dim == config.target_dim:
        return embeddings
    return embeddings.with_matrix(reduce_matrix(embeddings.matrix, config))
