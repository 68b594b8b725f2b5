"""Two-component Gaussian mixture over embeddings: k-means(++) init,
EM fitting, responsibilities, and pseudo-label extraction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import make_rng
from .errors import (DegenerateComponentError, EmptyBatchError,
                     SingularCovarianceError, TooFewSamplesError)

COV_FLOOR = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GmmConfig:
    n_components: int = 2
    max_iter: int = 100          # EM iterations
    tol: float = 1e-3            # NLL change convergence threshold
    cov_floor: float = COV_FLOOR
    full_covariance: bool = False
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300
    em_restarts: int = 3         # fresh k-means seeds on degeneracy


@dataclass
class GaussianMixture:
    """Fitted mixture. ``covariances`` is (K, S) of diagonal variances, or
    (K, S, S) full matrices when fitted with full_covariance."""
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    nll_trace: list = field(default_factory=list)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def full(self) -> bool:
        return self.covariances.ndim == 3


@dataclass
class PseudoLabels:
    assignments: np.ndarray        # argmax responsibility per sample
    responsibilities: np.ndarray   # (N, K), rows sum to 1
    minority_component: int


def gaussian_log_pdf(x, mean, cov):
    """Log-density of a multivariate normal, evaluated in log space.

    ``cov`` is a 1-D array of diagonal variances or a full (S, S) matrix.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    diff = x - mean
    s = mean.size
    if cov.ndim == 1:
        if np.any(cov <= 0):
            raise SingularCovarianceError("non-positive diagonal variance")
        logdet = float(np.sum(np.log(cov)))
        maha = np.sum(diff * diff / cov, axis=1)
    else:
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise SingularCovarianceError("covariance not SPD") from exc
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        sol = np.linalg.solve(chol, diff.T)
        maha = np.sum(sol * sol, axis=0)
    out = -0.5 * (s * LOG_2PI + logdet + maha)
    return out if out.size > 1 else float(out[0])


def _component_log_probs(model: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """(N, K) matrix of log(h_k) + log G_k(x)."""
    x = np.atleast_2d(x)
    cols = []
    for k in range(model.n_components):
        lp = gaussian_log_pdf(x, model.means[k], model.covariances[k])
        cols.append(np.atleast_1d(lp) + np.log(model.weights[k]))
    return np.stack(cols, axis=1)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(amax, axis) + np.log(np.sum(np.exp(a - amax), axis=axis))


def mixture_nll(model: GaussianMixture, batch) -> float:
    """Negative log-likelihood of the batch under the mixture."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[0] == 0:
        raise EmptyBatchError("empty batch")
    return float(-np.sum(_logsumexp(_component_log_probs(model, batch), axis=1)))


def responsibilities(model: GaussianMixture, batch) -> PseudoLabels:
    """Posterior component memberships, computed via log-sum-exp."""
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[0] == 0:
        raise EmptyBatchError("empty batch")
    log_p = _component_log_probs(model, batch)
    log_r = log_p - _logsumexp(log_p, axis=1)[:, None]
    r = np.exp(log_r)
    assign = np.argmax(r, axis=1)
    return PseudoLabels(assign, r, identify_minority(model, assign))


def identify_minority(model: GaussianMixture, assignments=None) -> int:
    """Component standing in for the rare class: smaller mixture weight,
    tie-broken by fewer assigned members, then by index 0. The paper-side
    mapping from components to disease classes is unspecified, so this is
    a deliberate policy."""
    w = model.weights
    if abs(w[0] - w[1]) > 1e-12:
        return int(np.argmin(w))
    if assignments is not None:
        counts = np.bincount(np.asarray(assignments), minlength=2)
        if counts[0] != counts[1]:
            return int(np.argmin(counts))
    return 0


def kmeans(points, k: int, restarts: int = 10, max_iter: int = 300,
           seed: int = 0):
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts`` by
    within-cluster sum of squares.

    Returns (centers (k, S), assignments (N,), wcss).
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = points.shape[0]
    if n < k:
        raise TooFewSamplesError(f"{n} points for k={k}")
    rng = make_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        centers = _kmeans_pp_init(points, k, rng)
        assign = None
        for _ in range(max_iter):
            d2 = _sq_dists(points, centers)
            new_assign = np.argmin(d2, axis=1)
            if assign is not None and np.array_equal(new_assign, assign):
                break
            assign = new_assign
            for j in range(k):
                members = points[assign == j]
                if len(members) == 0:
                    # re-seed an empty cluster at the farthest point
                    centers[j] = points[np.argmax(np.min(d2, axis=1))]
                else:
                    centers[j] = members.mean(axis=0)
        d2 = _sq_dists(points, centers)
        assign = np.argmin(d2, axis=1)
        wcss = float(np.sum(d2[np.arange(n), assign]))
        if best is None or wcss < best[2] - 1e-15:
            best = (centers.copy(), assign.copy(), wcss)
    return best


def _kmeans_pp_init(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(_sq_dists(points, np.array(centers)), axis=1)
        total = d2.sum()
        if total <= 0:
            # all points coincide with a chosen center: duplicate it and let
            # the covariance floor handle the degeneracy downstream
            centers.append(centers[0].copy())
            continue
        centers.append(points[rng.choice(n, p=d2 / total)])
    return np.array(centers, dtype=np.float64)


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.sum(diff * diff, axis=2)


def fit_em(batch, config: GmmConfig | None = None, seed: int = 0) -> GaussianMixture:
    """Fit a K=2 mixture by EM with k-means initialization.

    Stops when the NLL improves by less than ``config.tol`` or after
    ``config.max_iter`` iterations. Covariance diagonals are floored at
    ``config.cov_floor`` after every M-step. If a component collapses below
    one effective sample, EM restarts from a fresh k-means seed (up to
    ``config.em_restarts`` times) before raising DegenerateComponentError.
    """
    config = config or GmmConfig()
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    n, s = batch.shape
    k = config.n_components
    if n < 2 * k:
        raise TooFewSamplesError(f"{n} samples for {k} components")

    last_exc = None
    for attempt in range(config.em_restarts):
        try:
            return _fit_em_once(batch, config, seed + 1000 * attempt)
        except DegenerateComponentError as exc:
            last_exc = exc
    raise DegenerateComponentError(
        f"component degenerate after {config.em_restarts} restarts") from last_exc


def _fit_em_once(batch: np.ndarray, config: GmmConfig, seed: int) -> GaussianMixture:
    n, s = batch.shape
    k = config.n_components
    centers, assign, _ = kmeans(batch, k, config.kmeans_restarts,
                                config.kmeans_max_iter, seed)
    weights = np.bincount(assign, minlength=k).astype(np.float64)
    weights = np.clip(weights, 1.0, None)
    weights /= weights.sum()
    means = centers.copy()
    if config.full_covariance:
        covs = np.empty((k, s, s))
        for j in range(k):
            members = batch[assign == j]
            if len(members) < 2:
                covs[j] = np.eye(s)
            else:
                covs[j] = np.cov(members, rowvar=False, bias=True)
            covs[j][np.diag_indices(s)] = np.maximum(
                np.diag(covs[j]), config.cov_floor)
    else:
        covs = np.empty((k, s))
        for j in range(k):
            members = batch[assign == j]
            var = members.var(axis=0) if len(members) else np.ones(s)
            covs[j] = np.maximum(var, config.cov_floor)

    model = GaussianMixture(weights, means, covs, nll_trace=[])
    prev_nll = None
    for _ in range(config.max_iter):
        log_p = _component_log_probs(model, batch)
        lse = _logsumexp(log_p, axis=1)
        nll = float(-np.sum(lse))
        model.nll_trace.append(nll)
        if prev_nll is not None and abs(prev_nll - nll) < config.tol:
            break
        prev_nll = nll

        r = np.exp(log_p - lse[:, None])
        nk = r.sum(axis=0)
        if np.any(nk < 1.0):
            raise DegenerateComponentError(
                f"effective counts {nk} below 1")
        model.weights = nk / n
        model.means = (r.T @ batch) / nk[:, None]
        if config.full_covariance:
            for j in range(k):
                diff = batch - model.means[j]
                cov = (r[:, j, None] * diff).T @ diff / nk[j]
                cov[np.diag_indices(s)] = np.maximum(np.diag(cov),
                                                     config.cov_floor)
                model.covariances[j] = cov
        else:
            for j in range(k):
                diff = batch - model.means[j]
                var = (r[:, j] @ (diff * diff)) / nk[j]
                model.covariances[j] = np.maximum(var, config.cov_floor)

    diag = (model.covariances if not config.full_covariance
            else np.array([np.diag(c) for c in model.covariances]))
    collapsed = (np.allclose(model.means[0], model.means[1], atol=1e-9)
                 and np.all(diag <= config.cov_floor * (1 + 1e-9)))
    if collapsed:
        raise DegenerateComponentError(
            "both components collapsed onto a single point")
    return model
