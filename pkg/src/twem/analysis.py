"""Embedding-space analysis of a trained model.

Tokens are pushed through the learned per-token projection, ranked by the
sum of their projected components, reduced with PCA and clustered with
k-means; silhouette scores compare the projected space against a
clustering of the same tokens in the original embedding space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import nn
from .errors import AnalysisError


@dataclass
class ProjectedVocab:
    tokens: list[str]
    original: np.ndarray    # [V, D]
    projected: np.ndarray   # [V, D], post-ReLU


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray          # [out_dim, in_dim], orthonormal rows
    explained_variance_ratio: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components.T


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list[float] = field(default_factory=list)


@dataclass
class ClusterReport:
    k: int
    tokens: list[str]
    assignments: list[int]
    centroids: list[list[float]]
    inertia: float
    cluster_tokens: list[list[str]]
    silhouette_projected: float
    silhouette_original: float
    pca_cumulative_variance: float
    pca_dim: int

    @property
    def silhouette_ratio(self) -> float | None:
        if self.silhouette_original == 0:
            return None
        return self.silhouette_projected / self.silhouette_original

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n_tokens": len(self.tokens),
            "pca_dim": self.pca_dim,
            "pca_cumulative_variance": self.pca_cumulative_variance,
            "inertia": self.inertia,
            "silhouette_projected": self.silhouette_projected,
            "silhouette_original": self.silhouette_original,
            "silhouette_ratio": self.silhouette_ratio,
            "clusters": [{"cluster": c, "size": int(sum(a == c for a in self.assignments)),
                          "sample_tokens": toks}
                         for c, toks in enumerate(self.cluster_tokens)],
            "assignments": dict(zip(self.tokens, self.assignments)),
        }

    def markdown(self) -> str:
        lines = ["| Cluster | Size | Tokens |", "|---|---|---|"]
        for c, toks in enumerate(self.cluster_tokens):
            size = sum(a == c for a in self.assignments)
            lines.append(f"| {c} | {size} | {', '.join(toks)} |")
        ratio = self.silhouette_ratio
        lines += ["", f"Silhouette (projected space): {self.silhouette_projected:.4f}",
                  f"Silhouette (original space): {self.silhouette_original:.4f}",
                  f"Ratio: {ratio:.4f}" if ratio is not None else "Ratio: undefined",
                  f"PCA cumulative explained variance ({self.pca_dim} dims): "
                  f"{self.pca_cumulative_variance:.4f}"]
        return "\n".join(lines) + "\n"


def project_vocab(model, pretrained: dict | None = None) -> ProjectedVocab:
    """Project vocabulary tokens through the learned projection + ReLU.

    With ``pretrained`` the original (not fine-tuned) vectors are projected
    and tokens missing from it are dropped; otherwise the model's own
    embedding rows are used.
    """
    W = model.proj_W.value.astype(np.float64)
    b = model.proj_b.value.astype(np.float64)
    tokens, rows = [], []
    for i, tok in model.vocab.words():
        if pretrained is None:
            rows.append(model.embeddings.value[i])
        elif tok in pretrained:
            rows.append(pretrained[tok])
        else:
            continue
        tokens.append(tok)
    original = np.array(rows, dtype=np.float64).reshape(len(rows), model.dim)
    return ProjectedVocab(tokens, original, np.maximum(original @ W + b, 0.0))


def salience_rank(pv: ProjectedVocab, top_k: int) -> list[tuple[int, str, float]]:
    """(row, token, score) for the ``top_k`` largest component sums; ties by token."""
    if top_k > len(pv.tokens):
        raise AnalysisError(f"top_k={top_k} exceeds vocabulary of {len(pv.tokens)}")
    scores = pv.projected.sum(axis=1)
    order = sorted(range(len(pv.tokens)), key=lambda i: (-scores[i], pv.tokens[i]))
    return [(i, pv.tokens[i], float(scores[i])) for i in order[:top_k]]


def pca_fit(X: np.ndarray, out_dim: int) -> tuple[PcaModel, np.ndarray, float]:
    """PCA by symmetric eigendecomposition of the (unscaled) covariance."""
    X = np.asarray(X, dtype=np.float64)
    N, D = X.shape
    if not 1 <= out_dim < N:
        raise AnalysisError(f"need 1 <= out_dim < N, got out_dim={out_dim}, N={N}")
    if out_dim > D:
        raise AnalysisError(f"out_dim={out_dim} exceeds input dimension {D}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (N - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:out_dim]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T
    # sign convention: largest-magnitude loading positive
    flip = np.sign(comps[np.arange(out_dim), np.abs(comps).argmax(axis=1)])
    comps *= np.where(flip == 0, 1.0, flip)[:, None]
    total = np.clip(np.linalg.eigvalsh(cov), 0.0, None).sum()
    ratios = evals / total if total > 0 else np.zeros(out_dim)
    model = PcaModel(mean, comps, ratios)
    return model, Xc @ comps.T, float(ratios.sum())


def _sq_dists(X, C):
    return cdist(X, C, "sqeuclidean")


def _kmeans_pp(X, k, rng):
    N = len(X)
    chosen = [int(rng.integers(N))]
    d2 = _sq_dists(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(N, p=d2 / total))
        else:
            remaining = np.setdiff1d(np.arange(N), chosen)
            nxt = int(rng.choice(remaining))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(X, X[[nxt]])[:, 0])
    return X[chosen].copy()


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iter: int = 300,
           tol: float = 1e-6) -> KMeansResult:
    """Lloyd iterations from a seeded k-means++ start.

    Stops after ``max_iter`` rounds or when inertia changes by less than
    ``tol`` relative. An empty cluster is reseeded at the point farthest
    from its current centroid.
    """
    X = np.asarray(X, dtype=np.float64)
    N = len(X)
    if not 1 <= k <= N:
        raise AnalysisError(f"need 1 <= k <= N, got k={k}, N={N}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(X, k, rng)
    d2 = _sq_dists(X, centroids)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(N), assign].sum())
    history = [inertia]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        for c in range(k):
            members = assign == c
            if members.any():
                centroids[c] = X[members].mean(axis=0)
            else:
                far = int(d2[np.arange(N), assign].argmax())
                centroids[c] = X[far]
                assign[far] = c
        d2 = _sq_dists(X, centroids)
        assign = d2.argmin(axis=1)
        new_inertia = float(d2[np.arange(N), assign].sum())
        history.append(new_inertia)
        converged = abs(inertia - new_inertia) <= tol * max(inertia, 1e-300)
        inertia = new_inertia
        if converged:
            break
    return KMeansResult(assign, centroids, inertia, n_iter, history)


def silhouette_samples(X: np.ndarray, assignments) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(assignments)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise AnalysisError("silhouette needs at least two clusters")
    dist = cdist(X, X)
    s = np.zeros(len(X))
    members = {c: labels == c for c in uniq}
    sizes = {c: int(m.sum()) for c, m in members.items()}
    for i in range(len(X)):
        own = labels[i]
        if sizes[own] == 1:
            continue
        a = dist[i, members[own]].sum() / (sizes[own] - 1)
        b = min(dist[i, members[c]].mean() for c in uniq if c != own)
        denom = max(a, b)
        s[i] = (b - a) / denom if denom > 0 else 0.0
    return s


def silhouette(X: np.ndarray, assignments) -> float:
    """Mean silhouette coefficient, Euclidean; singleton-cluster points score 0."""
    return float(silhouette_samples(X, assignments).mean())


def cluster_report(model, top_k: int = 1000, pca_dim: int = 75, k: int = 5, seed: int = 0,
                   pretrained: dict | None = None, samples_per_cluster: int = 15) -> ClusterReport:
    pv = project_vocab(model, pretrained)
    n = min(top_k, len(pv.tokens))
    ranked = salience_rank(pv, n)
    rows = [r for r, _, _ in ranked]
    tokens = [t for _, t, _ in ranked]
    projected = pv.projected[rows]
    original = pv.original[rows]
    dim = max(1, min(pca_dim, n - 1, projected.shape[1]))
    _, reduced, cumulative = pca_fit(projected, dim)
    k_seed = nn.derive_seed(seed, "analysis.kmeans")
    proj_km = kmeans(reduced, k, seed=k_seed)
    orig_km = kmeans(original, k, seed=k_seed)
    sil_proj = silhouette(reduced, proj_km.assignments)
    sil_orig = silhouette(original, orig_km.assignments)
    # ranked order is salience order, so the first members are the most salient
    cluster_tokens = [[t for t, a in zip(tokens, proj_km.assignments) if a == c][:samples_per_cluster]
                      for c in range(k)]
    return ClusterReport(k, tokens, [int(a) for a in proj_km.assignments],
                         proj_km.centroids.tolist(), proj_km.inertia, cluster_tokens,
                         sil_proj, sil_orig, cumulative, dim)
