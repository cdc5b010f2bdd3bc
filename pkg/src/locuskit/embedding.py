"""Low-dimensional embeddings: LLE, asymmetric MDS (SVD/NMF), co-occurrence
SVD word vectors, and ternary contrast-kernel (TriMap-style) MDS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EigenFailure,
    EmptyCorpus,
    InvalidParameter,
    NegativeInputForNMF,
)
from .kernels import StochasticMatrix, as_point_set, normalize_rows

__all__ = [
    "EmbeddingResult",
    "WordVectors",
    "lle_weights",
    "lle_embed",
    "lle_objective",
    "amds_factorize",
    "cooccurrence_embed",
    "read_corpus",
    "trimap_embed",
]


@dataclass(frozen=True)
class EmbeddingResult:
    Z: np.ndarray
    objective: float
    method: str
    iterations: int = 0
    history: np.ndarray | None = None


@dataclass(frozen=True)
class WordVectors:
    vocabulary: list
    input_vectors: np.ndarray
    output_vectors: np.ndarray


def _fix_signs(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for j in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    return V


# ---------------------------------------------------------------------------
# LLE
# ---------------------------------------------------------------------------

def lle_weights(X, n_neighbors: int) -> StochasticMatrix:
    """Reconstruction weights: each row solves a sum-to-one least squares
    over its nearest neighbors.

    The local Gram gets a 1e-9 * trace ridge when singular; negative
    solution weights are clipped to zero and the row renormalized, honoring
    the stochastic-matrix reading.  Off-neighborhood entries and the
    diagonal are exactly zero.
    """
    X = as_point_set(X)
    n = X.shape[0]
    n_neighbors = int(n_neighbors)
    if not 1 <= n_neighbors < n:
        raise InvalidParameter(f"neighbor count must be in [1, {n - 1}]")
    W = np.zeros((n, n))
    for i in range(n):
        d2 = ((X - X[i]) ** 2).sum(1)
        d2[i] = np.inf
        nbr = np.lexsort((np.arange(n), d2))[:n_neighbors]
        Z = X[nbr] - X[i]
        C = Z @ Z.T
        ones = np.ones(n_neighbors)
        try:
            w = np.linalg.solve(C, ones)
            if not np.isfinite(w).all():
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            ridge = 1e-9 * np.trace(C)
            if ridge <= 0:
                ridge = 1e-9
            w = np.linalg.solve(C + ridge * np.eye(n_neighbors), ones)
        total = w.sum()
        if total == 0:
            w = ones / n_neighbors
        else:
            w = w / total
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        W[i, nbr] = w
    return normalize_rows(W)


def lle_objective(Kt, Z) -> float:
    """Reconstruction objective ``||Z - K_tilde Z||_F^2``."""
    vals = Kt.values if isinstance(Kt, StochasticMatrix) else np.asarray(Kt, float)
    Z = np.asarray(Z, dtype=float)
    return float(((Z - vals @ Z) ** 2).sum())


def lle_embed(Kt: StochasticMatrix, r: int) -> EmbeddingResult:
    """Embed by the small eigenvectors of ``(I - K_tilde)^T (I - K_tilde)``.

    The smallest eigenvector (the constant direction of a stochastic matrix)
    is discarded; the next r are scaled to column norm sqrt(N), so
    Z^T Z / N = I.  The stored objective is the sum of the kept eigenvalues.
    """
    vals = Kt.values if isinstance(Kt, StochasticMatrix) else np.asarray(Kt, float)
    n = vals.shape[0]
    if vals.shape[0] != vals.shape[1]:
        raise InvalidParameter("lle_embed needs a square stochastic matrix")
    r = int(r)
    if not 1 <= r < n - 1:
        raise InvalidParameter(f"embedding dimension must be in [1, {n - 2}]")
    L = np.eye(n) - vals
    M = L.T @ L
    try:
        eigvals, eigvecs = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure("eigendecomposition failed") from exc
    keep = slice(1, r + 1)
    Z = _fix_signs(eigvecs[:, keep]) * np.sqrt(n)
    return EmbeddingResult(Z=Z, objective=float(eigvals[keep].sum()), method="lle")


# ---------------------------------------------------------------------------
# asymmetric MDS
# ---------------------------------------------------------------------------

def amds_factorize(K, q: int, method: str = "svd", iters: int = 200, rng_seed: int = 0):
    """Factor a kernel matrix as Phi Psi^T in q dimensions.

    svd: the best rank-q Frobenius approximation, Phi = U_q S_q^(1/2),
    Psi = V_q S_q^(1/2).  nmf: multiplicative updates from a seeded positive
    start; the strain ||K - Phi Psi^T||_F^2 is non-increasing sweep to
    sweep.  Returns ``(Phi, Psi, strain, history)``.
    """
    K = K.values if hasattr(K, "values") else np.asarray(K, dtype=float)
    if K.ndim != 2:
        raise InvalidParameter("kernel matrix must be 2-D")
    q = int(q)
    if not 1 <= q <= min(K.shape):
        raise InvalidParameter(f"q must be in [1, {min(K.shape)}]")
    if method == "svd":
        U, S, Vt = np.linalg.svd(K, full_matrices=False)
        root = np.sqrt(S[:q])
        U_q = _fix_signs(U[:, :q])
        # mirror the sign fixes onto V so the product is unchanged
        signs = np.sign((U_q * U[:, :q]).sum(0))
        Phi = U_q * root
        Psi = (Vt[:q].T * signs) * root
        strain = float(((K - Phi @ Psi.T) ** 2).sum())
        return Phi, Psi, strain, np.array([strain])
    if method == "nmf":
        if (K < 0).any():
            raise NegativeInputForNMF("nmf needs a non-negative matrix")
        rng = np.random.default_rng(rng_seed)
        n, m = K.shape
        scale = np.sqrt(K.mean() / q) if K.mean() > 0 else 1.0
        Phi = rng.uniform(0.5, 1.5, size=(n, q)) * scale
        Psi = rng.uniform(0.5, 1.5, size=(m, q)) * scale
        eps = 1e-12
        history = []
        for _ in range(int(iters)):
            Phi *= (K @ Psi) / np.maximum(Phi @ (Psi.T @ Psi), eps)
            Psi *= (K.T @ Phi) / np.maximum(Psi @ (Phi.T @ Phi), eps)
            history.append(float(((K - Phi @ Psi.T) ** 2).sum()))
        strain = history[-1] if history else float(((K - Phi @ Psi.T) ** 2).sum())
        return Phi, Psi, strain, np.asarray(history)
    raise InvalidParameter(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# co-occurrence word vectors
# ---------------------------------------------------------------------------

def cooccurrence_embed(windows, d: int) -> WordVectors:
    """SVD word vectors from log-damped window co-occurrence counts.

    Counts every ordered pair of distinct positions inside each window,
    applies log(1 + count), and takes the rank-d SVD; input vectors are
    U_d S_d^(1/2), output vectors V_d S_d^(1/2).
    """
    windows = [list(w) for w in windows]
    vocab = []
    index = {}
    for w in windows:
        for tok in w:
            if tok not in index:
                index[tok] = len(vocab)
                vocab.append(tok)
    if not vocab:
        raise EmptyCorpus("no tokens in any window")
    d = int(d)
    if not 1 <= d < len(vocab):
        raise InvalidParameter(f"dimension must be in [1, {len(vocab) - 1}]")
    C = np.zeros((len(vocab), len(vocab)))
    for w in windows:
        ids = [index[t] for t in w]
        for a in range(len(ids)):
            for b in range(len(ids)):
                if a != b:
                    C[ids[a], ids[b]] += 1.0
    damped = np.log1p(C)
    # the counting is symmetric, so take the SVD through the symmetric
    # eigendecomposition: deterministic on the degenerate +/-lambda pairs a
    # tiny corpus produces, where a generic SVD routine may return factors
    # with zero rows
    eigvals, eigvecs = np.linalg.eigh(damped)
    order = np.argsort(-np.abs(eigvals), kind="stable")[:d]
    lam = eigvals[order]
    U = _fix_signs(eigvecs[:, order])
    root = np.sqrt(np.abs(lam))
    return WordVectors(
        vocabulary=vocab,
        input_vectors=U * root,
        output_vectors=U * (np.sign(lam) * root),
    )


def read_corpus(path, window: int):
    """Whitespace-tokenized, lowercased sliding windows from a text file."""
    window = int(window)
    if window < 2:
        raise InvalidParameter("window length must be at least 2")
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().lower().split()
    if not tokens:
        raise EmptyCorpus(f"no tokens in {path}")
    if len(tokens) <= window:
        return [tokens]
    return [tokens[i : i + window] for i in range(len(tokens) - window + 1)]


# ---------------------------------------------------------------------------
# ternary contrast-kernel MDS
# ---------------------------------------------------------------------------

def _contrast_h(kind: str):
    if kind == "identity":
        return lambda u: u, lambda u: np.ones_like(u)
    if kind == "log1p":
        # increasing extension of log1p to the whole line; the raw form is
        # undefined below -1 and the argument d12^2 - d13^2 is signed
        def h(u):
            return np.sign(u) * np.log1p(np.abs(u))

        def hp(u):
            return 1.0 / (1.0 + np.abs(u))

        return h, hp
    raise InvalidParameter(f"unknown contrast transform {kind!r}")


def _all_triplets(n):
    trips = []
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            for k in range(n):
                if k != i and k != j:
                    trips.append((i, j, k))
    return np.asarray(trips, dtype=int)


def _sampled_triplets(S, n_neighbors, n_contrast, rng):
    n = S.shape[0]
    trips = []
    for i in range(n):
        sims = S[i].copy()
        sims[i] = -np.inf
        nbrs = np.argsort(-sims, kind="stable")[: min(n_neighbors, n - 1)]
        for j in nbrs:
            pool = np.setdiff1d(np.arange(n), [i, j])
            if pool.size == 0:
                continue
            ks = rng.choice(pool, size=min(n_contrast, pool.size), replace=False)
            for k in ks:
                trips.append((i, int(j), int(k)))
    return np.asarray(trips, dtype=int)


def trimap_embed(
    X,
    similarity,
    q: int,
    h: str = "identity",
    steps: int = 200,
    lr: float = 0.1,
    rng_seed: int = 0,
    n_neighbors: int = 10,
    n_contrast: int = 10,
    full_triplets: bool = False,
    init=None,
) -> EmbeddingResult:
    """Gradient descent on the contrast-kernel ternary MDS objective.

    The contrast kernel ``s12 / (s12 + s13)`` scores how much closer x2 is
    to x1 than x3 is; the loss sums K * h(d12^2 - d13^2) over triplets.
    Triplets are either fully enumerated or sampled per anchor (nearest
    ``n_neighbors`` by similarity, ``n_contrast`` uniform contrasts).
    """
    X = as_point_set(X)
    n = X.shape[0]
    if n < 3:
        raise InvalidParameter("need at least three points")
    q = int(q)
    if q < 1:
        raise InvalidParameter("embedding dimension must be >= 1")
    if int(steps) < 1:
        raise InvalidParameter("steps must be >= 1")
    hf, hpf = _contrast_h(h)
    rng = np.random.default_rng(rng_seed)

    S = np.array([[similarity(a, b) for b in X] for a in X], dtype=float)
    if (S < 0).any():
        raise InvalidParameter("similarities must be non-negative")
    trips = _all_triplets(n) if full_triplets else _sampled_triplets(S, n_neighbors, n_contrast, rng)
    i1, i2, i3 = trips.T
    denom = S[i1, i2] + S[i1, i3]
    keep = denom > 0
    i1, i2, i3, denom = i1[keep], i2[keep], i3[keep], denom[keep]
    K = S[i1, i2] / denom

    if init is None:
        Z = 0.1 * rng.standard_normal((n, q))
    else:
        Z = np.asarray(init, dtype=float).copy()
        if Z.shape != (n, q):
            raise InvalidParameter(f"init must have shape ({n}, {q})")
    history = np.empty(int(steps) + 1)

    def loss_and_grad(Z):
        d12 = Z[i1] - Z[i2]
        d13 = Z[i1] - Z[i3]
        u = (d12**2).sum(1) - (d13**2).sum(1)
        loss = float((K * hf(u)).sum())
        coef = (K * hpf(u))[:, None]
        g = np.zeros_like(Z)
        np.add.at(g, i1, coef * 2.0 * (d12 - d13))
        np.add.at(g, i2, -coef * 2.0 * d12)
        np.add.at(g, i3, coef * 2.0 * d13)
        return loss, g

    history[0], g = loss_and_grad(Z)
    for t in range(1, int(steps) + 1):
        Z = Z - lr * g
        history[t], g = loss_and_grad(Z)
    return EmbeddingResult(
        Z=Z, objective=float(history[-1]), method="trimap", iterations=int(steps), history=history
    )
