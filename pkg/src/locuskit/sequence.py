"""Temporal kernels and local means, attention layers, the stacked
attention+MLP encoder, hierarchical local means, non-local means denoising,
and autoregressive completion.

A sequence is a (T, p) token matrix with strictly increasing times.  The
temporal kernel composes a static token kernel with a position encoding;
attention is exactly the row-normalized gram of an exp-dot feature kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParameter, ShapeMismatch
from .kernels import Kernel, KernelMatrix, as_point_set, gram, normalize_rows

__all__ = [
    "Sequence",
    "PositionEncoding",
    "sinusoidal_encoding",
    "temporal_gram",
    "temporal_local_mean",
    "attention_layer",
    "MlpParams",
    "TransformerLayer",
    "transformer_encode",
    "local_local_mean",
    "nlm_denoise",
    "nlm_denoise_image",
    "gaussian_moving_average",
    "TemporalMeanModel",
    "TransformerModel",
    "autoregressive_complete",
]


@dataclass(frozen=True)
class Sequence:
    tokens: np.ndarray
    times: np.ndarray = None

    def __post_init__(self):
        tokens = as_point_set(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        times = self.times
        if times is None:
            times = np.arange(tokens.shape[0], dtype=float)
        else:
            times = np.asarray(times, dtype=float)
            if times.shape != (tokens.shape[0],):
                raise DimensionMismatch("times must be one per token")
            if (np.diff(times) <= 0).any():
                raise InvalidParameter("times must be strictly increasing")
        object.__setattr__(self, "times", times)

    @property
    def length(self):
        return self.tokens.shape[0]

    @property
    def width(self):
        return self.tokens.shape[1]


@dataclass(frozen=True)
class PositionEncoding:
    """kind in {none, window, sinusoidal-additive, relative-factor}.

    window needs ``delta > 0`` (zeroes |t-s| >= delta); relative-factor
    carries a callable ``factor(t - s) -> weight``; sinusoidal-additive adds
    the classic 10000-base wave to tokens before the static kernel sees
    them.
    """

    kind: str = "none"
    delta: float = None
    factor: object = None

    def __post_init__(self):
        if self.kind not in ("none", "window", "sinusoidal-additive", "relative-factor"):
            raise InvalidParameter(f"unknown position encoding {self.kind!r}")
        if self.kind == "window" and not (self.delta is not None and self.delta > 0):
            raise InvalidParameter("window encoding needs delta > 0")
        if self.kind == "relative-factor" and not callable(self.factor):
            raise InvalidParameter("relative-factor encoding needs a callable")


def sinusoidal_encoding(times, width: int) -> np.ndarray:
    """Classic additive position wave: pairs of sin/cos at geometric
    wavelengths with base 10000."""
    times = np.asarray(times, dtype=float)
    enc = np.zeros((times.shape[0], width))
    for j in range(width):
        rate = 10000.0 ** (-(2 * (j // 2)) / width)
        angle = times * rate
        enc[:, j] = np.sin(angle) if j % 2 == 0 else np.cos(angle)
    return enc


def temporal_gram(
    static_kernel: Kernel,
    pe: PositionEncoding,
    seq: Sequence,
    causal: bool = False,
) -> KernelMatrix:
    """T x T kernel matrix combining token similarity and position encoding.

    causal=True zeroes every entry with s > t.
    """
    tokens = seq.tokens
    if pe.kind == "sinusoidal-additive":
        tokens = tokens + sinusoidal_encoding(seq.times, seq.width)
    base = gram(static_kernel, tokens, tokens, rows_id="seq", cols_id="seq")
    values = base.values.copy()
    tdiff = seq.times[:, None] - seq.times[None, :]
    if pe.kind == "window":
        values[np.abs(tdiff) >= pe.delta] = 0.0
    elif pe.kind == "relative-factor":
        values = values * np.vectorize(pe.factor)(tdiff)
    if causal:
        values[tdiff < 0] = 0.0  # s > t means t - s < 0
    return KernelMatrix(
        values=values,
        kernel_id=f"temporal({base.kernel_id}, pe={pe.kind}, causal={causal})",
        rows_id="seq",
        cols_id="seq",
        desmoothing=base.desmoothing,
    )


def temporal_local_mean(seq: Sequence, gram_matrix) -> Sequence:
    """Sequence smoothed by the normalized temporal gram, ``X_hat = K_tilde X``.

    Rows with zero degree (a causal+hollow first row, say) pass through
    unchanged.
    """
    vals = gram_matrix.values if hasattr(gram_matrix, "values") else np.asarray(gram_matrix, float)
    if vals.shape != (seq.length, seq.length):
        raise DimensionMismatch("gram must be T x T for the sequence")
    S = normalize_rows(vals)
    out = S.values @ seq.tokens
    if S.empty_rows.size:
        out[S.empty_rows] = seq.tokens[S.empty_rows]
    return Sequence(tokens=out, times=seq.times.copy())


def attention_layer(V, phi, psi, causal: bool = False) -> np.ndarray:
    """Scaled-dot softmax attention ``softmax(phi psi^T / sqrt(d) + mask) V``."""
    V = np.asarray(V, dtype=float)
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi.shape != psi.shape or phi.shape[0] != V.shape[0]:
        raise ShapeMismatch("phi, psi must be (T, d) and V (T, q)")
    S = phi @ psi.T / math.sqrt(phi.shape[1])
    if causal:
        T = S.shape[0]
        S = np.where(np.arange(T)[None, :] > np.arange(T)[:, None], -np.inf, S)
    S = S - S.max(axis=1, keepdims=True)
    E = np.exp(S)
    A = E / E.sum(axis=1, keepdims=True)
    return A @ V


@dataclass(frozen=True)
class MlpParams:
    """Two-layer pointwise map ``relu(x W1 + b1) W2 + b2``."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def apply(self, X):
        hidden = np.maximum(np.asarray(X) @ self.w1 + self.b1, 0.0)
        return hidden @ self.w2 + self.b2

    @classmethod
    def random(cls, p, hidden, rng, scale=0.5):
        return cls(
            w1=scale * rng.standard_normal((p, hidden)),
            b1=scale * rng.standard_normal(hidden),
            w2=scale * rng.standard_normal((hidden, p)),
            b2=scale * rng.standard_normal(p),
        )


@dataclass(frozen=True)
class TransformerLayer:
    """One attention + pointwise-MLP block.

    The attention slot is either query/key projection matrices ``(wq, wk)``
    applied to the current tokens (softmax attention over the tokens
    themselves) or a static :class:`Kernel` whose normalized gram plays the
    same role.  ``mlp=None`` is the identity map.
    """

    wq: np.ndarray = None
    wk: np.ndarray = None
    kernel: Kernel = None
    mlp: MlpParams = None

    def __post_init__(self):
        has_proj = self.wq is not None and self.wk is not None
        if has_proj == (self.kernel is not None):
            raise InvalidParameter("give either (wq, wk) projections or a kernel")

    def mix(self, X, causal: bool) -> np.ndarray:
        if self.kernel is not None:
            vals = gram(self.kernel, X, X).values.copy()
            if causal:
                T = vals.shape[0]
                vals[np.arange(T)[None, :] > np.arange(T)[:, None]] = 0.0
            S = normalize_rows(vals)
            out = S.values @ X
            if S.empty_rows.size:
                out[S.empty_rows] = X[S.empty_rows]
            return out
        return attention_layer(X, X @ self.wq, X @ self.wk, causal=causal)


def transformer_encode(
    seq: Sequence,
    layers,
    causal: bool = False,
    residual: bool = False,
) -> Sequence:
    """Stacked encoder: alternate the attention local mean and the pointwise
    MLP, layer by layer.

    Plain composition, no normalization; ``residual=True`` opts into
    ``x + block(x)`` around each sublayer for experimentation and is
    excluded from the fidelity tests.
    """
    X = seq.tokens.copy()
    for layer in layers:
        mixed = layer.mix(X, causal)
        X = X + mixed if residual else mixed
        if layer.mlp is not None:
            fed = layer.mlp.apply(X)
            X = X + fed if residual else fed
    return Sequence(tokens=X, times=seq.times.copy())


def local_local_mean(X, k1: Kernel, k2: Kernel, nonlinearity: str = "identity") -> np.ndarray:
    """Two-stage hierarchical local mean ``K2_tilde(f(K1_tilde X)) f(K1_tilde X)``.

    The second kernel is evaluated on the transformed points, so with a
    nonlinearity the composition is not a single kernel; with f = identity
    it collapses to the product-kernel local mean K2_tilde K1_tilde X.
    """
    funcs = {
        "identity": lambda v: v,
        "relu": lambda v: np.maximum(v, 0.0),
        "tanh": np.tanh,
    }
    if nonlinearity not in funcs:
        raise InvalidParameter(f"unknown nonlinearity {nonlinearity!r}")
    X = as_point_set(X)
    S1 = normalize_rows(gram(k1, X, X))
    if S1.empty_rows.size:
        raise InvalidParameter(f"first-stage rows {S1.empty_rows.tolist()} are empty")
    Xp = funcs[nonlinearity](S1.values @ X)
    S2 = normalize_rows(gram(k2, Xp, Xp))
    if S2.empty_rows.size:
        raise InvalidParameter(f"second-stage rows {S2.empty_rows.tolist()} are empty")
    return S2.values @ Xp


# ---------------------------------------------------------------------------
# non-local means
# ---------------------------------------------------------------------------

def _patches(values: np.ndarray, radius: int) -> np.ndarray:
    T, p = values.shape
    padded = np.concatenate(
        [np.zeros((radius, p)), values, np.zeros((radius, p))], axis=0
    )
    return np.stack([padded[i : i + 2 * radius + 1].ravel() for i in range(T)])


def nlm_denoise(seq: Sequence, patch_radius: int, h: float, search_radius: int) -> Sequence:
    """Non-local means: average over the search window, weighted by patch
    similarity.

    ``w_ts = exp(-||patch(t) - patch(s)||^2 / (2 h^2 P))`` with P the patch
    entry count (so h is scale-comparable across radii); patches are
    zero-padded at the boundaries.  patch_radius = 0 degenerates to a plain
    Gaussian-on-values local mean over the window.
    """
    patch_radius = int(patch_radius)
    search_radius = int(search_radius)
    if patch_radius < 0 or search_radius < patch_radius:
        raise InvalidParameter("need 0 <= patch_radius <= search_radius")
    if not h > 0:
        raise InvalidParameter("bandwidth must be positive")
    P = _patches(seq.tokens, patch_radius)
    psize = P.shape[1]
    T = seq.length
    out = np.empty_like(seq.tokens)
    for t in range(T):
        lo = max(0, t - search_radius)
        hi = min(T, t + search_radius + 1)
        d2 = ((P[lo:hi] - P[t]) ** 2).sum(axis=1) / psize
        w = np.exp(-d2 / (2.0 * h * h))
        out[t] = (w @ seq.tokens[lo:hi]) / w.sum()
    return Sequence(tokens=out, times=seq.times.copy())


def nlm_denoise_image(image: np.ndarray, patch_radius: int, h: float, search_radius: int):
    """2-D non-local means with square patches and search windows.

    Rows are independent, so the LOCUSKIT_THREADS cap is honored with a row
    pool; results are written by index and identical at any thread count.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise InvalidParameter("image must be 2-D")
    r, s = int(patch_radius), int(search_radius)
    if r < 0 or s < r:
        raise InvalidParameter("need 0 <= patch_radius <= search_radius")
    H, W = img.shape
    padded = np.pad(img, r)
    psize = (2 * r + 1) ** 2
    patches = np.empty((H, W, psize))
    for i in range(H):
        for j in range(W):
            patches[i, j] = padded[i : i + 2 * r + 1, j : j + 2 * r + 1].ravel()
    out = np.empty_like(img)

    def fill_row(i):
        ilo, ihi = max(0, i - s), min(H, i + s + 1)
        for j in range(W):
            jlo, jhi = max(0, j - s), min(W, j + s + 1)
            block = patches[ilo:ihi, jlo:jhi].reshape(-1, psize)
            d2 = ((block - patches[i, j]) ** 2).sum(axis=1) / psize
            w = np.exp(-d2 / (2.0 * h * h))
            out[i, j] = w @ img[ilo:ihi, jlo:jhi].ravel() / w.sum()

    from .runtime import max_threads

    workers = min(max_threads(), H)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill_row, range(H)))
    else:
        for i in range(H):
            fill_row(i)
    return out


def gaussian_moving_average(seq: Sequence, search_radius: int, bandwidth: float = None) -> Sequence:
    """Position-weighted moving average over the same window NLM uses.

    The comparison baseline: weights depend only on |t - s| (Gaussian with
    ``bandwidth``, default search_radius / 2), never on values.
    """
    search_radius = int(search_radius)
    if search_radius < 0:
        raise InvalidParameter("search radius must be >= 0")
    bw = search_radius / 2.0 if bandwidth is None else float(bandwidth)
    if bw <= 0:
        raise InvalidParameter("bandwidth must be positive")
    T = seq.length
    out = np.empty_like(seq.tokens)
    for t in range(T):
        lo = max(0, t - search_radius)
        hi = min(T, t + search_radius + 1)
        idx = np.arange(lo, hi)
        w = np.exp(-((idx - t) ** 2) / (2.0 * bw * bw))
        out[t] = (w @ seq.tokens[lo:hi]) / w.sum()
    return Sequence(tokens=out, times=seq.times.copy())


# ---------------------------------------------------------------------------
# autoregressive completion
# ---------------------------------------------------------------------------

class TemporalMeanModel:
    """Causal temporal-local-mean predictor for completion.

    The next token is the temporal local mean evaluated at the new position
    with the existing tokens as keys; content-dependent static kernels use
    the last observed token as the query's content.
    """

    def __init__(self, static_kernel: Kernel, pe: PositionEncoding = PositionEncoding("none")):
        self.static_kernel = static_kernel
        self.pe = pe

    def next_token(self, seq: Sequence) -> np.ndarray:
        t_new = seq.times[-1] + (seq.times[-1] - seq.times[-2] if seq.length > 1 else 1.0)
        query_content = seq.tokens[-1]
        tokens = seq.tokens
        if self.pe.kind == "sinusoidal-additive":
            enc = sinusoidal_encoding(np.concatenate([seq.times, [t_new]]), seq.width)
            tokens = tokens + enc[:-1]
            query_content = query_content + enc[-1]
        w = self.static_kernel.gram_values(query_content[None, :], tokens)[0]
        tdiff = t_new - seq.times
        if self.pe.kind == "window":
            w = np.where(np.abs(tdiff) < self.pe.delta, w, 0.0)
        elif self.pe.kind == "relative-factor":
            w = w * np.array([self.pe.factor(dv) for dv in tdiff])
        total = w.sum()
        if total <= 0:
            return seq.tokens[-1].copy()
        return (w @ seq.tokens) / total


class TransformerModel:
    """Causal encoder whose last output row is the next-token prediction."""

    def __init__(self, layers):
        self.layers = list(layers)

    def next_token(self, seq: Sequence) -> np.ndarray:
        out = transformer_encode(seq, self.layers, causal=True)
        return out.tokens[-1].copy()


def autoregressive_complete(seq: Sequence, model, steps: int) -> Sequence:
    """Extend a sequence one predicted token at a time.

    Each step evaluates the causal model at the next position and appends
    the result, feeding it back for the following step.
    """
    steps = int(steps)
    if steps < 1:
        raise InvalidParameter("need at least one completion step")
    tokens = seq.tokens
    times = seq.times
    dt = times[-1] - times[-2] if len(times) > 1 else 1.0
    cur = Sequence(tokens=tokens.copy(), times=times.copy())
    for _ in range(steps):
        nxt = np.asarray(model.next_token(cur), dtype=float)
        tokens = np.vstack([cur.tokens, nxt[None, :]])
        times = np.concatenate([cur.times, [cur.times[-1] + dt]])
        cur = Sequence(tokens=tokens, times=times)
    return cur
