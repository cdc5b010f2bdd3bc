"""Kernel learning: bandwidth tuning by leave-one-out, multi-kernel weight
fitting on the simplex, discrete query-key-value training (linear and
softmax forms), multi-head reconstruction, and finite-difference gradient
checking.

The QKV optimizers are plain batch gradient descent with hand-derived
gradients: no autograd, fixed learning rate, seed-fixed uniform(-0.1, 0.1)
initialization, fully reproducible runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllEmptyNeighborhoods,
    EmptyNeighborhood,
    InvalidParameter,
    NonFiniteLoss,
    ShapeMismatch,
)
from .estimators import Dataset, local_linear_predict, loo_error
from .kernels import gaussian, gram, normalize_rows

__all__ = [
    "TuneResult",
    "MultiKernelFit",
    "QkvHead",
    "QkvParams",
    "tune_bandwidth",
    "fit_multikernel",
    "fit_qkv",
    "qkv_objective",
    "multihead_reconstruct",
    "finite_diff_gradcheck",
    "softplus",
]


# ---------------------------------------------------------------------------
# bandwidth tuning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TuneResult:
    h_star: float
    loss_star: float
    curve: list  # (h, loss) pairs in evaluation order


def _loo_local_linear(h, data: Dataset) -> float:
    total = 0.0
    for i in range(data.n):
        rest = Dataset(np.delete(data.X, i, axis=0), np.delete(data.y, i, axis=0))
        pred, _, _ = local_linear_predict(gaussian(h), rest, data.X[i], lam=0.0)
        total += float((data.y[i] - pred) ** 2)
    return total


def _loo_kde_nll(h, data: Dataset) -> float:
    # negative leave-one-out log likelihood of the Gaussian KDE
    X = data.X
    n, p = X.shape
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    W = np.exp(-d2 / (2.0 * h * h))
    np.fill_diagonal(W, 0.0)
    c = (2.0 * math.pi * h * h) ** (-p / 2.0)
    dens = c * W.sum(1) / (n - 1)
    if (dens <= 0).any():
        raise EmptyNeighborhood("leave-one-out density underflowed to zero")
    return float(-np.log(dens).sum())


_PREDICTOR_LOSSES = {
    "local-mean": lambda h, data: loo_error(gaussian(h), data),
    "local-linear": _loo_local_linear,
    "kde-loo": _loo_kde_nll,
}


def tune_bandwidth(predictor: str, data: Dataset, grid=None, bracket=None) -> TuneResult:
    """Pick the Gaussian bandwidth minimizing the leave-one-out loss.

    Scores every ``grid`` member (ties to the smaller h; bandwidths whose
    neighborhoods all empty score +inf and are skipped), or runs
    golden-section search on ``bracket=(lo, hi)`` to relative tolerance
    1e-3.  The full loss curve is returned for plotting.
    """
    if predictor not in _PREDICTOR_LOSSES:
        raise InvalidParameter(f"unknown predictor {predictor!r}")
    loss_of = _PREDICTOR_LOSSES[predictor]

    def safe_loss(h):
        try:
            v = loss_of(float(h), data)
        except EmptyNeighborhood:
            return math.inf
        return v if math.isfinite(v) else math.inf

    curve = []
    if grid is not None:
        hs = [float(h) for h in grid]
        if not hs or any(h <= 0 for h in hs):
            raise InvalidParameter("grid must contain positive bandwidths")
        for h in hs:
            curve.append((h, safe_loss(h)))
        finite = [(loss, h) for h, loss in curve if math.isfinite(loss)]
        if not finite:
            raise AllEmptyNeighborhoods("every grid bandwidth produced empty neighborhoods")
        best = min(loss for loss, _ in finite)
        # losses within rounding noise of the minimum count as ties,
        # resolved to the smallest bandwidth
        atol = 1e-12 * max(1.0, abs(best))
        h_star = min(h for loss, h in finite if loss <= best + atol)
        loss_star = next(loss for loss, h in finite if h == h_star)
        return TuneResult(h_star=h_star, loss_star=loss_star, curve=curve)

    if bracket is None:
        raise InvalidParameter("pass a grid or a bracket")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise InvalidParameter("bracket must satisfy 0 < lo < hi")
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = safe_loss(c), safe_loss(d)
    curve.extend([(c, fc), (d, fd)])
    while (b - a) > 1e-3 * max(abs(a), abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = safe_loss(c)
            curve.append((c, fc))
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = safe_loss(d)
            curve.append((d, fd))
    h_star, loss_star = min(curve, key=lambda t: (t[1], t[0]))
    if not math.isfinite(loss_star):
        raise AllEmptyNeighborhoods("bracket search found no usable bandwidth")
    return TuneResult(h_star=h_star, loss_star=loss_star, curve=curve)


# ---------------------------------------------------------------------------
# multi-kernel weights
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiKernelFit:
    weights: np.ndarray
    objective: float
    kkt_residual: float
    loo_value: float


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.flatnonzero(u + (1.0 - css) / (np.arange(len(v)) + 1) > 0)[-1]
    theta = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + theta, 0.0)


def fit_multikernel(kernels, data: Dataset, n_iter: int = 500) -> MultiKernelFit:
    """Fit simplex weights minimizing ``||sum_m w_m L_m y||^2``.

    ``L_m`` is the normalized Laplacian residual of kernel m, so each
    column of the residual matrix is (I - K_tilde_m) y; the quadratic
    program runs projected gradient descent with a Lipschitz step from the
    residual Gram's largest eigenvalue.  The result reports the KKT
    residual at the solution and the exact leave-one-out objective of the
    combined kernel.
    """
    kernels = list(kernels)
    if len(kernels) < 2:
        raise InvalidParameter("need at least two kernels")
    data.require("real")
    Y = np.atleast_2d(data.y.T).T
    cols = []
    for k in kernels:
        S = normalize_rows(gram(k, data.X, data.X))
        cols.append((Y - S.values @ Y).ravel())
    R = np.stack(cols, axis=1)  # (N*r, M)
    G = R.T @ R
    lip = 2.0 * float(np.linalg.eigvalsh(G)[-1])
    step = 1.0 / lip if lip > 0 else 1.0
    w = np.full(len(kernels), 1.0 / len(kernels))
    for _ in range(int(n_iter)):
        grad = 2.0 * G @ w
        w = _project_simplex(w - step * grad)
    grad = 2.0 * G @ w
    support = w > 1e-12
    mu = float(grad[support].min()) if support.any() else float(grad.min())
    kkt = max(
        float(np.abs(grad[support] - mu).max()) if support.any() else 0.0,
        float(np.maximum(mu - grad[~support], 0.0).max()) if (~support).any() else 0.0,
    )
    objective = float(w @ G @ w)

    from .kernels import MultiKernel

    combined = MultiKernel(w, kernels)
    try:
        loo = loo_error(combined, data)
    except EmptyNeighborhood:
        loo = math.inf
    return MultiKernelFit(weights=w, objective=objective, kkt_residual=kkt, loo_value=loo)


# ---------------------------------------------------------------------------
# QKV representations
# ---------------------------------------------------------------------------

def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class QkvHead:
    phi: np.ndarray
    psi: np.ndarray
    v: np.ndarray
    w: np.ndarray | None = None


@dataclass(frozen=True)
class QkvParams:
    """Query/key/value parameter blocks, one per head."""

    heads: tuple
    form: str = "softmax"

    def __post_init__(self):
        if not self.heads:
            raise InvalidParameter("need at least one head")
        if self.form not in ("softmax", "linear"):
            raise InvalidParameter(f"unknown form {self.form!r}")

    @property
    def n_heads(self):
        return len(self.heads)

    @property
    def phi(self):
        return self.heads[0].phi

    @property
    def psi(self):
        return self.heads[0].psi

    @property
    def v(self):
        return self.heads[0].v

    @property
    def w(self):
        return self.heads[0].w


def _attention_matrix(form, phi, psi, mask_diagonal):
    """Row-stochastic attention (softmax) or normalized positive weights (linear)."""
    d = phi.shape[1]
    if form == "softmax":
        S = phi @ psi.T / math.sqrt(d)
        if mask_diagonal:
            np.fill_diagonal(S, -np.inf)
        S = S - S.max(axis=1, keepdims=True)
        E = np.exp(S)
        A = E / E.sum(axis=1, keepdims=True)
        return A
    B = softplus(phi) @ softplus(psi).T
    if mask_diagonal:
        np.fill_diagonal(B, 0.0)
    return B / B.sum(axis=1, keepdims=True)


def qkv_reconstruct(params: QkvParams, mask_diagonal: bool = False) -> np.ndarray:
    """Forward reconstruction V_hat (single head) at inference (no masking
    unless asked)."""
    h = params.heads[0]
    A = _attention_matrix(params.form, h.phi, h.psi, mask_diagonal)
    return A @ h.v


def qkv_objective(
    form: str,
    V: np.ndarray = None,
    mask_diagonal: bool = True,
    learn_v: bool = False,
    decode_target=None,
):
    """Value-and-gradient closure for the (auto-encoding) reconstruction loss.

    Without a decoder the loss is ``||V - A V||_F^2`` over ``(phi, psi)``
    (plus ``v`` when ``learn_v``); with ``decode_target=X`` the parameters
    gain a decoder matrix and the loss becomes ``||X - A V W^T||_F^2``.  A
    is the (masked) attention of the given form.  The gradients are
    analytic; :func:`finite_diff_gradcheck` verifies every combination.

    Parameter order of the closure: ``phi, psi[, v][, w]``.
    """
    fixed_v = None if learn_v else np.asarray(V, dtype=float)
    target_x = None if decode_target is None else np.asarray(decode_target, dtype=float)

    def value_and_grad(phi, psi, *extra):
        pos = 0
        v = np.asarray(extra[pos], dtype=float) if learn_v else fixed_v
        pos += learn_v
        w = np.asarray(extra[pos], dtype=float) if target_x is not None else None
        d = phi.shape[1]
        target = v if target_x is None else target_x
        M = v if w is None else v @ w.T  # decoded values

        if form == "softmax":
            S = phi @ psi.T / math.sqrt(d)
            if mask_diagonal:
                np.fill_diagonal(S, -np.inf)
            S = S - S.max(axis=1, keepdims=True)
            E = np.exp(S)
            A = E / E.sum(axis=1, keepdims=True)
            R = A @ M - target
            loss = float((R * R).sum())
            G = 2.0 * R
            GA = G @ M.T
            GS = A * (GA - (GA * A).sum(axis=1, keepdims=True))
            gphi = GS @ psi / math.sqrt(d)
            gpsi = GS.T @ phi / math.sqrt(d)
            GM = A.T @ G
        elif form == "linear":
            P = softplus(phi)
            Q = softplus(psi)
            B = P @ Q.T
            if mask_diagonal:
                np.fill_diagonal(B, 0.0)
            deg = B.sum(axis=1, keepdims=True)
            A = B / deg
            Mh = A @ M
            R = Mh - target
            loss = float((R * R).sum())
            G = 2.0 * R
            # dL/dB_ij = G_i . (M_j - Mh_i) / deg_i
            GB = (G @ M.T - (G * Mh).sum(axis=1, keepdims=True)) / deg
            if mask_diagonal:
                np.fill_diagonal(GB, 0.0)
            gphi = (GB @ Q) * (1.0 / (1.0 + np.exp(-phi)))
            gpsi = (GB.T @ P) * (1.0 / (1.0 + np.exp(-psi)))
            GM = A.T @ G
        else:
            raise InvalidParameter(f"unknown form {form!r}")

        grads = [gphi, gpsi]
        if learn_v:
            gv = GM if w is None else GM @ w
            if target_x is None:
                gv = gv - 2.0 * R  # the target side also carries v
            grads.append(gv)
        if w is not None:
            grads.append(GM.T @ v)
        return (loss, *grads)

    return value_and_grad


def fit_qkv(
    V,
    d: int,
    form: str = "softmax",
    lr: float = 0.1,
    steps: int = 500,
    rng_seed: int = 0,
    mask_diagonal: bool = True,
    temporal=None,
    learn_v: bool = False,
    decode_target=None,
):
    """Train query/key features to (auto-encode) reconstruct the values.

    Gradient descent on ``||V - A V||_F^2`` where A is the softmax (or
    positive linear) attention built from learnable N x d features; with
    ``decode_target=X`` the objective becomes the autoencoder form
    ``||X - A V W^T||_F^2`` with a jointly learned decoder W.  The value
    matrix is fixed by default and learned when ``learn_v`` is set.  The
    diagonal is masked during training so the identity kernel is not a
    trivial optimum; inference lifts the mask.  ``temporal`` optionally
    appends fixed position-feature columns to both phi and psi (learned
    content features stay d wide).

    Returns ``(QkvParams, loss_trace)``; the trace records the loss before
    each step plus the final value.  Diverging (non-finite) losses abort
    with the partial trace attached.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise InvalidParameter("V must be an (N, q) matrix")
    d = int(d)
    if d < 1:
        raise InvalidParameter("feature dimension must be >= 1")
    n, q = V.shape
    rng = np.random.default_rng(rng_seed)
    phi = rng.uniform(-0.1, 0.1, size=(n, d))
    psi = rng.uniform(-0.1, 0.1, size=(n, d))
    v = V.copy()
    w = None
    if decode_target is not None:
        decode_target = np.asarray(decode_target, dtype=float)
        if decode_target.shape[0] != n:
            raise ShapeMismatch("decode target must have one row per value row")
        w = rng.uniform(-0.1, 0.1, size=(decode_target.shape[1], q))
    pos = None
    if temporal is not None:
        pos = np.asarray(temporal, dtype=float)
        if pos.ndim != 2 or pos.shape[0] != n:
            raise ShapeMismatch("temporal features must be (N, k)")

    def with_pos(F):
        return F if pos is None else np.hstack([F, pos])

    vg = qkv_objective(
        form, V, mask_diagonal=mask_diagonal, learn_v=learn_v, decode_target=decode_target
    )

    def params_now():
        out = [with_pos(phi), with_pos(psi)]
        if learn_v:
            out.append(v)
        if w is not None:
            out.append(w)
        return out

    trace = np.empty(int(steps) + 1)
    for t in range(int(steps)):
        loss, *grads = vg(*params_now())
        if not math.isfinite(loss):
            raise NonFiniteLoss("training diverged", trace=trace[:t])
        trace[t] = loss
        phi = phi - lr * grads[0][:, :d]
        psi = psi - lr * grads[1][:, :d]
        pos_g = 2
        if learn_v:
            v = v - lr * grads[pos_g]
            pos_g += 1
        if w is not None:
            w = w - lr * grads[pos_g]
    final = vg(*params_now())[0]
    if not math.isfinite(final):
        raise NonFiniteLoss("training diverged", trace=trace[:-1])
    trace[-1] = final
    params = QkvParams(
        heads=(QkvHead(phi=with_pos(phi), psi=with_pos(psi), v=v, w=w),), form=form
    )
    return params, trace


def multihead_reconstruct(params: QkvParams, X=None) -> np.ndarray:
    """Mean of the per-head decoded reconstructions ``(1/M) sum V_hat_m W_m^T``.

    Heads without a decoder use the identity (their value width must then
    match).  With M = 1 this is the single-head reconstruction.
    """
    outs = []
    shape = None
    for head in params.heads:
        A = _attention_matrix(params.form, head.phi, head.psi, mask_diagonal=False)
        Vh = A @ head.v
        out = Vh if head.w is None else Vh @ head.w.T
        if shape is None:
            shape = out.shape
        elif out.shape != shape:
            raise ShapeMismatch(f"head output {out.shape} != {shape}")
        outs.append(out)
    result = sum(outs) / len(outs)
    if X is not None and np.asarray(X).shape != result.shape:
        raise ShapeMismatch(f"reconstruction {result.shape} does not match data {np.asarray(X).shape}")
    return result


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def finite_diff_gradcheck(value_and_grad, params, eps: float = 1e-5) -> float:
    """Max relative error of analytic gradients vs central differences.

    ``value_and_grad(*params)`` must return ``(value, grad_1, ..., grad_k)``
    for k parameter arrays.  The relative error denominator is guarded at
    1e-12.
    """
    eps = float(eps)
    if not 1e-8 <= eps <= 1e-3:
        raise InvalidParameter("eps must lie in [1e-8, 1e-3]")
    params = [np.asarray(p, dtype=float).copy() for p in params]
    out = value_and_grad(*params)
    grads = [np.asarray(g, dtype=float) for g in out[1:]]
    worst = 0.0
    for pi, grad in enumerate(grads):
        it = np.nditer(params[pi], flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = params[pi][idx]
            params[pi][idx] = orig + eps
            up = value_and_grad(*params)[0]
            params[pi][idx] = orig - eps
            dn = value_and_grad(*params)[0]
            params[pi][idx] = orig
            fd = (up - dn) / (2.0 * eps)
            g = grad[idx]
            rel = abs(fd - g) / max(1e-12, abs(g))
            worst = max(worst, rel)
    return worst
