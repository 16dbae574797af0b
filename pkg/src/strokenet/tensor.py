"""Dense tensors with reverse-mode automatic differentiation.

Video volumes use the N x C x T x H x W layout throughout. Only the
operations the stroke networks need are provided: 3D cross-correlation at
stride 1, ceil-mode max pooling, ReLU/sigmoid, affine maps, row softmax,
and cross-entropy on probability rows. There is no general broadcasting;
bias handling lives inside conv3d/linear.

Gradients flow through a tape of backward closures. Calling
``backward(loss)`` accumulates dLoss/dLeaf into every tracked leaf's
``grad``; repeated calls keep accumulating until ``zero_grad``.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape construction inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """An n-d float array that may participate in the gradient tape."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def is_leaf(self) -> bool:
        return self._backward is None

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def sum(self) -> "Tensor":
        return tsum(self)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, scale(other, -1.0))

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={list(self.shape)}, dtype={self.dtype.name}{flag})"


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _check_dtypes(*tensors: Tensor) -> np.dtype:
    dt = tensors[0].dtype
    for t in tensors[1:]:
        if t.dtype != dt:
            raise ValueError(f"mixed dtypes in one expression: {dt.name} vs {t.dtype.name}")
    return dt


def backward(loss: Tensor) -> None:
    """Accumulate dLoss/dLeaf into every tracked leaf reachable from loss."""
    if loss.data.size != 1:
        raise ValueError(f"backward() needs a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("backward() on a tensor that tracks no gradients")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    local: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = local.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in local:
                local[key] = local[key] + pg
            else:
                local[key] = pg


# ---------------------------------------------------------------------------
# elementwise / structural ops

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_dtypes(a, b)
    if a.shape != b.shape:
        raise ValueError(f"add: shapes differ, {a.shape} vs {b.shape}")
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_dtypes(a, b)
    if a.shape != b.shape:
        raise ValueError(f"mul: shapes differ, {a.shape} vs {b.shape}")
    return _result(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _result(a.data * np.asarray(s, dtype=a.dtype), (a,), lambda g: (g * s,))


def tsum(a: Tensor) -> Tensor:
    out = np.asarray(a.data.sum(), dtype=a.dtype)
    return _result(out, (a,), lambda g: (np.full_like(a.data, g),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    orig = a.data.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def concat(a: Tensor, b: Tensor, axis: int = 1) -> Tensor:
    _check_dtypes(a, b)
    split = a.data.shape[axis]
    out = np.concatenate([a.data, b.data], axis=axis)

    def bw(g):
        ga, gb = np.split(g, [split], axis=axis)
        return ga, gb

    return _result(out, (a, b), bw)


# ---------------------------------------------------------------------------
# activations

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _result(np.where(mask, x.data, 0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    # exp overflow for very negative x saturates to inf and yields exactly 0
    with np.errstate(over="ignore"):
        y = 1.0 / (1.0 + np.exp(-x.data))
    return _result(y, (x,), lambda g: (g * y * (1.0 - y),))


# ---------------------------------------------------------------------------
# affine / softmax / loss

def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map: (N,F) @ (K,F)^T + (K,) -> (N,K)."""
    _check_dtypes(x, weight, bias)
    xv, wv, bv = x.data, weight.data, bias.data
    if xv.ndim != 2 or wv.ndim != 2:
        raise ValueError(f"linear: need 2-d input and weight, got {xv.shape} and {wv.shape}")
    if xv.shape[1] != wv.shape[1]:
        raise ValueError(f"linear: feature mismatch, input {xv.shape} vs weight {wv.shape}")
    if bv.shape != (wv.shape[0],):
        raise ValueError(f"linear: bias shape {bv.shape} does not match weight {wv.shape}")
    out = xv @ wv.T + bv

    def bw(g):
        gx = g @ wv if x.requires_grad else None
        gw = g.T @ xv if weight.requires_grad else None
        gb = g.sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return _result(out, (x, weight, bias), bw)


def softmax(x: Tensor) -> Tensor:
    """Row softmax over (N,K), computed with max-subtraction."""
    xv = x.data
    if xv.ndim != 2:
        raise ValueError(f"softmax: need (N,K), got {xv.shape}")
    shifted = xv - xv.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _result(y, (x,), bw)


def cross_entropy(probs: Tensor, targets, eps: float = 1e-12) -> Tensor:
    """Mean over the batch of -ln(max(p[target], eps)) on probability rows."""
    pv = probs.data
    if pv.ndim != 2:
        raise ValueError(f"cross_entropy: need (N,K) probabilities, got {pv.shape}")
    t = np.asarray(targets)
    if t.ndim != 1 or t.shape[0] != pv.shape[0]:
        raise ValueError(f"cross_entropy: need {pv.shape[0]} targets, got shape {t.shape}")
    if not np.issubdtype(t.dtype, np.integer):
        raise ValueError("cross_entropy: targets must be integer class indices")
    k = pv.shape[1]
    if t.min(initial=0) < 0 or t.max(initial=0) >= k:
        bad = int(t[(t < 0) | (t >= k)][0])
        raise ValueError(f"cross_entropy: target {bad} outside [0, {k})")
    rows = np.arange(pv.shape[0])
    picked = pv[rows, t]
    clamped = np.maximum(picked, eps)
    out = np.asarray(-np.log(clamped).mean(), dtype=pv.dtype)

    def bw(g):
        gp = np.zeros_like(pv)
        gp[rows, t] = -(float(g) / pv.shape[0]) / clamped * (picked > eps)
        return (gp,)

    return _result(out, (probs,), bw)


# ---------------------------------------------------------------------------
# 3D convolution and pooling

def _im2col(xp: np.ndarray, kernel: tuple[int, int, int],
            out_extents: tuple[int, int, int]) -> np.ndarray:
    """Patches of a padded (N,C,Tp,Hp,Wp) volume as (N, C*kT*kH*kW, To*Ho*Wo).

    Built from one near-contiguous slice copy per kernel offset, which is much
    cheaper than transposing a sliding-window view.
    """
    k_t, k_h, k_w = kernel
    t_o, h_o, w_o = out_extents
    n, c = xp.shape[:2]
    if kernel == (1, 1, 1):
        return xp.reshape(n, c, t_o * h_o * w_o)
    cols = np.empty((n, c, k_t, k_h, k_w, t_o, h_o, w_o), dtype=xp.dtype)
    for a in range(k_t):
        for b in range(k_h):
            for d in range(k_w):
                cols[:, :, a, b, d] = xp[:, :, a:a + t_o, b:b + h_o, d:d + w_o]
    return cols.reshape(n, c * k_t * k_h * k_w, t_o * h_o * w_o)


def conv3d(x: Tensor, weight: Tensor, bias: Tensor,
           padding: tuple[int, int, int] = (1, 1, 1)) -> Tensor:
    """3D cross-correlation at stride 1.

    x: (N, C_in, T, H, W); weight: (C_out, C_in, kT, kH, kW); bias: (C_out,).
    Odd kernel extents only. padding=(pT,pH,pW) zero-pads each spatial axis
    symmetrically; the default keeps T/H/W unchanged for a 3x3x3 kernel.
    """
    _check_dtypes(x, weight, bias)
    xv, wv, bv = x.data, weight.data, bias.data
    if xv.ndim != 5:
        raise ValueError(f"conv3d: input must be (N,C,T,H,W), got {xv.shape}")
    if wv.ndim != 5:
        raise ValueError(f"conv3d: weight must be (C_out,C_in,kT,kH,kW), got {wv.shape}")
    n, c_in, t, h, w = xv.shape
    c_out, c_w, k_t, k_h, k_w = wv.shape
    if c_w != c_in:
        raise ValueError(
            f"conv3d: channel mismatch, input {xv.shape} carries {c_in} channels "
            f"but weight {wv.shape} expects {c_w}")
    if bv.shape != (c_out,):
        raise ValueError(f"conv3d: bias shape {bv.shape} does not match {c_out} filters")
    if any(k % 2 == 0 or k < 1 for k in (k_t, k_h, k_w)):
        raise ValueError(f"conv3d: kernel extents must be odd and positive, got {(k_t, k_h, k_w)}")
    p_t, p_h, p_w = (int(p) for p in padding)
    if min(p_t, p_h, p_w) < 0:
        raise ValueError(f"conv3d: negative padding {padding}")
    t_o, h_o, w_o = t + 2 * p_t - k_t + 1, h + 2 * p_h - k_h + 1, w + 2 * p_w - k_w + 1
    if min(t_o, h_o, w_o) < 1:
        raise ValueError(f"conv3d: kernel {(k_t, k_h, k_w)} larger than padded input {xv.shape}")

    kernel = (k_t, k_h, k_w)
    if (p_t, p_h, p_w) == (0, 0, 0):
        xp = xv
    else:
        xp = np.zeros((n, c_in, t + 2 * p_t, h + 2 * p_h, w + 2 * p_w), dtype=xv.dtype)
        xp[:, :, p_t:p_t + t, p_h:p_h + h, p_w:p_w + w] = xv
    cols = _im2col(xp, kernel, (t_o, h_o, w_o))
    wmat = wv.reshape(c_out, -1)
    out = np.matmul(wmat[None], cols)
    out += bv[:, None]
    out = out.reshape(n, c_out, t_o, h_o, w_o)

    def bw(g):
        gy = g.reshape(n, c_out, -1)
        gx = gw = gb = None
        if x.requires_grad:
            gcols = np.matmul(wmat.T[None], gy)
            if kernel == (1, 1, 1):
                gxp = gcols.reshape(xp.shape)
                grow = False
            else:
                g8 = gcols.reshape(n, c_in, k_t, k_h, k_w, t_o, h_o, w_o)
                gxp = np.zeros_like(xp)
                grow = True
                for a in range(k_t):
                    for b in range(k_h):
                        for d in range(k_w):
                            gxp[:, :, a:a + t_o, b:b + h_o, d:d + w_o] += g8[:, :, a, b, d]
            if xp is xv and not grow:
                gx = gxp
            else:
                gx = np.ascontiguousarray(gxp[:, :, p_t:p_t + t, p_h:p_h + h, p_w:p_w + w])
        if weight.requires_grad:
            gw = np.matmul(gy, cols.transpose(0, 2, 1)).sum(axis=0).reshape(wv.shape)
        if bias.requires_grad:
            gb = gy.sum(axis=(0, 2))
        return gx, gw, gb

    return _result(out, (x, weight, bias), bw)


def maxpool3d(x: Tensor, pool: tuple[int, int, int]) -> Tensor:
    """Ceil-mode max pooling over (T,H,W); trailing partial windows pool
    over the elements that exist. Gradient goes to the window argmax,
    ties resolved to the lowest linear index.
    """
    p_t, p_h, p_w = (int(p) for p in pool)
    if min(p_t, p_h, p_w) < 1:
        raise ValueError(f"maxpool3d: pool extents must be >= 1, got {pool}")
    xv = x.data
    if xv.ndim != 5:
        raise ValueError(f"maxpool3d: input must be (N,C,T,H,W), got {xv.shape}")
    n, c, t, h, w = xv.shape
    t_o, h_o, w_o = -(-t // p_t), -(-h // p_h), -(-w // p_w)

    if (t_o * p_t, h_o * p_h, w_o * p_w) == (t, h, w):
        xp = xv
    else:
        xp = np.full((n, c, t_o * p_t, h_o * p_h, w_o * p_w), -np.inf, dtype=xv.dtype)
        xp[:, :, :t, :h, :w] = xv
    win = (xp.reshape(n, c, t_o, p_t, h_o, p_h, w_o, p_w)
             .transpose(0, 1, 2, 4, 6, 3, 5, 7)
             .reshape(n, c, t_o, h_o, w_o, p_t * p_h * p_w))
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def bw(g):
        dt = idx // (p_h * p_w)
        rem = idx % (p_h * p_w)
        dh, dw = rem // p_w, rem % p_w
        ni, ci, ti, hi, wi = np.indices((n, c, t_o, h_o, w_o), sparse=True)
        gx = np.zeros_like(xv)
        gx[ni, ci, ti * p_t + dt, hi * p_h + dh, wi * p_w + dw] = g
        return (gx,)

    return _result(out, (x,), bw)
