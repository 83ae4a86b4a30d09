"""Reverse-mode automatic differentiation over dense numpy tensors.

The graph is built implicitly: every primitive returns a `Tensor` holding its
parents and a closure that routes the upstream gradient to them. Calling
`backward()` on a scalar loss walks the recorded operations once, in reverse
topological order. Gradients are exact: a loss term multiplied by a zero mask
contributes exactly 0.0 to every upstream gradient.

Only the primitives the parser needs are provided. All of them keep float
dtype of their inputs (float64 by default; float32 can be selected for
throughput with `set_default_dtype`).
"""

from __future__ import annotations

import io
import json
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import AutodiffError, CheckpointError

_DEFAULT_DTYPE = np.float64
_GRAD_ENABLED = True

CHECKPOINT_VERSION = 1


def set_default_dtype(dtype):
    """Select float64 (default, for correctness) or float32 (for speed)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float64, np.float32):
        raise AutodiffError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def default_dtype():
    return _DEFAULT_DTYPE


@contextmanager
def no_grad():
    """Disable graph recording; forward values only."""
    global _GRAD_ENABLED
    saved = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = saved


class Tensor:
    """A dense array plus the tape record that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float64, np.float32):
            arr = arr.astype(_DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def backward(self):
        """Backpropagate from this scalar through the recorded tape."""
        if self.data.size != 1:
            raise AutodiffError(f"backward requires a scalar, got shape {self.data.shape}")
        if not self.requires_grad:
            raise AutodiffError("backward on a detached tensor (nothing requires grad)")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, int]] = [(self, 0)]
        while stack:
            node, i = stack.pop()
            if i == 0:
                if id(node) in visited:
                    continue
                visited.add(id(node))
            if i < len(node._parents):
                stack.append((node, i + 1))
                parent = node._parents[i]
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, 0))
            else:
                topo.append(node)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # Operator sugar; scalars are folded into the closure, not lifted to nodes.
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return shift(self, float(other))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return add(self, scale(other, -1.0))
        return shift(self, -float(other))

    def __rsub__(self, other):
        return shift(scale(self, -1.0), float(other))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise AutodiffError("tensor/tensor division is not a registered primitive")
        return scale(self, 1.0 / float(other))


def _result(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check(cond: bool, op: str, msg: str):
    if not cond:
        raise AutodiffError(f"{op}: {msg}")


def constant(data) -> Tensor:
    return Tensor(data)


# ---------------------------------------------------------------------------
# elementwise and linear algebra


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data + b.data
    except ValueError:
        raise AutodiffError(f"add: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _result(data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        data = a.data * b.data
    except ValueError:
        raise AutodiffError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _result(data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    def backward(g):
        _accumulate(a, g * c)

    return _result(a.data * c, (a,), backward)


def shift(a: Tensor, c: float) -> Tensor:
    def backward(g):
        _accumulate(a, g)

    return _result(a.data + c, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check(a.ndim == 2 and b.ndim == 2, "matmul", f"expects 2-D operands, "
           f"got {a.shape} and {b.shape}")
    _check(a.shape[1] == b.shape[0], "matmul", f"inner dims differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _result(data, (a, b), backward)


def transpose(a: Tensor, axes: tuple | None = None) -> Tensor:
    data = np.transpose(a.data, axes)
    inverse = None if axes is None else tuple(np.argsort(axes))

    def backward(g):
        _accumulate(a, np.transpose(g, inverse))

    return _result(data, (a,), backward)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    data = a.data.reshape(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.shape))

    return _result(data, (a,), backward)


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    _check(len(parts) > 0, "concat", "needs at least one part")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(p, g[tuple(idx)])

    return _result(data, tuple(parts), backward)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    _check(0 <= start < stop <= a.shape[0], "slice_rows",
           f"range [{start},{stop}) invalid for {a.shape[0]} rows")
    data = a.data[start:stop]

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[start:stop] = g
            _accumulate(a, full)

    return _result(data, (a,), backward)


def flip_rows(a: Tensor) -> Tensor:
    data = a.data[::-1].copy()

    def backward(g):
        _accumulate(a, g[::-1])

    return _result(data, (a,), backward)


def sum_all(a: Tensor) -> Tensor:
    def backward(g):
        _accumulate(a, np.full_like(a.data, float(g)))

    return _result(np.asarray(a.data.sum()), (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    count = a.data.size

    def backward(g):
        _accumulate(a, np.full_like(a.data, float(g) / count))

    return _result(np.asarray(a.data.mean()), (a,), backward)


# ---------------------------------------------------------------------------
# nonlinearities


def _sigmoid_stable(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid_stable(a.data)

    def backward(g):
        _accumulate(a, g * s * (1.0 - s))

    return _result(s, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)

    def backward(g):
        _accumulate(a, g * (1.0 - t * t))

    return _result(t, (a,), backward)


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction for stability."""
    _check(a.ndim == 2, "softmax_rows", f"expects a matrix, got {a.shape}")
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        inner = (g * p).sum(axis=1, keepdims=True)
        _accumulate(a, p * (g - inner))

    return _result(p, (a,), backward)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Train-time inverted dropout; inference needs no rescaling."""
    _check(0.0 <= rate < 1.0, "dropout", f"rate must be in [0,1), got {rate}")
    if rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.data.dtype) / (1.0 - rate)
    data = a.data * keep

    def backward(g):
        _accumulate(a, g * keep)

    return _result(data, (a,), backward)


# ---------------------------------------------------------------------------
# gathers


def lookup(table: Tensor, ids) -> Tensor:
    """Embedding row gather; gradients scatter-add back into the table."""
    ids = np.asarray(ids, dtype=np.int64)
    _check(table.ndim == 2, "lookup", f"table must be 2-D, got {table.shape}")
    _check(ids.ndim == 1, "lookup", f"ids must be 1-D, got {ids.shape}")
    _check(ids.size == 0 or (ids.min() >= 0 and ids.max() < table.shape[0]),
           "lookup", "id out of range")
    data = table.data[ids]

    def backward(g):
        if table.requires_grad:
            full = np.zeros_like(table.data)
            np.add.at(full, ids, g)
            _accumulate(table, full)

    return _result(data, (table,), backward)


def pick_cells(a: Tensor, rows, cols) -> Tensor:
    """Gather cells (rows[k], cols[k]); for a 3-D tensor gathers across axis 0.

    2-D input of shape (R, C) yields shape (k,); 3-D input of shape (L, R, C)
    yields (k, L).
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    _check(rows.shape == cols.shape and rows.ndim == 1, "pick_cells",
           "rows and cols must be equal-length vectors")
    if a.ndim == 2:
        data = a.data[rows, cols]

        def backward(g):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                np.add.at(full, (rows, cols), g)
                _accumulate(a, full)

        return _result(data, (a,), backward)
    if a.ndim == 3:
        data = a.data[:, rows, cols].T

        def backward(g):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                for layer in range(a.shape[0]):
                    np.add.at(full[layer], (rows, cols), g[:, layer])
                _accumulate(a, full)

        return _result(data, (a,), backward)
    raise AutodiffError(f"pick_cells: expects a 2-D or 3-D tensor, got {a.shape}")


# ---------------------------------------------------------------------------
# bilinear scoring


def bilinear(x: Tensor, w: Tensor, y: Tensor) -> Tensor:
    """Bilinear form x W y^T.

    x: (n, dx), y: (m, dy). With w of shape (dx, dy) the result is (n, m)
    with entry x_i^T W y_j; with w of shape (L, dx, dy) the result is
    (L, n, m), one slice per label.
    """
    _check(x.ndim == 2 and y.ndim == 2, "bilinear",
           f"x and y must be matrices, got {x.shape}, {y.shape}")
    squeeze = w.ndim == 2
    w3 = w.data[None] if squeeze else w.data
    _check(w3.ndim == 3, "bilinear", f"w must be 2-D or 3-D, got {w.shape}")
    _check(w3.shape[1] == x.shape[1] and w3.shape[2] == y.shape[1], "bilinear",
           f"shape mismatch: x {x.shape}, w {w.shape}, y {y.shape}")
    data = np.einsum("nd,lde,me->lnm", x.data, w3, y.data, optimize=True)

    def backward(g):
        g3 = g[None] if squeeze else g
        if x.requires_grad:
            _accumulate(x, np.einsum("lnm,lde,me->nd", g3, w3, y.data, optimize=True))
        if w.requires_grad:
            gw = np.einsum("lnm,nd,me->lde", g3, x.data, y.data, optimize=True)
            _accumulate(w, gw[0] if squeeze else gw)
        if y.requires_grad:
            _accumulate(y, np.einsum("lnm,nd,lde->me", g3, x.data, w3, optimize=True))

    return _result(data[0] if squeeze else data, (x, w, y), backward)


# ---------------------------------------------------------------------------
# fused losses


def sigmoid_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Elementwise sigmoid cross-entropy with logits, log1p-stable.

    `targets` is a constant 0/1 array of the same shape. Returns the
    per-cell loss tensor; mask and reduce at the call site.
    """
    t = np.asarray(targets, dtype=logits.data.dtype)
    _check(t.shape == logits.shape, "sigmoid_cross_entropy",
           f"targets shape {t.shape} != logits shape {logits.shape}")
    s = logits.data
    data = np.maximum(s, 0.0) - s * t + np.log1p(np.exp(-np.abs(s)))

    def backward(g):
        _accumulate(logits, g * (_sigmoid_stable(s) - t))

    return _result(data, (logits,), backward)


def softmax_cross_entropy(logits: Tensor, target_ids) -> Tensor:
    """Per-row softmax cross-entropy with logits, log-sum-exp stable.

    logits: (k, C); target_ids: (k,) integer class per row. Returns (k,) losses.
    """
    ids = np.asarray(target_ids, dtype=np.int64)
    _check(logits.ndim == 2, "softmax_cross_entropy", f"logits must be 2-D, got {logits.shape}")
    _check(ids.shape == (logits.shape[0],), "softmax_cross_entropy",
           f"target_ids shape {ids.shape} does not match {logits.shape[0]} rows")
    _check(ids.size == 0 or (ids.min() >= 0 and ids.max() < logits.shape[1]),
           "softmax_cross_entropy", "target id out of range")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    denom = e.sum(axis=1)
    rows = np.arange(ids.size)
    data = np.log(denom) - z[rows, ids]

    def backward(g):
        if logits.requires_grad:
            p = e / denom[:, None]
            p[rows, ids] -= 1.0
            _accumulate(logits, p * g[:, None])

    return _result(data, (logits,), backward)


# ---------------------------------------------------------------------------
# fused LSTM over a full sequence

_GATES = 4


def lstm_seq(x: Tensor, w: Tensor, u: Tensor, b: Tensor) -> Tensor:
    """Run an LSTM over a (T, d_in) sequence; returns all hidden states (T, H).

    Gate layout in the 4H axis is input | forget | cell | output. Initial
    hidden and cell states are zero. The whole sequence is one tape node;
    backward replays the steps in reverse (exact BPTT).
    """
    _check(x.ndim == 2, "lstm_seq", f"x must be (T, d_in), got {x.shape}")
    _check(w.ndim == 2 and u.ndim == 2 and b.ndim == 1, "lstm_seq",
           "w, u must be matrices and b a vector")
    hidden = u.shape[0]
    _check(w.shape == (x.shape[1], _GATES * hidden), "lstm_seq",
           f"w shape {w.shape} != ({x.shape[1]}, {_GATES * hidden})")
    _check(u.shape == (hidden, _GATES * hidden), "lstm_seq",
           f"u shape {u.shape} != ({hidden}, {_GATES * hidden})")
    _check(b.shape == (_GATES * hidden,), "lstm_seq",
           f"b shape {b.shape} != ({_GATES * hidden},)")

    steps = x.shape[0]
    dtype = x.data.dtype
    gi = np.empty((steps, hidden), dtype=dtype)
    gf = np.empty((steps, hidden), dtype=dtype)
    gc = np.empty((steps, hidden), dtype=dtype)
    go = np.empty((steps, hidden), dtype=dtype)
    cell = np.empty((steps, hidden), dtype=dtype)
    tc = np.empty((steps, hidden), dtype=dtype)
    out = np.empty((steps, hidden), dtype=dtype)

    pre = x.data @ w.data + b.data
    h_prev = np.zeros(hidden, dtype=dtype)
    c_prev = np.zeros(hidden, dtype=dtype)
    for t in range(steps):
        z = pre[t] + h_prev @ u.data
        gi[t] = _sigmoid_stable(z[:hidden])
        gf[t] = _sigmoid_stable(z[hidden:2 * hidden])
        gc[t] = np.tanh(z[2 * hidden:3 * hidden])
        go[t] = _sigmoid_stable(z[3 * hidden:])
        cell[t] = gf[t] * c_prev + gi[t] * gc[t]
        tc[t] = np.tanh(cell[t])
        out[t] = go[t] * tc[t]
        h_prev = out[t]
        c_prev = cell[t]

    def backward(g):
        dw = np.zeros_like(w.data) if w.requires_grad else None
        du = np.zeros_like(u.data) if u.requires_grad else None
        db = np.zeros_like(b.data) if b.requires_grad else None
        dx = np.zeros_like(x.data) if x.requires_grad else None
        dh = np.zeros(hidden, dtype=dtype)
        dc = np.zeros(hidden, dtype=dtype)
        dz = np.empty(_GATES * hidden, dtype=dtype)
        for t in range(steps - 1, -1, -1):
            dht = g[t] + dh
            c_in = cell[t - 1] if t > 0 else np.zeros(hidden, dtype=dtype)
            h_in = out[t - 1] if t > 0 else np.zeros(hidden, dtype=dtype)
            do = dht * tc[t]
            dct = dc + dht * go[t] * (1.0 - tc[t] * tc[t])
            dz[:hidden] = dct * gc[t] * gi[t] * (1.0 - gi[t])
            dz[hidden:2 * hidden] = dct * c_in * gf[t] * (1.0 - gf[t])
            dz[2 * hidden:3 * hidden] = dct * gi[t] * (1.0 - gc[t] * gc[t])
            dz[3 * hidden:] = do * go[t] * (1.0 - go[t])
            if dw is not None:
                dw += np.outer(x.data[t], dz)
            if du is not None:
                du += np.outer(h_in, dz)
            if db is not None:
                db += dz
            if dx is not None:
                dx[t] = dz @ w.data.T
            dh = dz @ u.data.T
            dc = dct * gf[t]
        if dx is not None:
            _accumulate(x, dx)
        if dw is not None:
            _accumulate(w, dw)
        if du is not None:
            _accumulate(u, du)
        if db is not None:
            _accumulate(b, db)

    return _result(out, (x, w, u, b), backward)


# ---------------------------------------------------------------------------
# parameters and the Adam optimizer


class Parameter(Tensor):
    """A named trainable tensor carrying its Adam moments and step counter."""

    __slots__ = ("name", "m", "v", "step")

    def __init__(self, data, name: str = ""):
        super().__init__(np.array(data, dtype=_DEFAULT_DTYPE), requires_grad=True)
        self.name = name
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0


def adam_step(params, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8):
    """Bias-corrected Adam over parameters with populated gradients.

    Parameters whose gradient is unset are skipped (their moments and step
    counters do not advance). Gradients are cleared afterwards.
    """
    for p in params:
        if p.grad is None:
            continue
        p.step += 1
        g = p.grad
        p.m = beta1 * p.m + (1.0 - beta1) * g
        p.v = beta2 * p.v + (1.0 - beta2) * (g * g)
        m_hat = p.m / (1.0 - beta1 ** p.step)
        v_hat = p.v / (1.0 - beta2 ** p.step)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.grad = None


def clear_grads(params):
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# finite-difference gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    worst: str
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def __str__(self):
        lines = [f"gradient check: max_rel_error={self.max_rel_error:.3e} "
                 f"tolerance={self.tolerance:.1e} "
                 f"{'PASS' if self.passed else 'FAIL'} (worst: {self.worst})"]
        for name in sorted(self.per_param):
            lines.append(f"  {name}: {self.per_param[name]:.3e}")
        return "\n".join(lines)


def gradient_check(closure, params, epsilon: float = 1e-5,
                   tolerance: float = 1e-4) -> GradCheckReport:
    """Compare tape gradients against central differences, coordinate by coordinate.

    The closure must rebuild the loss from scratch on every call and be
    deterministic (dropout off or masks frozen); nondeterminism is detected
    by running it twice and is reported as an error.
    """
    params = list(params)
    with no_grad():
        first = float(closure().data)
        second = float(closure().data)
    if first != second:
        raise AutodiffError(
            f"closure is not deterministic: {first!r} != {second!r}; "
            "freeze dropout masks before checking gradients")

    clear_grads(params)
    loss = closure()
    loss.backward()
    analytic = {p.name or f"param{i}": (np.array(p.grad) if p.grad is not None
                                        else np.zeros_like(p.data))
                for i, p in enumerate(params)}
    clear_grads(params)

    worst = ""
    worst_err = 0.0
    per_param = {}
    for i, p in enumerate(params):
        name = p.name or f"param{i}"
        a = analytic[name].reshape(-1)
        err = 0.0
        for k in range(p.data.size):
            idx = np.unravel_index(k, p.data.shape)
            saved = p.data[idx]
            p.data[idx] = saved + epsilon
            with no_grad():
                up = float(closure().data)
            p.data[idx] = saved - epsilon
            with no_grad():
                down = float(closure().data)
            p.data[idx] = saved
            numeric = (up - down) / (2.0 * epsilon)
            rel = abs(a[k] - numeric) / max(abs(a[k]), abs(numeric), 1.0)
            if rel > err:
                err = rel
        per_param[name] = err
        if err >= worst_err:
            worst_err = err
            worst = name
    return GradCheckReport(worst_err, tolerance, worst, per_param)


# ---------------------------------------------------------------------------
# named-tensor checkpoint files

_META_KEY = "__meta__"


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None):
    """Write a versioned, name-keyed binary archive of arrays."""
    if _META_KEY in arrays:
        raise CheckpointError(f"array name {_META_KEY!r} is reserved")
    header = dict(meta or {})
    header["checkpoint_version"] = CHECKPOINT_VERSION
    payload = np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"),
                            dtype=np.uint8)
    with open(path, "wb") as f:
        np.savez(f, **{_META_KEY: payload}, **arrays)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint written by `save_arrays`; order-independent by name."""
    try:
        with np.load(path) as npz:
            if _META_KEY not in npz:
                raise CheckpointError(f"{path}: not a toolkit checkpoint (missing metadata)")
            meta = json.loads(bytes(npz[_META_KEY].tobytes()).decode("utf-8"))
            arrays = {k: npz[k] for k in npz.files if k != _META_KEY}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    version = meta.get("checkpoint_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    return arrays, meta
