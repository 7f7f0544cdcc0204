"""Reverse-mode differentiation over a small fixed primitive set.

Every function here accepts either plain numpy arrays (in which case it
just computes) or Node objects (in which case the computation is recorded
for a later backward pass).  The same residual code therefore runs in two
modes: fast numpy evaluation for reports, and taped evaluation for
training gradients.

Complex intermediates use the cotangent convention
g_z = dL/dRe(z) + i dL/dIm(z) for a real-valued loss L.  With that
convention the adjoint of a C-linear map with matrix A is A^H, and the
adjoint of an elementwise product y = a*b sends g to conj(b)*g.  When a
parent is real-valued, the stored contribution is the real part.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Node",
    "leaf",
    "value_of",
    "backward",
    "add",
    "sub",
    "mul",
    "neg",
    "swish",
    "affine",
    "conv1d",
    "conv2d_circular",
    "dft1",
    "idft1",
    "dft2",
    "idft2",
    "matconst",
    "abs2sum",
    "concat",
    "reshape",
    "take",
    "hermitian_expand_1d",
    "hermitian_restrict_1d",
    "hermitian_expand_2d",
    "hermitian_restrict_2d",
]


class Node:
    """One taped value: the forward result plus how to push adjoints back."""

    __slots__ = ("value", "parents", "bwd")

    def __init__(self, value, parents=(), bwd=None):
        self.value = value
        self.parents = parents
        self.bwd = bwd

    @property
    def shape(self):
        return np.shape(self.value)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return take(self, idx)


def leaf(value) -> Node:
    return Node(np.asarray(value))


def value_of(x):
    return x.value if isinstance(x, Node) else x


def _is_node(*xs) -> bool:
    return any(isinstance(x, Node) for x in xs)


def _match(parent_value, g):
    """Cast an adjoint contribution to the parent's realness."""
    if not np.iscomplexobj(parent_value) and np.iscomplexobj(g):
        return g.real
    return g


def _unbroadcast(g, shape):
    """Sum g down to a given broadcast-source shape."""
    g = np.asarray(g)
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss: Node, leaves: list[Node]) -> list[np.ndarray]:
    """Adjoints of a scalar loss with respect to the given leaves."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    adj: dict[int, np.ndarray] = {id(loss): np.asarray(1.0)}
    for node in reversed(order):
        g = adj.get(id(node))
        if g is None or node.bwd is None:
            continue
        for parent, contrib in zip(node.parents, node.bwd(g)):
            if contrib is None:
                continue
            contrib = _match(parent.value, contrib)
            key = id(parent)
            if key in adj:
                adj[key] = adj[key] + contrib
            else:
                adj[key] = contrib
    out = []
    for lf in leaves:
        g = adj.get(id(lf))
        if g is None:
            g = np.zeros_like(np.asarray(lf.value, dtype=float))
        out.append(np.asarray(g))
    return out


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b):
    if not _is_node(a, b):
        return a + b
    av, bv = value_of(a), value_of(b)
    val = av + bv
    parents, bwds = [], []
    if isinstance(a, Node):
        parents.append(a)
        bwds.append(lambda g, s=np.shape(av): _unbroadcast(g, s))
    if isinstance(b, Node):
        parents.append(b)
        bwds.append(lambda g, s=np.shape(bv): _unbroadcast(g, s))
    return Node(val, tuple(parents), lambda g: tuple(f(g) for f in bwds))


def sub(a, b):
    if not _is_node(a, b):
        return a - b
    av, bv = value_of(a), value_of(b)
    val = av - bv
    parents, bwds = [], []
    if isinstance(a, Node):
        parents.append(a)
        bwds.append(lambda g, s=np.shape(av): _unbroadcast(g, s))
    if isinstance(b, Node):
        parents.append(b)
        bwds.append(lambda g, s=np.shape(bv): -_unbroadcast(g, s))
    return Node(val, tuple(parents), lambda g: tuple(f(g) for f in bwds))


def neg(a):
    if not isinstance(a, Node):
        return -a
    return Node(-a.value, (a,), lambda g: (-g,))


def mul(a, b):
    if not _is_node(a, b):
        return a * b
    av, bv = value_of(a), value_of(b)
    val = av * bv
    parents, bwds = [], []
    if isinstance(a, Node):
        parents.append(a)
        bwds.append(lambda g, o=bv, s=np.shape(av): _unbroadcast(np.conj(o) * g, s))
    if isinstance(b, Node):
        parents.append(b)
        bwds.append(lambda g, o=av, s=np.shape(bv): _unbroadcast(np.conj(o) * g, s))
    return Node(val, tuple(parents), lambda g: tuple(f(g) for f in bwds))


def swish(x):
    xv = value_of(x)
    # tanh form of the sigmoid is overflow-safe for any argument
    s = 0.5 * (1.0 + np.tanh(0.5 * xv))
    val = xv * s
    if not isinstance(x, Node):
        return val
    return Node(val, (x,), lambda g: (g * s * (1.0 + xv * (1.0 - s)),))


# ---------------------------------------------------------------------------
# linear layers


def affine(x, w, b):
    """y = x @ w.T + b with x (..., F), w (O, F), b (O,).

    The forward contraction uses an unoptimized einsum: unlike BLAS it
    gives bit-identical per-sample results whatever the batch size.
    """
    xv, wv, bv = value_of(x), value_of(w), value_of(b)
    val = np.einsum("...f,of->...o", xv, wv, optimize=False) + bv
    if not _is_node(x, w, b):
        return val

    def bwd(g):
        gx = g @ wv if isinstance(x, Node) else None
        gw = None
        if isinstance(w, Node):
            g2 = g.reshape(-1, g.shape[-1])
            x2 = xv.reshape(-1, xv.shape[-1])
            gw = g2.T @ x2
        gb = g.reshape(-1, g.shape[-1]).sum(axis=0) if isinstance(b, Node) else None
        return tuple(
            v for v, n in ((gx, x), (gw, w), (gb, b)) if isinstance(n, Node)
        )

    parents = tuple(n for n in (x, w, b) if isinstance(n, Node))
    return Node(val, parents, bwd)


def _conv1d_forward(xv, wv, bv, padding):
    P, C, L = xv.shape
    O, _, K = wv.shape
    c = K // 2
    if padding == "circular":
        xp = np.concatenate([xv[:, :, L - c:], xv, xv[:, :, :c]], axis=2)
    else:
        xp = np.pad(xv, ((0, 0), (0, 0), (c, c)))
    val = np.tile(bv[None, :, None], (P, 1, L)).astype(float)
    for k in range(K):
        val += np.einsum("pcl,oc->pol", xp[:, :, k:k + L], wv[:, :, k])
    return val, xp


def conv1d(x, w, b, padding="circular"):
    """Channelled 1D convolution, kernel centred, circular or zero padded.

    x: (P, C, L), w: (O, C, K) with K odd, b: (O,).
    """
    xv, wv, bv = value_of(x), value_of(w), value_of(b)
    val, xp = _conv1d_forward(xv, wv, bv, padding)
    if not _is_node(x, w, b):
        return val
    P, C, L = xv.shape
    O, _, K = wv.shape
    c = K // 2

    def bwd(g):
        gx = gw = gb = None
        if isinstance(x, Node):
            gxp = np.zeros_like(xp)
            for k in range(K):
                gxp[:, :, k:k + L] += np.einsum("pol,oc->pcl", g, wv[:, :, k])
            gx = gxp[:, :, c:c + L].copy()
            if c:
                if padding == "circular":
                    gx[:, :, L - c:] += gxp[:, :, :c]
                    gx[:, :, :c] += gxp[:, :, c + L:]
        if isinstance(w, Node):
            gw = np.empty_like(wv)
            for k in range(K):
                gw[:, :, k] = np.einsum("pol,pcl->oc", g, xp[:, :, k:k + L])
        if isinstance(b, Node):
            gb = g.sum(axis=(0, 2))
        return tuple(
            v for v, n in ((gx, x), (gw, w), (gb, b)) if isinstance(n, Node)
        )

    parents = tuple(n for n in (x, w, b) if isinstance(n, Node))
    return Node(val, parents, bwd)


def conv2d_circular(x, w, b):
    """2D convolution with wrap-around padding.

    x: (P, C, H, W), w: (O, C, K, K) with K odd, b: (O,).
    """
    xv, wv, bv = value_of(x), value_of(w), value_of(b)
    P, C, H, W = xv.shape
    O, _, K, _ = wv.shape
    c = K // 2
    xp = np.concatenate([xv[:, :, H - c:, :], xv, xv[:, :, :c, :]], axis=2)
    xp = np.concatenate([xp[:, :, :, W - c:], xp, xp[:, :, :, :c]], axis=3)
    val = np.tile(bv[None, :, None, None], (P, 1, H, W)).astype(float)
    for ki in range(K):
        for kj in range(K):
            val += np.einsum(
                "pchw,oc->pohw", xp[:, :, ki:ki + H, kj:kj + W], wv[:, :, ki, kj]
            )
    if not _is_node(x, w, b):
        return val

    def bwd(g):
        gx = gw = gb = None
        if isinstance(x, Node):
            gxp = np.zeros_like(xp)
            for ki in range(K):
                for kj in range(K):
                    gxp[:, :, ki:ki + H, kj:kj + W] += np.einsum(
                        "pohw,oc->pchw", g, wv[:, :, ki, kj]
                    )
            gx = gxp[:, :, c:c + H, c:c + W].copy()
            if c:
                gx[:, :, H - c:, :] += gxp[:, :, :c, c:c + W]
                gx[:, :, :c, :] += gxp[:, :, c + H:, c:c + W]
                gx[:, :, :, W - c:] += gxp[:, :, c:c + H, :c]
                gx[:, :, :, :c] += gxp[:, :, c:c + H, c + W:]
                # corners wrap on both axes
                gx[:, :, H - c:, W - c:] += gxp[:, :, :c, :c]
                gx[:, :, H - c:, :c] += gxp[:, :, :c, c + W:]
                gx[:, :, :c, W - c:] += gxp[:, :, c + H:, :c]
                gx[:, :, :c, :c] += gxp[:, :, c + H:, c + W:]
        if isinstance(w, Node):
            gw = np.empty_like(wv)
            for ki in range(K):
                for kj in range(K):
                    gw[:, :, ki, kj] = np.einsum(
                        "pohw,pchw->oc", g, xp[:, :, ki:ki + H, kj:kj + W]
                    )
        if isinstance(b, Node):
            gb = g.sum(axis=(0, 2, 3))
        return tuple(
            v for v, n in ((gx, x), (gw, w), (gb, b)) if isinstance(n, Node)
        )

    parents = tuple(n for n in (x, w, b) if isinstance(n, Node))
    return Node(val, parents, bwd)


# ---------------------------------------------------------------------------
# spectral primitives (paper-normalized transforms along trailing axes)


def dft1(x):
    xv = value_of(x)
    n = xv.shape[-1]
    h = 2.0 * np.pi / n
    val = h * np.fft.fft(xv, axis=-1)
    if not isinstance(x, Node):
        return val
    return Node(val, (x,), lambda g: (2.0 * np.pi * np.fft.ifft(g, axis=-1),))


def idft1(x):
    xv = value_of(x)
    n = xv.shape[-1]
    h = 2.0 * np.pi / n
    val = np.fft.ifft(xv, axis=-1) / h
    if not isinstance(x, Node):
        return val
    return Node(val, (x,), lambda g: (np.fft.fft(g, axis=-1) / (2.0 * np.pi),))


def dft2(x):
    xv = value_of(x)
    nx, ny = xv.shape[-2], xv.shape[-1]
    h2 = (2.0 * np.pi / nx) * (2.0 * np.pi / ny)
    val = h2 * np.fft.fft2(xv, axes=(-2, -1))
    if not isinstance(x, Node):
        return val
    scale = 4.0 * np.pi**2
    return Node(val, (x,), lambda g: (scale * np.fft.ifft2(g, axes=(-2, -1)),))


def idft2(x):
    xv = value_of(x)
    nx, ny = xv.shape[-2], xv.shape[-1]
    h2 = (2.0 * np.pi / nx) * (2.0 * np.pi / ny)
    val = np.fft.ifft2(xv, axes=(-2, -1)) / h2
    if not isinstance(x, Node):
        return val
    scale = 1.0 / (4.0 * np.pi**2)
    return Node(val, (x,), lambda g: (scale * np.fft.fft2(g, axes=(-2, -1)),))


def matconst(x, mat):
    """y[..., n] = sum_m x[..., m] mat[m, n] for a constant real matrix."""
    xv = value_of(x)
    val = xv @ mat
    if not isinstance(x, Node):
        return val
    return Node(val, (x,), lambda g: (g @ mat.T,))


def abs2sum(z):
    """Sum of squared magnitudes, a real scalar."""
    zv = value_of(z)
    if np.iscomplexobj(zv):
        val = float(np.sum(zv.real**2 + zv.imag**2))
    else:
        val = float(np.sum(zv * zv))
    if not isinstance(z, Node):
        return val
    return Node(val, (z,), lambda g: (2.0 * g * zv,))


def concat(parts, axis):
    if not any(isinstance(p, Node) for p in parts):
        return np.concatenate(parts, axis=axis)
    vals = [value_of(p) for p in parts]
    val = np.concatenate(vals, axis=axis)
    sizes = [v.shape[axis] for v in vals]
    offsets = np.cumsum([0] + sizes)
    parents = tuple(p for p in parts if isinstance(p, Node))

    def bwd(g):
        out = []
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if isinstance(p, Node):
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                out.append(g[tuple(sl)])
        return tuple(out)

    return Node(val, parents, bwd)


def reshape(x, shape):
    xv = value_of(x)
    val = xv.reshape(shape)
    if not isinstance(x, Node):
        return val
    return Node(val, (x,), lambda g, s=xv.shape: (np.asarray(g).reshape(s),))


def take(x, idx):
    xv = value_of(x)
    val = xv[idx]
    if not isinstance(x, Node):
        return val

    def bwd(g):
        buf = np.zeros_like(xv) if np.iscomplexobj(g) == np.iscomplexobj(xv) else np.zeros(xv.shape, dtype=complex)
        buf[idx] += g
        return (buf,)

    return Node(val, (x,), bwd)


# ---------------------------------------------------------------------------
# Hermitian free-mode layouts

_LAYOUT_1D: dict[int, tuple] = {}
_LAYOUT_2D: dict[int, tuple] = {}


def _layout_1d(n):
    if n not in _LAYOUT_1D:
        half = n // 2
        ks = np.arange(1, half)
        _LAYOUT_1D[n] = (half, ks, n - ks)
    return _LAYOUT_1D[n]


def hermitian_expand_1d(free, n):
    """Real free modes -> Hermitian spectrum of length n.

    Layout: [alpha_0, Re a_1, Im a_1, ..., Re a_{n/2-1}, Im a_{n/2-1}, a_{n/2}].
    """
    half, ks, negks = _layout_1d(n)
    fv = value_of(free)
    re = fv[..., 1:-1:2]
    im = fv[..., 2:-1:2]
    val = np.zeros(fv.shape[:-1] + (n,), dtype=complex)
    val[..., 0] = fv[..., 0]
    val[..., ks] = re + 1j * im
    val[..., negks] = re - 1j * im
    val[..., half] = fv[..., -1]
    if not isinstance(free, Node):
        return val

    def bwd(g):
        gf = np.zeros(fv.shape, dtype=float)
        gf[..., 0] = g[..., 0].real
        gf[..., 1:-1:2] = g[..., ks].real + g[..., negks].real
        gf[..., 2:-1:2] = g[..., ks].imag - g[..., negks].imag
        gf[..., -1] = g[..., half].real
        return (gf,)

    return Node(val, (free,), bwd)


def hermitian_restrict_1d(spec, n):
    """Inverse of hermitian_expand_1d on Hermitian input (numpy only)."""
    half, ks, _ = _layout_1d(n)
    spec = np.asarray(spec)
    out = np.zeros(spec.shape[:-1] + (n,), dtype=float)
    out[..., 0] = spec[..., 0].real
    out[..., 1:-1:2] = spec[..., ks].real
    out[..., 2:-1:2] = spec[..., ks].imag
    out[..., -1] = spec[..., half].real
    return out


def _layout_2d(n):
    if n not in _LAYOUT_2D:
        half = n // 2
        selfs = np.array([[0, 0], [0, half], [half, 0], [half, half]])
        canon_i, canon_j, part_i, part_j = [], [], [], []
        seen = set()
        for i in range(n):
            for j in range(n):
                pi, pj = (-i) % n, (-j) % n
                if (i, j) == (pi, pj) or (i, j) in seen:
                    continue
                seen.add((i, j))
                seen.add((pi, pj))
                canon_i.append(i)
                canon_j.append(j)
                part_i.append(pi)
                part_j.append(pj)
        _LAYOUT_2D[n] = (
            selfs[:, 0],
            selfs[:, 1],
            np.array(canon_i),
            np.array(canon_j),
            np.array(part_i),
            np.array(part_j),
        )
    return _LAYOUT_2D[n]


def hermitian_expand_2d(free, n):
    """Real free modes (..., n*n) -> Hermitian spectrum (..., n, n).

    Layout: 4 self-conjugate slots first, then (Re, Im) per canonical pair.
    """
    si, sj, ci, cj, pi, pj = _layout_2d(n)
    fv = value_of(free)
    npair = ci.size
    re = fv[..., 4:4 + npair]
    im = fv[..., 4 + npair:]
    val = np.zeros(fv.shape[:-1] + (n, n), dtype=complex)
    val[..., si, sj] = fv[..., :4]
    val[..., ci, cj] = re + 1j * im
    val[..., pi, pj] = re - 1j * im
    if not isinstance(free, Node):
        return val

    def bwd(g):
        gf = np.zeros(fv.shape, dtype=float)
        gf[..., :4] = g[..., si, sj].real
        gf[..., 4:4 + npair] = g[..., ci, cj].real + g[..., pi, pj].real
        gf[..., 4 + npair:] = g[..., ci, cj].imag - g[..., pi, pj].imag
        return (gf,)

    return Node(val, (free,), bwd)


def hermitian_restrict_2d(spec, n):
    """Inverse of hermitian_expand_2d on Hermitian input (numpy only)."""
    si, sj, ci, cj, _, _ = _layout_2d(n)
    spec = np.asarray(spec)
    npair = ci.size
    out = np.zeros(spec.shape[:-2] + (n * n,), dtype=float)
    out[..., :4] = spec[..., si, sj].real
    out[..., 4:4 + npair] = spec[..., ci, cj].real
    out[..., 4 + npair:] = spec[..., ci, cj].imag
    return out
