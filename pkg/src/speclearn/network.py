"""Coefficient-predicting networks: input function values in, spectral
coefficients for R time steps out.

Fourier-family outputs pass through the Hermitian free-mode expansion, so
reconstructed fields are real by construction.  Parameters live in one flat
float64 vector with a layout table, which is what the optimizer and the
checkpoint format see.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad

__all__ = [
    "LayerSpec",
    "NetworkParams",
    "default_arch",
    "init_params",
    "forward",
    "loss_and_grad",
    "segment_loss",
]


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv1d_circular | conv1d_zero | conv2d_circular | dense
    width: int
    kernel: int | None = None
    activation: str = "swish"

    def __post_init__(self):
        if self.kind not in ("conv1d_circular", "conv1d_zero", "conv2d_circular", "dense"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.width < 1:
            raise ValueError("width must be positive")
        if self.kind.startswith("conv"):
            if self.kernel is None or self.kernel % 2 == 0:
                raise ValueError("conv layers need an odd kernel size")
        if self.activation not in ("swish", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class NetworkParams:
    """Flat parameter vector plus the layout to unpack it."""

    flat: np.ndarray
    layout: list[tuple[int, tuple[int, ...]]]
    arch: tuple[LayerSpec, ...]
    in_shape: tuple[int, ...]
    out_shape: tuple[int, int]  # (R, free coefficient count)
    out_map: str  # identity | hermitian1d | hermitian2d

    def tensors(self) -> list[np.ndarray]:
        return [
            self.flat[off:off + int(np.prod(shape))].reshape(shape)
            for off, shape in self.layout
        ]

    def copy(self) -> "NetworkParams":
        return replace(self, flat=self.flat.copy())


def _plan_layers(arch, in_shape, out_shape):
    """Yield (kind, w_shape, b_shape) for every parametrized tensor pair."""
    plans = []
    if len(in_shape) == 1:
        feat = in_shape[0]
        channels = 1
        spatial = in_shape
    else:
        feat = int(np.prod(in_shape))
        channels = 1
        spatial = in_shape
    mode = "grid"  # grid = spatial layout alive; flat = dense features
    for spec in arch:
        if spec.kind == "dense":
            if mode == "grid":
                feat = channels * int(np.prod(spatial))
                mode = "flat"
            plans.append((spec, (spec.width, feat), (spec.width,)))
            feat = spec.width
        elif spec.kind in ("conv1d_circular", "conv1d_zero"):
            if mode == "flat" or len(spatial) != 1:
                raise ValueError("1D conv layer needs an unflattened 1D grid")
            plans.append((spec, (spec.width, channels, spec.kernel), (spec.width,)))
            channels = spec.width
        elif spec.kind == "conv2d_circular":
            if mode == "flat" or len(spatial) != 2:
                raise ValueError("2D conv layer needs an unflattened 2D grid")
            plans.append(
                (spec, (spec.width, channels, spec.kernel, spec.kernel), (spec.width,))
            )
            channels = spec.width
    if mode == "grid":
        feat = channels * int(np.prod(spatial))
    head_out = out_shape[0] * out_shape[1]
    head = LayerSpec(kind="dense", width=head_out, activation="identity")
    plans.append((head, (head_out, feat), (head_out,)))
    return plans


def init_params(
    arch,
    in_shape,
    out_shape,
    out_map,
    seed: int = 0,
) -> NetworkParams:
    """Variance-scaling fan-in Gaussian weights, zero biases, seeded."""
    arch = tuple(arch)
    plans = _plan_layers(arch, tuple(in_shape), tuple(out_shape))
    rng = np.random.Generator(np.random.Philox(key=(seed & (2**64 - 1), 0)))
    chunks, layout, off = [], [], 0
    for _, w_shape, b_shape in plans:
        fan_in = int(np.prod(w_shape[1:]))
        w = rng.standard_normal(w_shape) / np.sqrt(fan_in)
        b = np.zeros(b_shape)
        for t in (w, b):
            layout.append((off, t.shape))
            chunks.append(t.ravel())
            off += t.size
    return NetworkParams(
        flat=np.concatenate(chunks) if chunks else np.zeros(0),
        layout=layout,
        arch=arch,
        in_shape=tuple(in_shape),
        out_shape=tuple(out_shape),
        out_map=out_map,
    )


def default_arch(family: str, N: int, R: int):
    """Architecture, input shape, output shape and coefficient map for a
    family at its published width/depth."""
    k = 5
    if family == "diffusion_reaction":
        arch = tuple(
            LayerSpec("conv1d_zero", 50, k) for _ in range(5)
        )
        return arch, (N + 2,), (R, N), "identity"
    if family == "burgers":
        arch = tuple(LayerSpec("conv1d_circular", 32, k) for _ in range(3))
        return arch, (N,), (R, N), "hermitian1d"
    if family == "advection":
        arch = tuple(LayerSpec("conv1d_circular", 32, k) for _ in range(5))
        return arch, (N,), (R, N), "hermitian1d"
    if family == "convection_diffusion_bl":
        arch = tuple(LayerSpec("conv1d_zero", 32, k) for _ in range(5))
        return arch, (N + 2,), (R, N + 1), "identity"
    if family == "kse_2d":
        return (LayerSpec("dense", N * N),), (N, N), (R, N * N), "hermitian2d"
    if family == "nse_2d":
        return (LayerSpec("dense", N * N),), (N, N), (R, N * N), "hermitian2d"
    raise ValueError(f"unknown family {family!r}")


def _apply_layers(params: NetworkParams, x, tensors):
    """Shared forward pass; x is (P, *in_shape) array or Node."""
    plans = _plan_layers(params.arch, params.in_shape, params.out_shape)
    P = np.shape(ad.value_of(x))[0]
    mode = "grid"
    if len(params.in_shape) == 1:
        x = ad.reshape(x, (P, 1, params.in_shape[0]))
        channels = 1
    else:
        x = ad.reshape(x, (P, 1) + params.in_shape)
        channels = 1
    ti = 0
    for spec, _, _ in plans:
        w, b = tensors[ti], tensors[ti + 1]
        ti += 2
        if spec.kind == "dense":
            if mode == "grid":
                x = ad.reshape(x, (P, -1))
                mode = "flat"
            x = ad.affine(x, w, b)
        elif spec.kind == "conv1d_circular":
            x = ad.conv1d(x, w, b, padding="circular")
        elif spec.kind == "conv1d_zero":
            x = ad.conv1d(x, w, b, padding="zero")
        elif spec.kind == "conv2d_circular":
            x = ad.conv2d_circular(x, w, b)
        if spec.activation == "swish":
            x = ad.swish(x)
    if mode == "grid":
        x = ad.reshape(x, (P, -1))
    R, D = params.out_shape
    out = ad.reshape(x, (P, R, D))
    if params.out_map == "identity":
        return out
    if params.out_map == "hermitian1d":
        return ad.hermitian_expand_1d(out, D)
    if params.out_map == "hermitian2d":
        n = int(round(np.sqrt(D)))
        return ad.hermitian_expand_2d(out, n)
    raise ValueError(f"unknown output map {params.out_map!r}")


def forward(params: NetworkParams, inputs: np.ndarray) -> np.ndarray:
    """Batch of input functions (P, *in_shape) -> coefficients.

    Identity map: real (P, R, D).  Hermitian maps: complex spectra
    (P, R, N) or (P, R, N, N) that reconstruct to exactly real fields.
    """
    return _apply_layers(params, np.asarray(inputs), params.tensors())


def segment_loss(defect_fn, out, anchors):
    """Sum of squared defects over a segment.

    out: (P, R, D...) predicted coefficients (array or Node);
    anchors: (P, D...) frozen inherited snapshots (constants).
    """
    anchors = np.asarray(anchors)
    prev = ad.concat([anchors[:, None], out[:, :-1]], axis=1)
    return ad.abs2sum(defect_fn(prev, out))


def loss_and_grad(params: NetworkParams, inputs, anchors, defect_fn):
    """Loss and its exact reverse-mode gradient with respect to flat."""
    tensors = params.tensors()
    leaves = [ad.leaf(t) for t in tensors]
    out = _apply_layers(params, np.asarray(inputs), leaves)
    anchors = np.asarray(anchors)
    prev = ad.concat([anchors[:, None], out[:, :-1]], axis=1)
    defect = defect_fn(prev, out)
    loss = ad.abs2sum(defect)
    value = float(ad.value_of(loss))
    if not np.isfinite(value):
        d = np.asarray(ad.value_of(defect))
        finite = np.isfinite(d.reshape(d.shape[0], -1).view(float)).all(axis=1)
        bad = int(np.argmin(finite)) if not finite.all() else -1
        raise FloatingPointError(f"non-finite loss (first bad sample: {bad})")
    grads = ad.backward(loss, leaves)
    flat = np.empty_like(params.flat)
    for (off, shape), g in zip(params.layout, grads):
        flat[off:off + int(np.prod(shape))] = np.asarray(g, dtype=float).ravel()
    return value, flat
