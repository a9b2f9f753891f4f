"""Dense tensor kernels with a fixed accumulation order.

Everything is float64 and row-major. The contraction loops in `matmul` and
`conv2d` run strictly left-to-right over the reduced axis (ascending k for
matmul, ascending (c_in, ky, kx) for conv2d), so repeated runs are bitwise
reproducible and the sparse event kernel -- which replays the same order over
nonzero entries only -- can be checked for bitwise equality against them.

The backward helpers (`*_grad`) have no ordering contract; they only need to
be deterministic, which numpy's einsum (optimize left off) guarantees.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


def as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def matmul(a, b) -> np.ndarray:
    """Matrix product of (m, k) by (k, n) accumulating over k in ascending order."""
    a = as_f64(a)
    b = as_f64(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    for kk in range(k):
        out += a[:, kk : kk + 1] * b[kk, :]
    return out


def conv_output_size(extent: int, kernel: int, stride: int, padding: int) -> int:
    return (extent + 2 * padding - kernel) // stride + 1


def _check_conv_args(c_in, h, w, kernels, stride, padding):
    if kernels.ndim != 4 or kernels.shape[2] != kernels.shape[3]:
        raise DimensionError(f"kernels must be (C_out, C_in, k, k), got {kernels.shape}")
    if kernels.shape[1] != c_in:
        raise DimensionError(
            f"kernel input channels {kernels.shape[1]} != input channels {c_in}"
        )
    if stride < 1:
        raise DimensionError(f"stride must be >= 1, got {stride}")
    k = kernels.shape[2]
    if k > h + 2 * padding or k > w + 2 * padding:
        raise DimensionError(
            f"kernel size {k} exceeds padded input {h + 2 * padding}x{w + 2 * padding}"
        )


def pad_spatial(x: np.ndarray, padding: int) -> np.ndarray:
    """Zero-pad the two trailing (spatial) axes of a (..., H, W) array."""
    if padding == 0:
        return x
    shape = x.shape[:-2] + (x.shape[-2] + 2 * padding, x.shape[-1] + 2 * padding)
    out = np.zeros(shape, dtype=x.dtype)
    out[..., padding : padding + x.shape[-2], padding : padding + x.shape[-1]] = x
    return out


def conv2d(inp, kernels, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlation with zero padding.

    `inp` is (C_in, H, W) or batched (B, C_in, H, W); `kernels` is
    (C_out, C_in, k, k). Output spatial size is
    floor((H + 2*padding - k) / stride) + 1. Each output element accumulates
    its k*k*C_in products in ascending (c_in, ky, kx) order.
    """
    x = as_f64(inp)
    kernels = as_f64(kernels)
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    if x.ndim != 4:
        raise DimensionError(f"conv2d input must be 3-D or 4-D, got {inp.shape}")
    batch, c_in, h, w = x.shape
    _check_conv_args(c_in, h, w, kernels, stride, padding)
    c_out, _, k, _ = kernels.shape
    h_out = conv_output_size(h, k, stride, padding)
    w_out = conv_output_size(w, k, stride, padding)

    xp = pad_spatial(x, padding)
    out = np.zeros((batch, c_out, h_out, w_out), dtype=np.float64)
    for c in range(c_in):
        for ky in range(k):
            for kx in range(k):
                patch = xp[:, c, ky : ky + stride * h_out : stride, kx : kx + stride * w_out : stride]
                out += patch[:, None, :, :] * kernels[None, :, c, ky, kx, None, None]
    return out[0] if squeeze else out


def conv2d_input_grad(grad_out, kernels, stride: int, padding: int, input_hw) -> np.ndarray:
    """Gradient of conv2d w.r.t. its input (transposed correlation)."""
    g = as_f64(grad_out)
    kernels = as_f64(kernels)
    h, w = input_hw
    batch = g.shape[0]
    c_out, c_in, k, _ = kernels.shape
    h_out, w_out = g.shape[2], g.shape[3]
    gxp = np.zeros((batch, c_in, h + 2 * padding, w + 2 * padding), dtype=np.float64)
    for c in range(c_in):
        for ky in range(k):
            for kx in range(k):
                gxp[:, c, ky : ky + stride * h_out : stride, kx : kx + stride * w_out : stride] += np.einsum(
                    "bohw,o->bhw", g, kernels[:, c, ky, kx]
                )
    return gxp[:, :, padding : padding + h, padding : padding + w]


def conv2d_kernel_grad(inp, grad_out, stride: int, padding: int, k: int) -> np.ndarray:
    """Gradient of conv2d w.r.t. its kernels, summed over the batch."""
    x = as_f64(inp)
    g = as_f64(grad_out)
    c_in = x.shape[1]
    c_out = g.shape[1]
    h_out, w_out = g.shape[2], g.shape[3]
    xp = pad_spatial(x, padding)
    gk = np.zeros((c_out, c_in, k, k), dtype=np.float64)
    for c in range(c_in):
        for ky in range(k):
            for kx in range(k):
                patch = xp[:, c, ky : ky + stride * h_out : stride, kx : kx + stride * w_out : stride]
                gk[:, c, ky, kx] = np.einsum("bohw,bhw->o", g, patch)
    return gk


def require_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} contains non-finite values")
