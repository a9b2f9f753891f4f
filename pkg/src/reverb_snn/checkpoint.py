"""Binary checkpoint format.

Layout (all multi-byte integers little-endian, reals 64-bit IEEE-754):

    magic           4s   "RVRB"
    version         u32  (currently 1)
    form            u8   0 = trained, 1 = inference (amplitude-folded)
    mode            u8   0 = vanilla, 1 = reverb, 2 = reverb-learnable
    timesteps       u32
    tau             f64
    v_th            f64  base threshold (folded layers derive theirs from it)
    input ndim      u8, then u32 per axis
    num_classes     u32
    layer count     u32
    per layer:
      kind, binarize, learn_alpha, has_affine, neuron_mode   5 x u8
      stride, padding                                        2 x u32
      weight ndim   u8, then u32 per axis
      weights: trained form or real-weight layer -> raw f64;
               inference-form binarized layer    -> 1 bit per weight,
               LSB-first within each byte over row-major order, bit 1 => +1
      alpha         f64 per output channel
      gamma, beta   f64 per output channel (only when has_affine)
      scale         f64 per output channel (only when neuron_mode = scaled)

Round-trips are bitwise lossless: reals are stored raw and inference-form
binarized weights are exactly +/-1, which the sign bit reproduces.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ParseError, StateError
from .layers import CONV, DENSE, BinaryLayer
from .network import MODES, Network
from .neuron import FireMode, NeuronParams
from .numerics import as_f64

MAGIC = b"RVRB"
VERSION = 1

_KINDS = (DENSE, CONV)
_FIRE_MODES = (FireMode.BINARY, FireMode.REAL, FireMode.SCALED_REAL)


def _net_base_params(net: Network) -> tuple[float, float]:
    """Network-wide tau and base (pre-fold) scalar threshold."""
    tau = net.neurons[0].tau
    v_th = 0.0
    for nrn in net.neurons:
        if nrn.tau != tau:
            raise StateError("checkpoint format requires a network-wide tau")
        if nrn.mode is not FireMode.SCALED_REAL:
            v = nrn.v_th
            if isinstance(v, np.ndarray):
                raise StateError("unfolded layers must carry a scalar threshold")
            v_th = float(v)
    return tau, v_th


def save_checkpoint(net: Network, path) -> None:
    buf = bytearray()
    tau, v_th = _net_base_params(net)
    buf += struct.pack("<4sIBBIdd", MAGIC, VERSION, int(net.inference_form),
                       MODES.index(net.mode), net.timesteps, tau, v_th)
    buf += struct.pack("<B", len(net.input_shape))
    buf += struct.pack(f"<{len(net.input_shape)}I", *net.input_shape)
    buf += struct.pack("<II", net.num_classes, len(net.layers))
    for layer, nrn in zip(net.layers, net.neurons):
        buf += struct.pack(
            "<5B2I",
            _KINDS.index(layer.kind),
            int(layer.binarize),
            int(layer.learn_alpha),
            int(layer.has_affine),
            _FIRE_MODES.index(nrn.mode),
            layer.stride,
            layer.padding,
        )
        w = layer.w_latent
        buf += struct.pack("<B", w.ndim)
        buf += struct.pack(f"<{w.ndim}I", *w.shape)
        if net.inference_form and layer.binarize:
            if not np.all(np.abs(w) == 1.0):
                raise StateError("inference-form binarized weights must be exactly +/-1")
            bits = (w.reshape(-1) > 0).astype(np.uint8)
            buf += np.packbits(bits, bitorder="little").tobytes()
        else:
            buf += w.tobytes()
        buf += layer.alpha.tobytes()
        if layer.has_affine:
            buf += layer.affine_gamma.tobytes()
            buf += layer.affine_beta.tobytes()
        if nrn.mode is FireMode.SCALED_REAL:
            buf += nrn.scale.tobytes()
    Path(path).write_bytes(bytes(buf))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ParseError(
                f"unexpected end of checkpoint: needed {n} bytes", offset=self.pos
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def f64(self, count: int) -> np.ndarray:
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8", count=count).astype(np.float64)


def load_checkpoint(path) -> Network:
    r = _Reader(Path(path).read_bytes())
    magic, version, form, mode_id, timesteps, tau, v_th = r.unpack("4sIBBIdd")
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", offset=4)
    if mode_id >= len(MODES):
        raise ParseError(f"unknown mode id {mode_id}", offset=9)
    (in_ndim,) = r.unpack("B")
    input_shape = tuple(r.unpack(f"{in_ndim}I"))
    num_classes, n_layers = r.unpack("II")

    layers: list[BinaryLayer] = []
    neurons: list[NeuronParams] = []
    for _ in range(n_layers):
        kind_id, binarize, learn_alpha, has_affine, fire_id, stride, padding = r.unpack("5B2I")
        if kind_id >= len(_KINDS) or fire_id >= len(_FIRE_MODES):
            raise ParseError("corrupt layer header", offset=r.pos)
        (w_ndim,) = r.unpack("B")
        w_shape = tuple(r.unpack(f"{w_ndim}I"))
        n_weights = int(np.prod(w_shape))
        if form and binarize:
            packed = np.frombuffer(r.take((n_weights + 7) // 8), dtype=np.uint8)
            bits = np.unpackbits(packed, count=n_weights, bitorder="little")
            w = np.where(bits == 1, 1.0, -1.0).reshape(w_shape)
        else:
            w = r.f64(n_weights).reshape(w_shape)
        out_channels = w_shape[0]
        alpha = r.f64(out_channels)
        layer = BinaryLayer(
            w_latent=w, alpha=alpha, binarize=bool(binarize), kind=_KINDS[kind_id],
            stride=stride, padding=padding, learn_alpha=bool(learn_alpha),
        )
        if has_affine:
            layer.affine_gamma = r.f64(out_channels)
            layer.affine_beta = r.f64(out_channels)
        fire_mode = _FIRE_MODES[fire_id]
        if fire_mode is FireMode.SCALED_REAL:
            scale = r.f64(out_channels)
            # Reconstruct the folded per-channel threshold exactly as
            # fold_alpha computed it from the base scalar.
            thr = as_f64(np.atleast_1d(v_th)) / scale if v_th != 0 else v_th
            neurons.append(NeuronParams(tau=tau, v_th=thr, mode=fire_mode, scale=scale))
        else:
            neurons.append(NeuronParams(tau=tau, v_th=v_th, mode=fire_mode))
        layers.append(layer)
    if r.pos != len(r.data):
        raise ParseError(f"{len(r.data) - r.pos} trailing bytes", offset=r.pos)
    return Network(
        layers=layers, neurons=neurons, timesteps=timesteps,
        input_shape=input_shape, num_classes=num_classes,
        mode=MODES[mode_id], inference_form=bool(form),
    )
