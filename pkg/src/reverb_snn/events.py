"""Event-driven, multiplication-free inference kernel and the operation/energy
accounting around it.

A firing layer's nonzero spikes become an EventList; a folded binarized layer
consumes events by pure accumulation: weight +1 adds the spike value, weight
-1 subtracts it. No weight-activation multiply exists on that path, and the
accumulation visits events in ascending source order -- the same order the
dense reference kernels reduce in -- so the result is bitwise equal to the
dense product (adding a zero term is exact in IEEE-754, so skipping silent
neurons changes nothing).

Operation counts follow the synaptic-operation model: binarized (middle)
layers cost one SOP per accumulate, which over a dataset equals
s * T * A with s the mean input sparsity and A the equivalent dense-network
addition count; the real-weight encoder and classifier cost one FLOP per
multiply-accumulate, charged once per timestep. Energy uses 12.5 pJ per FLOP
and 77 fJ per SOP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ModeError, StateError
from .layers import CONV, DENSE, BinaryLayer
from .network import Network
from .neuron import LifState, channel_axis, fire, membrane_update
from .numerics import as_f64, conv2d, conv_output_size, matmul

FLOP_JOULES = 12.5e-12
SOP_JOULES = 77e-15


@dataclass
class EventList:
    """Nonzero spikes of one layer at one timestep, in ascending flat index
    order over the source layer's row-major output."""

    indices: np.ndarray
    values: np.ndarray
    layer_id: int = -1
    t: int = 0

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = as_f64(self.values)
        if self.indices.shape != self.values.shape:
            raise DimensionError("indices and values must have equal length")
        if np.any(self.values == 0.0):
            raise ValueError("EventList must not contain zero-valued events")
        if self.indices.size and np.any(np.diff(self.indices) <= 0):
            raise ValueError("event indices must be strictly increasing")

    def __len__(self) -> int:
        return int(self.indices.size)


def events_from_spikes(spikes: np.ndarray, layer_id: int = -1, t: int = 0) -> EventList:
    """Extract the nonzero entries of one sample's spike tensor, row-major."""
    flat = as_f64(spikes).reshape(-1)
    idx = np.nonzero(flat)[0]
    return EventList(indices=idx, values=flat[idx], layer_id=layer_id, t=t)


@dataclass
class OpCounter:
    """Instruction-level audit of the inference path."""

    weight_activation_mults: int = 0
    accumulations: int = 0


def addition_only_forward(layer: BinaryLayer, events: EventList,
                          input_shape=None, counter: OpCounter | None = None) -> np.ndarray:
    """Synaptic currents of a folded binarized layer, by accumulation only.

    Every event (j, o) adds +o to outputs wired with weight +1 and -o to
    outputs wired with -1. Requires the layer to be folded: binarized, unit
    amplitude, weights exactly in {-1, +1}. Result equals the dense reference
    kernel bitwise (single sample, no batch axis).
    """
    if not layer.binarize:
        raise ModeError("addition-only path requires a binarized layer")
    if not np.all(layer.alpha == 1.0):
        raise ModeError("layer amplitude not folded (alpha != 1)")
    w = layer.w_latent
    if not np.all(np.abs(w) == 1.0):
        raise ModeError("layer weights are not pure {-1,+1}; fold the network first")

    if layer.kind == DENSE:
        n_out, n_in = w.shape
        plus = w > 0
        out = np.zeros(n_out, dtype=np.float64)
        for j, o in zip(events.indices, events.values):
            if j >= n_in:
                raise DimensionError(f"event index {j} outside layer input {n_in}")
            p = plus[:, j]
            out[p] += o
            out[~p] -= o
            if counter is not None:
                counter.accumulations += n_out
        return out

    if input_shape is None or len(input_shape) != 3:
        raise DimensionError("conv event kernel needs the (C, H, W) input shape")
    c_in, h, win = input_shape
    c_out, _, k, _ = w.shape
    stride, padding = layer.stride, layer.padding
    h_out = conv_output_size(h, k, stride, padding)
    w_out = conv_output_size(win, k, stride, padding)
    plus = w > 0
    out = np.zeros((c_out, h_out, w_out), dtype=np.float64)
    for flat, o in zip(events.indices, events.values):
        c, rem = divmod(int(flat), h * win)
        y, x = divmod(rem, win)
        yp, xp = y + padding, x + padding
        for ky in range(k):
            oy, ry = divmod(yp - ky, stride)
            if ry or not 0 <= oy < h_out:
                continue
            for kx in range(k):
                ox, rx = divmod(xp - kx, stride)
                if rx or not 0 <= ox < w_out:
                    continue
                p = plus[:, c, ky, kx]
                out[p, oy, ox] += o
                out[~p, oy, ox] -= o
                if counter is not None:
                    counter.accumulations += c_out
    return out


@dataclass
class SparsityMeter:
    """Accumulates nonzero-spike counts per middle layer over a dataset pass.

    Sparsity of layer l is (nonzero input spikes) / (input neuron-timestep
    opportunities); the network mean weights each layer by its addition
    count A unless weighted=False.
    """

    nonzero: dict = field(default_factory=dict)
    total: dict = field(default_factory=dict)

    def record(self, layer_id: int, spikes_in: np.ndarray) -> None:
        flat = np.asarray(spikes_in).reshape(-1)
        self.nonzero[layer_id] = self.nonzero.get(layer_id, 0) + int(np.count_nonzero(flat))
        self.total[layer_id] = self.total.get(layer_id, 0) + flat.size

    def per_layer(self) -> dict[int, float]:
        if not self.total:
            raise StateError("no forward pass recorded")
        return {l: self.nonzero[l] / self.total[l] for l in sorted(self.total)}

    def mean(self, additions: dict[int, int], weighted: bool = True) -> float:
        per = self.per_layer()
        if not weighted:
            return float(np.mean(list(per.values())))
        num = sum(per[l] * additions[l] for l in per)
        den = sum(additions[l] for l in per)
        return num / den


def layer_additions(net: Network) -> dict[int, int]:
    """Equivalent dense-network addition count A per middle (SOP) layer."""
    shapes = net.layer_output_shapes()
    out = {}
    cur = tuple(net.input_shape)
    for l, layer in enumerate(net.layers):
        if 0 < l < len(net.layers) - 1:
            if layer.kind == DENSE:
                out[l] = layer.w_latent.shape[0] * layer.w_latent.shape[1]
            else:
                c_out, c_in, k, _ = layer.w_latent.shape
                _, h_o, w_o = shapes[l]
                out[l] = c_out * h_o * w_o * c_in * k * k
        cur = shapes[l]
    return out


def count_flops(net: Network, timesteps: int | None = None) -> int:
    """Multiply-accumulates of the real-weight encoder and classifier, charged
    once per timestep presentation."""
    T = net.timesteps if timesteps is None else timesteps
    shapes = net.layer_output_shapes()
    total = 0
    for l in (0, len(net.layers) - 1):
        layer = net.layers[l]
        if layer.kind == DENSE:
            total += layer.w_latent.shape[0] * layer.w_latent.shape[1]
        else:
            c_out, c_in, k, _ = layer.w_latent.shape
            _, h_o, w_o = shapes[l]
            total += c_out * h_o * w_o * c_in * k * k
    return total * T


def count_sops(net: Network, sparsity: float, timesteps: int | None = None) -> float:
    """s * T * A over the middle (addition-only) layers."""
    T = net.timesteps if timesteps is None else timesteps
    return sparsity * T * sum(layer_additions(net).values())


@dataclass
class EnergyReport:
    flops: float
    sops: float
    sparsity: float
    sparsity_per_layer: dict
    timesteps: int
    energy_joules: float

    def as_dict(self) -> dict:
        return {
            "flops": self.flops,
            "sops": self.sops,
            "sparsity": self.sparsity,
            "sparsity_per_layer": {str(k): v for k, v in self.sparsity_per_layer.items()},
            "timesteps": self.timesteps,
            "energy_joules": self.energy_joules,
        }


def estimate_energy(flops: float, sops: float, sparsity: float = 0.0,
                    sparsity_per_layer: dict | None = None,
                    timesteps: int = 0) -> EnergyReport:
    """Energy in joules: flops * 12.5 pJ + sops * 77 fJ."""
    if flops < 0 or sops < 0:
        raise ValueError("operation counts must be non-negative")
    return EnergyReport(
        flops=flops,
        sops=sops,
        sparsity=sparsity,
        sparsity_per_layer=sparsity_per_layer or {},
        timesteps=timesteps,
        energy_joules=flops * FLOP_JOULES + sops * SOP_JOULES,
    )


def _per_channel_view(vec: np.ndarray, like: np.ndarray) -> np.ndarray:
    shape = [1] * like.ndim
    shape[channel_axis(like)] = vec.shape[0]
    return vec.reshape(shape)


def event_forward(net: Network, sample: np.ndarray, timesteps: int | None = None,
                  counter: OpCounter | None = None,
                  meter: SparsityMeter | None = None) -> list[np.ndarray]:
    """Run one sample through an inference-form network, using the
    addition-only kernel for every folded binarized layer.

    Returns the per-timestep outputs of the last layer. The encoder and
    classifier keep their real weights and run through the dense kernels;
    middle layers of a vanilla network (never binarized) do too, but their
    input sparsity is still recorded since binary spikes make them
    addition-only as well.
    """
    sample = as_f64(sample)
    if tuple(sample.shape) != tuple(net.input_shape):
        raise DimensionError(
            f"sample shape {sample.shape} does not match network input {net.input_shape}"
        )
    T = net.timesteps if timesteps is None else timesteps
    last = len(net.layers) - 1
    states: list = [None] * len(net.layers)
    outputs = []
    for t in range(T):
        x = sample
        for l, (layer, nrn) in enumerate(zip(net.layers, net.neurons)):
            if layer.kind == DENSE and x.ndim > 1:
                x = x.reshape(-1)
            middle = 0 < l < last
            if middle and meter is not None:
                meter.record(l, x)
            if middle and layer.binarize:
                events = events_from_spikes(x, layer_id=l - 1, t=t)
                current = addition_only_forward(
                    layer, events,
                    input_shape=x.shape if layer.kind == CONV else None,
                    counter=counter,
                )
            elif layer.kind == DENSE:
                current = matmul(x[None, :], layer.w_latent.T)[0]
            else:
                current = conv2d(x, layer.w_latent, layer.stride, layer.padding)
            if layer.has_affine:
                current = _per_channel_view(layer.affine_gamma, current) * current \
                    + _per_channel_view(layer.affine_beta, current)
            state = states[l] if states[l] is not None else LifState.zeros(current.shape)
            state = membrane_update(state, current, nrn)
            if l == last:
                x, states[l] = state.u, state
            else:
                x, states[l] = fire(state, nrn)
        outputs.append(x)
    return outputs


def evaluate_event_driven(net: Network, x, y, timesteps: int | None = None):
    """Top-1 accuracy plus a measured per-image EnergyReport over a test set.

    SOPs are the accumulations the kernel actually performed; FLOPs are the
    encoder/classifier MAC count charged per timestep.
    """
    if not net.inference_form:
        raise ModeError("event-driven evaluation requires an inference-form network")
    x = as_f64(x)
    y = np.asarray(y)
    T = net.timesteps if timesteps is None else timesteps
    counter = OpCounter()
    meter = SparsityMeter()
    correct = 0
    for i in range(len(x)):
        outputs = event_forward(net, x[i], T, counter, meter)
        o = np.mean(np.stack(outputs, axis=0), axis=0)
        if int(np.argmax(o)) == int(y[i]):
            correct += 1
    additions = layer_additions(net)
    report = estimate_energy(
        flops=count_flops(net, T),
        sops=counter.accumulations / len(x),
        sparsity=meter.mean(additions),
        sparsity_per_layer=meter.per_layer(),
        timesteps=T,
    )
    return correct / len(x), report, counter


def evaluate_dense(net: Network, x, y, timesteps: int | None = None,
                   batch_size: int = 256):
    """Dense-path evaluation for trained-form networks: accuracy plus an
    EnergyReport with SOPs estimated as s * T * A from measured sparsity."""
    from .training import aggregate_output, forward_pass

    x = as_f64(x)
    y = np.asarray(y)
    T = net.timesteps if timesteps is None else timesteps
    meter = SparsityMeter()
    last = len(net.layers) - 1
    correct = 0
    for start in range(0, len(x), batch_size):
        xb = x[start : start + batch_size]
        outputs, cache = forward_pass(net, xb, T)
        o = aggregate_output(outputs)
        correct += int((o.argmax(axis=1) == y[start : start + batch_size]).sum())
        for t in range(T):
            for l in range(1, last):
                meter.record(l, cache.inputs[t][l])
    additions = layer_additions(net)
    sparsity = meter.mean(additions)
    report = estimate_energy(
        flops=count_flops(net, T),
        sops=count_sops(net, sparsity, T),
        sparsity=sparsity,
        sparsity_per_layer=meter.per_layer(),
        timesteps=T,
    )
    return correct / len(x), report
