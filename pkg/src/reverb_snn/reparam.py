"""Post-training re-parameterization: strip the learned amplitude out of each
binarized layer's weights and re-apply it in the firing function.

A binarized layer computes u = tau*u + alpha_c * (sign(W) . o). Because
alpha_c > 0 is attached to the layer's own output channel c, the whole
membrane trajectory of that channel is linear in alpha_c between resets, so
dividing it out is exact: the folded layer integrates the pure-sign current
(additions only), gates at the rescaled threshold v_th / alpha_c (the gate
u >= v_th is equivalent to u/alpha_c >= v_th/alpha_c), and multiplies the
emitted spike by alpha_c at fire time. The emitted values -- and therefore
everything downstream -- are unchanged; with power-of-two amplitudes the
equality is exact even in floating point.

Note the amplitude must stay attached to the channel it scales. Folding a
per-output-channel amplitude into the *previous* layer's firing function is
only exact when the amplitude is constant, because diag(alpha) . W . o is
not W . diag(s) . o for any s; re-applying it at the owning layer's own
firing keeps the transformation exact for every threshold.
"""

from __future__ import annotations

import copy

import numpy as np

from .errors import DimensionError
from .layers import binarize_weights
from .network import Network
from .neuron import FireMode, NeuronParams
from .numerics import as_f64
from .training import aggregate_output, forward_pass


def fold_alpha(net: Network) -> Network:
    """Return the inference-form network with pure {-1,+1} binarized weights.

    Binarized layers with a non-unit amplitude move it into their firing
    scale (mode becomes scaled real) and divide their threshold by it per
    channel. Layers already at alpha == 1 are left untouched, so refolding a
    folded network is a no-op.
    """
    folded = copy.deepcopy(net)
    for l, layer in enumerate(folded.layers):
        if not layer.binarize:
            continue
        layer.w_latent = binarize_weights(layer.w_latent)
        if np.all(layer.alpha == 1.0):
            continue
        scale = layer.alpha.copy()
        layer.alpha = np.ones_like(scale)
        if layer.has_affine:
            # Membrane rescaling u -> u/alpha divides the additive shift too;
            # the multiplicative gamma commutes and stays put.
            layer.affine_beta = layer.affine_beta / scale
        nrn = folded.neurons[l]
        folded.neurons[l] = NeuronParams(
            tau=nrn.tau,
            v_th=as_f64(np.atleast_1d(nrn.v_th)) / scale if np.any(np.atleast_1d(nrn.v_th) != 0)
            else nrn.v_th,
            mode=FireMode.SCALED_REAL,
            scale=scale,
        )
    folded.inference_form = True
    return folded


def verify_equivalence(net: Network, inf_net: Network, probes: np.ndarray,
                       timesteps: int | None = None) -> float:
    """Max aggregated-output difference between the two networks over a probe
    batch, relative to the output magnitude (floored at 1)."""
    probes = as_f64(probes)
    if tuple(probes.shape[1:]) != tuple(net.input_shape):
        raise DimensionError(
            f"probe shape {probes.shape[1:]} does not match network input {net.input_shape}"
        )
    a = aggregate_output(forward_pass(net, probes, timesteps)[0])
    b = aggregate_output(forward_pass(inf_net, probes, timesteps)[0])
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))
