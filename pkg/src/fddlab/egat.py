"""Edge-based graph attention network for multi-user precoding.

Every (user, antenna) edge of the bipartite user/antenna graph carries a
d-dimensional state.  An initialization FCN lifts per-edge feature chunks to
states, a stack of attention-weighted message-passing layers refines them,
and a readout FCN emits the real/imaginary precoder entry per edge, followed
by a Frobenius power normalization.  All functions are shared across edges,
so one parameter set serves any number of users.

Neighbor aggregations use order-canonical sums (see ``autodiff.sorted_sum``),
which makes user- and antenna-permutation equivariance hold bit-exactly.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .layers import Dense


class EgatParams:
    """Shared edge functions: init FCN f0, per-layer linear maps f1..f5,
    readout FCN, and the aggregation weights alpha/beta."""

    def __init__(self, rng: np.random.Generator, feature_dim: int, m_antennas: int,
                 state_dim: int = 16, init_hidden: int = 64, out_hidden: int = 64,
                 n_layers: int = 3, alpha: float = 0.1, beta: float = 0.1):
        if feature_dim % m_antennas != 0:
            raise ValueError(
                f"feature dim {feature_dim} not divisible by antenna count {m_antennas}")
        self.feature_dim = feature_dim
        self.m_antennas = m_antennas
        self.state_dim = state_dim
        self.n_layers = n_layers
        self.alpha = alpha
        self.beta = beta
        chunk = feature_dim // m_antennas
        self.f0 = [Dense(rng, chunk, init_hidden), Dense(rng, init_hidden, state_dim)]
        # f1..f5 are bias-free so that a zero grid maps to a zero grid
        self.layers = [
            {name: Dense(rng, state_dim, state_dim, bias=False)
             for name in ("f1", "f2", "f3", "f4", "f5")}
            for _ in range(n_layers)
        ]
        self.f_out = [Dense(rng, state_dim, out_hidden), Dense(rng, out_hidden, 2)]

    def params(self) -> list[ad.Node]:
        out = []
        for layer in self.f0:
            out.extend(layer.params())
        for maps in self.layers:
            for name in ("f1", "f2", "f3", "f4", "f5"):
                out.extend(maps[name].params())
        for layer in self.f_out:
            out.extend(layer.params())
        return out


def init_edges(params: EgatParams, v_hat: ad.Node) -> ad.Node:
    """Lift features (..., K, D) to an edge-state grid (..., K, M, d).

    Feature vectors are split into M contiguous chunks of D/M entries; chunk
    m seeds edge (k, m) through the shared two-layer FCN.
    """
    shape = v_hat.value.shape
    m = params.m_antennas
    chunked = ad.reshape(v_hat, shape[:-1] + (m, shape[-1] // m))
    h = ad.mish(params.f0[0](chunked))
    return ad.mish(params.f0[1](h))


def attention(params: EgatParams, grid: ad.Node, layer: int) -> ad.Node:
    """Pairwise user attention a[k, j] = mean_m f4(z[k, m]) * f5(z[j, m]).

    Returns the full (..., K, K, d) tensor; the self pair (k, k) is masked
    out by the caller.
    """
    maps = params.layers[layer]
    f4 = maps["f4"](grid)
    f5 = maps["f5"](grid)
    b, k, m, d = f4.value.shape
    prod = ad.mul(ad.reshape(f4, (b, k, 1, m, d)), ad.reshape(f5, (b, 1, k, m, d)))
    return ad.mul(ad.sorted_sum(prod, axis=3), ad.constant(1.0 / m))


def _offdiag_mask(k: int) -> np.ndarray:
    return (1.0 - np.eye(k)).reshape(1, k, k, 1)


def update_layer(params: EgatParams, grid: ad.Node, layer: int) -> ad.Node:
    """One message-passing step over the edge grid (..., K, M, d)."""
    maps = params.layers[layer]
    b, k, m, d = grid.value.shape
    own = maps["f1"](grid)

    # same-user messages from the other antennas: sum over all minus self
    f2 = maps["f2"](grid)
    antenna_sum = ad.sorted_sum(f2, axis=2, keepdims=True)
    cross_antenna = ad.mul(ad.sub(antenna_sum, f2), ad.constant(params.alpha / m))

    # other-user messages on the same antenna, weighted by attention
    coeff = ad.mul(attention(params, grid, layer), ad.constant(_offdiag_mask(k)))
    f3 = maps["f3"](grid)
    weighted = ad.mul(ad.reshape(coeff, (b, k, k, 1, d)), ad.reshape(f3, (b, 1, k, m, d)))
    cross_user = ad.mul(ad.sorted_sum(weighted, axis=2), ad.constant(params.beta))

    return ad.mish(ad.add(ad.add(own, cross_antenna), cross_user))


def finalize(params: EgatParams, grid: ad.Node, power: float):
    """Read out per-edge complex entries and normalize ||W||_F^2 to P.

    Returns (w_re, w_im) with shape (..., K, M): entry (k, m) is the antenna-m
    coefficient of user k's precoding vector.
    """
    h = ad.mish(params.f_out[0](grid))
    out = params.f_out[1](h)
    w_re = out[..., 0]
    w_im = out[..., 1]
    b, k, m = w_re.value.shape
    edge_power = ad.add(ad.mul(w_re, w_re), ad.mul(w_im, w_im))
    total = ad.sorted_sum(ad.reshape(edge_power, (b, k * m)), axis=1, keepdims=True)
    if np.any(total.value == 0.0):
        raise ValueError("degenerate precoder: all-zero output before normalization")
    scale = ad.reshape(ad.div(ad.constant(np.sqrt(power)), ad.sqrt(total)), (b, 1, 1))
    return ad.mul(w_re, scale), ad.mul(w_im, scale)


def precode(params: EgatParams, v_hat: ad.Node, power: float):
    """Full map from reconstructed features (..., K, D) to the precoder."""
    grid = init_edges(params, v_hat)
    for g in range(params.n_layers):
        grid = update_layer(params, grid, g)
    return finalize(params, grid, power)


def precoder_matrix(w_re: np.ndarray, w_im: np.ndarray) -> np.ndarray:
    """Convert (..., K, M) real pairs to the complex (..., M, K) matrix."""
    w = np.asarray(w_re) + 1j * np.asarray(w_im)
    return np.swapaxes(w, -1, -2)
