"""Per-user channel feature extractor.

A 4-layer fully connected network maps the real-stacked received pilot
(width 2L) to a D-dimensional feature vector.  Hidden layers use batch
normalization followed by Mish; the output layer is Tanh, so features live
strictly inside (-1, 1).  One parameter set serves every user.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .layers import Dense


class FeatureExtractor:

    def __init__(self, rng: np.random.Generator, pilot_len: int, feature_dim: int,
                 hidden=(128, 64, 32)):
        self.pilot_len = pilot_len
        self.feature_dim = feature_dim
        self.hidden = tuple(hidden)
        widths = [2 * pilot_len, *hidden, feature_dim]
        # hidden layers are bias-free: batch norm's shift immediately absorbs
        # (and zeroes the gradient of) any preceding bias
        self.layers = [Dense(rng, widths[i], widths[i + 1], bias=(i == len(widths) - 2))
                       for i in range(len(widths) - 1)]
        self.bn = [ad.BatchNormState(w) for w in hidden]

    def params(self) -> list[ad.Node]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        for st in self.bn:
            out.extend(st.params())
        return out

    def extract(self, y_re: ad.Node, y_im: ad.Node, training: bool = False,
                update_stats: bool = True) -> ad.Node:
        """Map received pilots (..., L) to features (..., D)."""
        x = ad.concat([y_re, y_im], axis=-1)
        for i, layer in enumerate(self.layers[:-1]):
            x = layer(x)
            x = ad.batch_norm(x, self.bn[i], training, update_stats)
            x = ad.mish(x)
        return ad.tanh(self.layers[-1](x))
