"""Small dense-layer building block shared by the network modules."""
from __future__ import annotations

import numpy as np

from . import autodiff as ad


class Dense:
    """Affine map x @ W (+ b) with LeCun-scaled Gaussian initialization."""

    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int, bias: bool = True):
        self.n_in, self.n_out = n_in, n_out
        self.w = ad.parameter(rng.standard_normal((n_in, n_out)) / np.sqrt(n_in))
        self.b = ad.parameter(np.zeros(n_out)) if bias else None

    def __call__(self, x: ad.Node) -> ad.Node:
        out = ad.matmul(x, self.w)
        return ad.add(out, self.b) if self.b is not None else out

    def params(self) -> list[ad.Node]:
        return [self.w] if self.b is None else [self.w, self.b]
