"""Learnable downlink pilot matrix and the simulated pilot reception phase.

The pilot weights act like a bias-free single-layer complex network applied
to the channel; every column is projected back onto the per-column power
constraint after each optimizer update.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .channels import complex_awgn


class PilotMatrix:
    """Complex M x L pilot weights as paired real parameter tensors."""

    def __init__(self, rng: np.random.Generator, m_antennas: int, pilot_len: int,
                 power: float = 1.0):
        self.m_antennas = m_antennas
        self.pilot_len = pilot_len
        self.power = power
        scale = 1.0 / np.sqrt(2.0)
        self.x_re = ad.parameter(scale * rng.standard_normal((m_antennas, pilot_len)))
        self.x_im = ad.parameter(scale * rng.standard_normal((m_antennas, pilot_len)))
        self.normalize()

    def params(self) -> list[ad.Node]:
        return [self.x_re, self.x_im]

    def normalize(self) -> None:
        """Project every column onto norm sqrt(P), preserving direction."""
        re, im = normalize_pilot(self.x_re.value, self.x_im.value, self.power)
        self.x_re.value = re
        self.x_im.value = im

    def column_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.x_re.value**2 + self.x_im.value**2, axis=0))


def normalize_pilot(x_re: np.ndarray, x_im: np.ndarray, power: float):
    """Rescale each column of X = x_re + j x_im to squared norm ``power``."""
    norms = np.sqrt(np.sum(x_re * x_re + x_im * x_im, axis=0))
    if np.any(norms == 0.0):
        raise ValueError("pilot has a zero column (degenerate initialization)")
    scale = np.sqrt(power) / norms
    return x_re * scale, x_im * scale


def receive_pilot(h: np.ndarray, pilot: PilotMatrix, noise_power: float,
                  rng: np.random.Generator | None = None,
                  noise: np.ndarray | None = None):
    """Simulate the received pilot row y = h^H X + n^H for a batch of channels.

    The L entries of that row vector are returned directly (so an identity
    pilot yields conj(h)); consumers that need X^H h conjugate the result.
    ``h`` has shape (..., M) complex; the result is a pair of (..., L) nodes,
    differentiable in the pilot weights (noise enters as a constant).  Pass
    ``noise`` explicitly to pin the draw; otherwise it is sampled from ``rng``
    (zero when both are omitted or noise_power == 0).
    """
    if noise_power < 0:
        raise ValueError("noise power must be >= 0")
    h = np.asarray(h, dtype=np.complex128)
    out_shape = h.shape[:-1] + (pilot.pilot_len,)
    if noise is None:
        if noise_power > 0 and rng is not None:
            noise = complex_awgn(rng, out_shape, noise_power)
        else:
            noise = np.zeros(out_shape, dtype=np.complex128)

    h_re = ad.constant(h.real)
    h_im = ad.constant(h.imag)
    # row entries sum_m conj(h_m) X_{m,l}
    y_re = ad.matmul(h_re, pilot.x_re) + ad.matmul(h_im, pilot.x_im)
    y_im = ad.matmul(h_re, pilot.x_im) - ad.matmul(h_im, pilot.x_re)
    return y_re + ad.constant(noise.real), y_im + ad.constant(noise.imag)
