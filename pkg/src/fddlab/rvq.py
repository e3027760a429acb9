"""Multi-tier residual vector quantization.

Encoding quantizes tier by tier: each tier picks the codeword nearest to the
running residual (lowest index on ties), emits its fixed-width index bits,
and subtracts the codeword.  Decoding sums the selected codewords, so the
reconstruction error is exactly the final residual.  Training uses a
noise-substitution surrogate that keeps the quantization error norm while
staying differentiable.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .clustering import lloyd


class RvqCodebook:
    """Ordered tiers of (D x 2^B_n) codeword matrices.

    Tiers may be parameter nodes (learnable) or plain constants; ``frozen``
    flags which tiers the trainer must leave untouched.
    """

    def __init__(self, tiers: list[ad.Node], bits: list[int]):
        if len(tiers) != len(bits):
            raise ValueError("one bit width per tier required")
        for t, b in zip(tiers, bits):
            if t.value.shape[1] != 2 ** b:
                raise ValueError(
                    f"tier has {t.value.shape[1]} codewords, expected 2^{b}")
        self.tiers = list(tiers)
        self.bits = list(bits)
        self.frozen = [False] * len(tiers)

    @classmethod
    def random_init(cls, rng: np.random.Generator, dim: int, bits: list[int]):
        """Uniform init in [-1/sqrt(D), 1/sqrt(D)], inside the feature range."""
        scale = 1.0 / np.sqrt(dim)
        tiers = [ad.parameter(rng.uniform(-scale, scale, size=(dim, 2 ** b)))
                 for b in bits]
        return cls(tiers, list(bits))

    @property
    def n_tiers(self) -> int:
        return len(self.tiers)

    @property
    def dim(self) -> int:
        return self.tiers[0].value.shape[0]

    @property
    def total_bits(self) -> int:
        return int(sum(self.bits))

    def params(self) -> list[ad.Node]:
        return [t for t, fr in zip(self.tiers, self.frozen) if not fr]

    def values(self) -> list[np.ndarray]:
        return [t.value for t in self.tiers]


def binarize(index: int, bits: int) -> np.ndarray:
    """Fixed-width big-endian bit vector for a 1-based index."""
    if not (1 <= index <= 2 ** bits):
        raise ValueError(f"index {index} out of range for {bits} bits")
    value = index - 1
    return np.array([(value >> (bits - 1 - i)) & 1 for i in range(bits)], dtype=np.uint8)


def debinarize(bit_vector: np.ndarray, bits: int) -> int:
    bit_vector = np.asarray(bit_vector, dtype=np.uint8)
    if bit_vector.shape != (bits,):
        raise ValueError(f"expected {bits} bits, got shape {bit_vector.shape}")
    value = 0
    for b in bit_vector:
        value = (value << 1) | int(b)
    return value + 1


def pack_bits(bit_vector: np.ndarray) -> bytes:
    """8 bits per byte, zero-padded tail."""
    return np.packbits(np.asarray(bit_vector, dtype=np.uint8)).tobytes()


def unpack_bits(payload: bytes, n_bits: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:n_bits]


def encode(v: np.ndarray, cb: RvqCodebook):
    """Tier-by-tier nearest-codeword quantization.

    Returns (bits, indices, residuals): indices are 0-based per tier with
    shape v.shape[:-1]; residuals[n] is the residual after tier n, with
    residuals[0] = v.  Lowest index wins distance ties.
    """
    v = np.asarray(v, dtype=np.float64)
    residual = v.copy()
    indices = []
    residuals = [residual.copy()]
    for tier in cb.values():
        # ||q_j - r||^2 via direct differences: bit-identical to a per-codeword
        # brute-force scan, so argmin ties resolve exactly the same way
        diff = residual[..., None, :] - tier.T
        d2 = np.sum(diff * diff, axis=-1)
        idx = np.argmin(d2, axis=-1)
        indices.append(idx)
        residual = residual - tier.T[idx]
        residuals.append(residual.copy())
    bits = bits_from_indices(indices, cb.bits)
    return bits, indices, residuals


def bits_from_indices(indices, bit_widths) -> np.ndarray:
    """Concatenate fixed-width encodings of the per-tier (0-based) indices.

    Vector input gives a flat length-B bit array; batched indices gain the
    batch axes in front.
    """
    parts = []
    for idx, b in zip(indices, bit_widths):
        idx = np.asarray(idx)
        shifts = np.arange(b - 1, -1, -1)
        parts.append(((idx[..., None] >> shifts) & 1).astype(np.uint8))
    return np.concatenate(parts, axis=-1)


def indices_from_bits(bits: np.ndarray, bit_widths) -> list[np.ndarray]:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] != sum(bit_widths):
        raise ValueError(
            f"bit vector length {bits.shape[-1]} does not match codebook "
            f"bits {sum(bit_widths)}")
    out = []
    start = 0
    for b in bit_widths:
        chunk = bits[..., start:start + b]
        shifts = np.arange(b - 1, -1, -1)
        out.append(np.sum(chunk.astype(np.int64) << shifts, axis=-1))
        start += b
    return out


def decode(bits: np.ndarray, cb: RvqCodebook) -> np.ndarray:
    """Sum the selected codewords across tiers."""
    indices = indices_from_bits(bits, cb.bits)
    return decode_indices(indices, cb)


def decode_indices(indices, cb: RvqCodebook) -> np.ndarray:
    out = None
    for idx, tier in zip(indices, cb.values()):
        picked = tier.T[np.asarray(idx)]
        out = picked if out is None else out + picked
    return out


def reconstruct_node(indices, cb: RvqCodebook) -> ad.Node:
    """Graph-side decode: the selected codewords stay differentiable."""
    out = None
    for idx, tier in zip(indices, cb.tiers):
        picked = ad.gather_columns(tier, np.asarray(idx))
        out = picked if out is None else ad.add(out, picked)
    return out


def nsvq_forward(v: ad.Node, cb: RvqCodebook, rng: np.random.Generator):
    """Training-time quantization surrogate.

    v_hat_train = v + (||v - v_hat|| / ||u||) u with u a fresh standard
    Gaussian draw held constant for differentiation.  The perturbation norm
    equals the true quantization error norm exactly; gradients reach v
    directly and the selected codewords through the norm factor.  Users with
    zero quantization error pass through unperturbed.
    """
    bits, indices, residuals = encode(v.value, cb)
    v_hat = reconstruct_node(indices, cb)
    err2 = ad.squared_norm(ad.sub(v, v_hat), axis=-1, keepdims=True)
    u = rng.standard_normal(v.value.shape)
    u_norm = np.sqrt(np.sum(u * u, axis=-1, keepdims=True))
    # direction constant; zero-error rows get a zero direction (no perturbation)
    err_values = np.sqrt(err2.value)
    direction = np.where(err_values > 0.0, u / u_norm, 0.0)
    v_train = ad.add(v, ad.mul(ad.sqrt(err2), ad.constant(direction)))
    return v_train, indices, v_hat


def codeword_count(total_bits: int, n_tiers: int):
    """(tiered total, flat total, ratio) for an equal bit split."""
    if total_bits % n_tiers != 0:
        raise ValueError(f"{n_tiers} tiers do not divide {total_bits} bits")
    per_tier = total_bits // n_tiers
    tiered = n_tiers * 2 ** per_tier
    flat = 2 ** total_bits
    return tiered, flat, tiered / flat


def lloyd_train(data: np.ndarray, bits: list[int], rng: np.random.Generator,
                max_iter: int = 100) -> RvqCodebook:
    """Classical residual-codebook construction.

    Tier n is fit with Lloyd k-means on the residuals the first n-1 tiers
    leave on the training data, so adding a tier never increases training
    distortion.
    """
    data = np.asarray(data, dtype=np.float64)
    residual = data.copy()
    tiers = []
    for b in bits:
        centroids, history = lloyd(residual, 2 ** b, rng, max_iter=max_iter)
        if any(history[i + 1] > history[i] + 1e-12 for i in range(len(history) - 1)):
            raise AssertionError("Lloyd distortion increased within a tier")
        tiers.append(ad.constant(centroids.T.copy()))
        idx = np.argmin(
            np.sum((residual[:, None, :] - centroids[None, :, :]) ** 2, axis=2), axis=1)
        residual = residual - centroids[idx]
    cb = RvqCodebook(tiers, list(bits))
    cb.frozen = [True] * len(bits)
    return cb
