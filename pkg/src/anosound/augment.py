"""Temporal enhancement of normalized spectrograms, applied during training only.

Pipeline per training step: pool each frame over frequency with a trainable
convex mix of max, average, and power-average pooling; squash through a
learnable sigmoid affine into a soft temporal attention map; threshold at a
random tau into a hard frame mask; then mix the spectrogram with its own
masked copy, ``mixed = lam * x + (1 - lam) * (x * mask)``.

Algebraic consequence used throughout the tests: frames where the mask is 1
keep their original values and frames where the mask is 0 are scaled by lam.

Pooling operates on minmax01-normalized spectrograms so the power mean stays
well defined; inputs with negative entries are rejected.

The hard threshold has zero gradient almost everywhere, so the batch
augmenter routes gradients through the soft attention map with a
straight-through estimator; the forward values are exactly the hard-mask mix.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .config import MixupConfig
from .errors import InvalidInputError


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x), dtype=torch.get_default_dtype())


class PoolingWeights(nn.Module):
    """Three pooling logits (max, avg, pow) softmax-normalized to a convex mix."""

    def __init__(self, power_p: float = 3.0, dtype: torch.dtype = torch.float32):
        super().__init__()
        if power_p <= 1.0:
            raise InvalidInputError(f"power exponent must exceed 1, got {power_p}")
        self.power_p = float(power_p)
        self.logits = nn.Parameter(torch.zeros(3, dtype=dtype))

    def weights(self) -> torch.Tensor:
        return torch.softmax(self.logits, dim=0)


class AttentionAffine(nn.Module):
    """Learnable scalar affine preceding the sigmoid, initialized to identity."""

    def __init__(self, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.scale = nn.Parameter(torch.ones((), dtype=dtype))
        self.shift = nn.Parameter(torch.zeros((), dtype=dtype))


def pool_time(spec_values, weights: PoolingWeights) -> torch.Tensor:
    """Weighted frequency pooling: per frame t,
    ``w_max * max_f + w_avg * mean_f + w_pow * (mean_f x^p)^(1/p)``.

    Accepts an (F, T) or (B, F, T) nonnegative array/tensor; pools over the
    frequency axis, preserving any batch axis.
    """
    v = _as_tensor(spec_values)
    if v.dim() not in (2, 3):
        raise InvalidInputError(f"expected (F, T) or (B, F, T), got shape {tuple(v.shape)}")
    if torch.any(v < 0):
        raise InvalidInputError("power pooling needs a nonnegative base; normalize first")
    freq_axis = -2
    w = weights.weights().to(v.dtype)
    pooled_max = v.amax(dim=freq_axis)
    pooled_avg = v.mean(dim=freq_axis)
    p = weights.power_p
    pooled_pow = v.pow(p).mean(dim=freq_axis).pow(1.0 / p)
    return w[0] * pooled_max + w[1] * pooled_avg + w[2] * pooled_pow


def attention(pooled, affine: AttentionAffine | None = None) -> torch.Tensor:
    """Soft temporal attention map in (0, 1): sigmoid of an affine of the pooling."""
    x = _as_tensor(pooled)
    if affine is None:
        return torch.sigmoid(x)
    return torch.sigmoid(affine.scale.to(x.dtype) * x + affine.shift.to(x.dtype))


def hard_mask(att, tau: float) -> torch.Tensor:
    """Binary frame mask: 1 where the attention exceeds tau."""
    a = _as_tensor(att)
    return (a > tau).to(a.dtype)


def temporal_mixup(spec_values, mask, lam: float) -> torch.Tensor:
    """Mix a spectrogram with its own time-masked copy.

    Returns the input bit-exactly where the mask is 1 or when lam == 1;
    dropped frames are exactly ``lam * x``.
    """
    v = _as_tensor(spec_values)
    m = _as_tensor(mask)
    if not (0.0 <= lam <= 1.0):
        raise InvalidInputError(f"mixing coefficient must lie in [0, 1], got {lam}")
    if m.shape[-1] != v.shape[-1] or m.dim() != v.dim() - 1:
        raise InvalidInputError(
            f"mask shape {tuple(m.shape)} incompatible with spec shape {tuple(v.shape)}")
    keep = (m > 0.5).unsqueeze(-2).expand_as(v)
    return torch.where(keep, v, lam * v)


class TemporalMixup(nn.Module):
    """Trainable batch augmenter bundling the pooling and attention parameters."""

    def __init__(self, cfg: MixupConfig, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        self.pooling = PoolingWeights(power_p=cfg.power_p, dtype=dtype)
        self.affine = AttentionAffine(dtype=dtype)

    def forward(self, batch: torch.Tensor, rng: np.random.Generator) -> torch.Tensor:
        """Augment a (B, F, T) batch; tau and lam are drawn once per call."""
        if not self.cfg.enabled:
            return batch
        tau = float(rng.uniform(self.cfg.tau_low, self.cfg.tau_high))
        lam = float(rng.beta(self.cfg.beta_alpha, self.cfg.beta_alpha))
        pooled = pool_time(batch, self.pooling)
        soft = attention(pooled, self.affine)
        hard = (soft > tau).to(soft.dtype)
        ste = soft + (hard - soft).detach()  # forward: hard; backward: d soft
        return lam * batch + (1.0 - lam) * batch * ste.unsqueeze(-2)
