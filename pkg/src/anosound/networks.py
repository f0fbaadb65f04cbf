"""Network blocks: spectrogram autoencoder, latent denoiser, discriminator.

All modules operate on (B, 1, F, T) spectrogram tensors or (B, d_z) latents.
The discriminator carries spectral normalization on every conv/linear weight
and is conditioned on the denoising step via a sinusoidal embedding
concatenated to its first feature map; its final conv uses grouped channels.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn.utils.parametrizations import spectral_norm


def timestep_embedding(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Sinusoidal embedding of integer steps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(-np.log(max_period) * torch.arange(half, dtype=torch.float32) / half)
    args = t.float()[:, None] * freqs[None, :]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=-1)
    return emb


def _down_dim(n: int) -> int:
    # Conv2d(kernel 3, stride 2, padding 1) output size
    return (n - 1) // 2 + 1


class SpectrogramEncoder(nn.Module):
    def __init__(self, shape: tuple[int, int], d_z: int, base_channels: int = 16):
        super().__init__()
        c = base_channels
        f, t = shape
        self.net = nn.Sequential(
            nn.Conv2d(1, c, 3, stride=2, padding=1),
            nn.GroupNorm(min(8, c), c), nn.SiLU(),
            nn.Conv2d(c, 2 * c, 3, stride=2, padding=1),
            nn.GroupNorm(min(8, 2 * c), 2 * c), nn.SiLU(),
            nn.Conv2d(2 * c, 4 * c, 3, stride=2, padding=1),
            nn.GroupNorm(min(8, 4 * c), 4 * c), nn.SiLU(),
        )
        f3 = _down_dim(_down_dim(_down_dim(f)))
        t3 = _down_dim(_down_dim(_down_dim(t)))
        self.bottom_shape = (4 * c, f3, t3)
        self.proj = nn.Linear(4 * c * f3 * t3, d_z)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.net(x)
        return self.proj(h.flatten(1))


class SpectrogramDecoder(nn.Module):
    def __init__(self, shape: tuple[int, int], d_z: int, base_channels: int = 16):
        super().__init__()
        c = base_channels
        self.target_shape = shape
        f3 = _down_dim(_down_dim(_down_dim(shape[0])))
        t3 = _down_dim(_down_dim(_down_dim(shape[1])))
        self.bottom_shape = (4 * c, f3, t3)
        self.proj = nn.Linear(d_z, 4 * c * f3 * t3)
        self.net = nn.Sequential(
            nn.ConvTranspose2d(4 * c, 2 * c, 4, stride=2, padding=1),
            nn.GroupNorm(min(8, 2 * c), 2 * c), nn.SiLU(),
            nn.ConvTranspose2d(2 * c, c, 4, stride=2, padding=1),
            nn.GroupNorm(min(8, c), c), nn.SiLU(),
            nn.ConvTranspose2d(c, c, 4, stride=2, padding=1),
            nn.GroupNorm(min(8, c), c), nn.SiLU(),
            nn.Conv2d(c, 1, 3, padding=1),
        )

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h = self.proj(z).reshape(-1, *self.bottom_shape)
        h = self.net(h)
        f, t = self.target_shape
        return torch.sigmoid(h[:, :, :f, :t])


class SpectrogramAutoencoder(nn.Module):
    """Maps minmax01 spectrograms to d_z latents and back; outputs stay in [0, 1]."""

    def __init__(self, shape: tuple[int, int], d_z: int, base_channels: int = 16):
        super().__init__()
        self.shape = shape
        self.d_z = d_z
        self.encoder = SpectrogramEncoder(shape, d_z, base_channels)
        self.decoder = SpectrogramDecoder(shape, d_z, base_channels)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return self.decoder(z)


class LatentDenoiser(nn.Module):
    """Noise predictor on latent vectors, conditioned on the step embedding."""

    def __init__(self, d_z: int, hidden: int = 256, temb_dim: int = 64):
        super().__init__()
        self.temb_dim = temb_dim
        self.net = nn.Sequential(
            nn.Linear(d_z + temb_dim, hidden), nn.SiLU(),
            nn.Linear(hidden, hidden), nn.SiLU(),
            nn.Linear(hidden, d_z),
        )

    def forward(self, z_t: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        if t.dim() == 0:
            t = t.expand(z_t.shape[0])
        emb = timestep_embedding(t, self.temb_dim).to(z_t.dtype)
        return self.net(torch.cat([z_t, emb], dim=1))


class Discriminator(nn.Module):
    """Step-conditioned spectrogram critic with spectral-normalized weights."""

    def __init__(self, shape: tuple[int, int], base_channels: int = 16, temb_dim: int = 32):
        super().__init__()
        c = base_channels
        self.temb_dim = temb_dim
        self.conv_in = spectral_norm(nn.Conv2d(1, c, 3, stride=2, padding=1))
        self.temb_proj = spectral_norm(nn.Linear(temb_dim, c))
        self.body = nn.ModuleList([
            spectral_norm(nn.Conv2d(2 * c, 2 * c, 3, stride=2, padding=1)),
            spectral_norm(nn.Conv2d(2 * c, 4 * c, 3, stride=2, padding=1)),
            # grouped final conv extracting the deep features
            spectral_norm(nn.Conv2d(4 * c, 4 * c, 3, stride=1, padding=1, groups=4)),
        ])
        self.act = nn.LeakyReLU(0.2)
        self.head = spectral_norm(nn.Linear(4 * c, 1))

    def forward_with_features(self, x: torch.Tensor, t: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if t.dim() == 0:
            t = t.expand(x.shape[0])
        h = self.act(self.conv_in(x))
        emb = self.temb_proj(timestep_embedding(t, self.temb_dim).to(x.dtype))
        emb = emb[:, :, None, None].expand(-1, -1, h.shape[2], h.shape[3])
        h = torch.cat([h, emb], dim=1)
        for conv in self.body:
            h = self.act(conv(h))
        feats = h.mean(dim=(2, 3))  # penultimate deep features
        return self.head(feats).squeeze(1), feats

    def forward(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        return self.forward_with_features(x, t)[0]

    def features(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        return self.forward_with_features(x, t)[1]

    def normalized_weight_matrices(self) -> list[np.ndarray]:
        """Every spectrally normalized weight, reshaped 2-D, for invariant checks."""
        out = []
        for module in (self.conv_in, self.temb_proj, *self.body, self.head):
            w = module.weight.detach()
            out.append(w.reshape(w.shape[0], -1).cpu().numpy())
        return out
