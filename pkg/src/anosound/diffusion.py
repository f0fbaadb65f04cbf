"""Forward-diffusion schedule and the closed-form corruption / reverse-step math.

Steps are 1-indexed: ``alpha_bar(1) == 1 - beta_1`` and ``alpha_bar`` is
strictly decreasing. The marginal of the forward process is
``z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps`` with unit-normal
eps, so ``Var(z_t | z0) = 1 - alpha_bar_t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import InvalidInputError


@dataclass(frozen=True)
class DiffusionSchedule:
    betas: np.ndarray
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise InvalidInputError("betas must be a nonempty 1-D sequence")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise InvalidInputError("betas must lie strictly inside (0, 1)")
        if np.any(np.diff(betas) < 0.0):
            raise InvalidInputError("betas must be nondecreasing")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", 1.0 - betas)
        object.__setattr__(self, "alpha_bars", np.cumprod(1.0 - betas))

    @property
    def n_steps(self) -> int:
        return len(self.betas)

    def alpha_bar(self, t: int) -> float:
        self._check_t(t)
        return float(self.alpha_bars[t - 1])

    def _check_t(self, t) -> None:
        t_arr = np.asarray(t)
        if np.any(t_arr < 1) or np.any(t_arr > self.n_steps):
            raise InvalidInputError(
                f"step index must lie in [1, {self.n_steps}], got {t}")


def linear_schedule(n_steps: int, beta_start: float = 1e-4,
                    beta_end: float = 0.02) -> DiffusionSchedule:
    if n_steps < 1:
        raise InvalidInputError("schedule needs at least one step")
    return DiffusionSchedule(betas=np.linspace(beta_start, beta_end, n_steps))


def _gather(values: np.ndarray, t, like: torch.Tensor) -> torch.Tensor:
    """Per-sample coefficient lookup, broadcastable against ``like``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.int64))
    coeff = torch.as_tensor(values[t_arr - 1], dtype=like.dtype)
    shape = [len(t_arr)] + [1] * (like.dim() - 1)
    if len(t_arr) == 1 and like.dim() > 0:
        shape[0] = 1
    return coeff.reshape(shape)


def q_sample(z0, t, eps, schedule: DiffusionSchedule) -> torch.Tensor:
    """Closed-form forward corruption at step t."""
    schedule._check_t(t)
    z0_t = torch.as_tensor(z0, dtype=torch.get_default_dtype()) if not isinstance(z0, torch.Tensor) else z0
    eps_t = torch.as_tensor(eps, dtype=z0_t.dtype) if not isinstance(eps, torch.Tensor) else eps
    if eps_t.shape != z0_t.shape:
        raise InvalidInputError(
            f"noise shape {tuple(eps_t.shape)} must match {tuple(z0_t.shape)}")
    ab = _gather(schedule.alpha_bars, t, z0_t)
    return torch.sqrt(ab) * z0_t + torch.sqrt(1.0 - ab) * eps_t


def predict_z0(z_t: torch.Tensor, t, eps_hat: torch.Tensor,
               schedule: DiffusionSchedule) -> torch.Tensor:
    """Invert the forward marginal given a noise estimate."""
    schedule._check_t(t)
    ab = _gather(schedule.alpha_bars, t, z_t)
    return (z_t - torch.sqrt(1.0 - ab) * eps_hat) / torch.sqrt(ab)


def posterior_mean(z_t: torch.Tensor, z0_hat: torch.Tensor, t,
                   schedule: DiffusionSchedule) -> torch.Tensor:
    """Mean of the reverse-process posterior q(z_{t-1} | z_t, z0).

    At t = 1 the posterior collapses onto z0_hat.
    """
    schedule._check_t(t)
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.int64))
    ab_t = schedule.alpha_bars[t_arr - 1]
    ab_prev = np.where(t_arr > 1, schedule.alpha_bars[np.maximum(t_arr - 2, 0)], 1.0)
    beta_t = schedule.betas[t_arr - 1]
    alpha_t = schedule.alphas[t_arr - 1]
    coef0 = beta_t * np.sqrt(ab_prev) / (1.0 - ab_t)
    coef_t = (1.0 - ab_prev) * np.sqrt(alpha_t) / (1.0 - ab_t)
    shape = [len(t_arr)] + [1] * (z_t.dim() - 1)
    if len(t_arr) == 1 and z_t.dim() > 0:
        shape[0] = 1
    c0 = torch.as_tensor(coef0, dtype=z_t.dtype).reshape(shape)
    ct = torch.as_tensor(coef_t, dtype=z_t.dtype).reshape(shape)
    return c0 * z0_hat + ct * z_t
