"""Variational Jensen-Shannon machinery and its closed-form oracles.

``manifold_loss`` is the binary real-vs-adversarial objective the
discriminator ascends and the classifier descends; ``js_lower_bound`` trains
a throwaway critic on two sample sets and converts the optimized objective
into a Jensen-Shannon estimate comparable with ``closed_form_js``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from atld import tensor as T
from atld.nets import DiscriminatorNet, discriminator_forward
from atld.optim import Adam
from atld.tensor import DomainError, Tensor

LOG_TWO = math.log(2.0)

# probabilities are clamped here before any log; cheap insurance against -inf
PROB_EPS = 1e-7


@dataclass(frozen=True)
class DiscreteDist:
    """A probability vector over k atoms."""

    probabilities: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a non-empty vector")
        if np.any(p < 0.0):
            raise ValueError("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")
        object.__setattr__(self, "probabilities", tuple(float(v) for v in p))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=np.float64)


def gan_activation(t: float) -> float:
    """Critic output activation -log(1 + exp(-t)), computed stably."""
    t = float(t)
    return min(t, 0.0) - math.log1p(math.exp(-abs(t)))


def conjugate_term(g: float) -> float:
    """Conjugate value -log(2 - exp(g)); defined only for g < log 2."""
    g = float(g)
    if g >= LOG_TWO:
        raise DomainError(f"conjugate_term needs g < log 2, got {g}")
    return -math.log(2.0 - math.exp(g))


def manifold_loss(d0_adv: Tensor, d0_clean: Tensor, literal: bool = False) -> Tensor:
    """Binary manifold objective over a batch of d0 probabilities.

    Default form: mean(log d0_adv) + mean(log(1 - d0_clean)), the bound the
    discriminator maximizes to tell adversarial latents from clean ones.
    ``literal=True`` switches the clean-side term to (1 - log d0_clean) for
    ablation. Inputs are clamped to [PROB_EPS, 1 - PROB_EPS] before the logs.
    """
    adv = T.clip(d0_adv, PROB_EPS, 1.0 - PROB_EPS)
    clean = T.clip(d0_clean, PROB_EPS, 1.0 - PROB_EPS)
    adv_term = T.reduce_mean(T.log(adv))
    if literal:
        clean_term = T.reduce_mean(T.sub(1.0, T.log(clean)))
    else:
        clean_term = T.reduce_mean(T.log(T.sub(1.0, clean)))
    return T.add(adv_term, clean_term)


def closed_form_js(p: DiscreteDist, q: DiscreteDist) -> float:
    """Exact Jensen-Shannon divergence of two discrete distributions (nats)."""
    pa, qa = p.as_array(), q.as_array()
    if pa.size != qa.size:
        raise ValueError("distributions need equal support size")
    m = 0.5 * (pa + qa)

    def kl(a, b):
        mask = a > 0.0
        return float(np.sum(a[mask] * np.log(a[mask] / b[mask])))

    return 0.5 * kl(pa, m) + 0.5 * kl(qa, m)


def js_lower_bound(p_samples, q_samples, d: DiscriminatorNet, steps: int) -> float:
    """Jensen-Shannon estimate from samples via a trained critic.

    A fresh copy of ``d`` is optimized for ``steps`` full-batch steps to
    maximize mean(log d0(p)) + mean(log(1 - d0(q))); the optimized objective
    is shifted by 2 log 2 and halved so identical distributions read ~0 and
    disjoint ones read ~log 2, directly comparable with ``closed_form_js``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    p_arr = p_samples.data if isinstance(p_samples, Tensor) else np.asarray(p_samples, dtype=np.float64)
    q_arr = q_samples.data if isinstance(q_samples, Tensor) else np.asarray(q_samples, dtype=np.float64)
    if p_arr.size == 0 or q_arr.size == 0:
        raise ValueError("sample sets must be non-empty")

    critic = d.clone()
    opt = Adam(critic.parameters(), lr=1e-2)
    p_t = Tensor(p_arr)
    q_t = Tensor(q_arr)

    def objective() -> Tensor:
        d0_p, _ = discriminator_forward(critic, p_t)
        d0_q, _ = discriminator_forward(critic, q_t)
        return manifold_loss(d0_p, d0_q)

    for _ in range(steps):
        obj = objective()
        T.backward(T.neg(obj))
        opt.step()
    final = objective().item()
    return 0.5 * (final + 2.0 * LOG_TWO)
