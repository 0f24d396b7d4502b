import math

import numpy as np
import pytest
import sympy
from scipy.spatial.distance import jensenshannon

from atld import tensor as T
from atld.divergence import (
    LOG_TWO,
    DiscreteDist,
    closed_form_js,
    conjugate_term,
    gan_activation,
    js_lower_bound,
    manifold_loss,
)
from atld.nets import DiscriminatorNet
from atld.tensor import DomainError, Tensor


def proportional_samples(dist: DiscreteDist, n: int) -> np.ndarray:
    """Deterministic sample set matching a discrete distribution as closely
    as n allows (largest remainder rounding); atoms embedded at 0, 1, 2, ..."""
    p = dist.as_array()
    counts = np.floor(p * n).astype(int)
    remainder = p * n - counts
    for i in np.argsort(-remainder)[: n - counts.sum()]:
        counts[i] += 1
    xs = np.repeat(np.arange(p.size, dtype=np.float64), counts)
    return xs.reshape(-1, 1)


def critic_for(dim: int) -> DiscriminatorNet:
    return DiscriminatorNet(latent_dim=dim, hidden=(64,), num_classes=2, seed=123)


class TestGanActivationPair:
    def test_activation_at_zero(self):
        assert abs(gan_activation(0.0) - (-LOG_TWO)) <= 1e-15

    def test_conjugate_at_minus_log_two(self):
        assert abs(conjugate_term(-LOG_TWO) - (-math.log(1.5))) <= 1e-15

    def test_conjugate_domain(self):
        with pytest.raises(DomainError):
            conjugate_term(LOG_TWO)
        with pytest.raises(DomainError):
            conjugate_term(1.0)

    def test_symmetric_combination_symbolically(self):
        # oracle: evaluate the same two formulas with exact symbolic arithmetic
        t = sympy.Integer(0)
        act = -sympy.log(1 + sympy.exp(-t))
        act_neg = -sympy.log(1 + sympy.exp(t))
        expected = act + (-sympy.log(2 - sympy.exp(act_neg)))
        got = gan_activation(0.0) + conjugate_term(gan_activation(-0.0))
        assert abs(got - float(expected)) <= 1e-12
        assert abs(got - float(-sympy.log(3))) <= 1e-12

    def test_activation_stable_for_large_inputs(self):
        assert gan_activation(-1000.0) == pytest.approx(-1000.0)
        assert gan_activation(1000.0) == pytest.approx(0.0, abs=1e-12)


class TestManifoldLoss:
    def test_logistic_midpoint(self):
        loss = manifold_loss(Tensor([0.5]), Tensor([0.5]))
        assert abs(loss.item() - (-2.0 * LOG_TWO)) <= 1e-12

    def test_hand_evaluated_batch(self):
        expected = math.log(0.9) + math.log(1.0 - 0.1)
        loss = manifold_loss(Tensor([0.9]), Tensor([0.1]))
        assert abs(loss.item() - expected) <= 1e-12

    def test_maximized_limit_approaches_zero(self):
        loss = manifold_loss(Tensor([1.0 - 1e-9]), Tensor([1e-9]))
        assert -1e-5 < loss.item() <= 0.0

    def test_saturated_inputs_are_clamped(self):
        loss = manifold_loss(Tensor([1.0]), Tensor([0.0]))
        assert np.isfinite(loss.item())

    def test_literal_form(self):
        expected = math.log(0.9) + (1.0 - math.log(0.1))
        loss = manifold_loss(Tensor([0.9]), Tensor([0.1]), literal=True)
        assert abs(loss.item() - expected) <= 1e-12

    def test_monotone_in_both_arguments(self):
        rng = np.random.default_rng(0)
        adv = rng.uniform(0.2, 0.8, size=8)
        clean = rng.uniform(0.2, 0.8, size=8)
        base = manifold_loss(Tensor(adv), Tensor(clean)).item()
        h = 1e-6
        for i in range(8):
            up = adv.copy()
            up[i] += h
            assert manifold_loss(Tensor(up), Tensor(clean)).item() > base
            up_c = clean.copy()
            up_c[i] += h
            assert manifold_loss(Tensor(adv), Tensor(up_c)).item() < base


class TestClosedFormJs:
    def test_identical(self):
        p = DiscreteDist((0.25, 0.25, 0.5))
        assert closed_form_js(p, p) == 0.0

    def test_disjoint_supports(self):
        assert abs(closed_form_js(DiscreteDist((1.0, 0.0)), DiscreteDist((0.0, 1.0))) - LOG_TWO) <= 1e-15

    def test_direct_formula_value(self):
        p = DiscreteDist((0.5, 0.5))
        q = DiscreteDist((0.9, 0.1))
        got = closed_form_js(p, q)
        # oracle: scipy's jensenshannon returns the square root of the divergence
        oracle = jensenshannon([0.5, 0.5], [0.9, 0.1], base=math.e) ** 2
        assert abs(got - oracle) <= 1e-12
        assert abs(got - 0.10174922507919677) <= 1e-12

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            k = rng.integers(2, 6)
            a = rng.uniform(0.01, 1.0, size=k)
            b = rng.uniform(0.01, 1.0, size=k)
            p = DiscreteDist(tuple(a / a.sum()))
            q = DiscreteDist(tuple(b / b.sum()))
            pq, qp = closed_form_js(p, q), closed_form_js(q, p)
            assert abs(pq - qp) <= 1e-12
            assert 0.0 <= pq <= LOG_TWO

    def test_validation(self):
        with pytest.raises(ValueError):
            DiscreteDist((0.5, 0.6))
        with pytest.raises(ValueError):
            DiscreteDist((1.5, -0.5))
        with pytest.raises(ValueError):
            closed_form_js(DiscreteDist((1.0,)), DiscreteDist((0.5, 0.5)))


class TestJsLowerBound:
    def test_identical_samples_near_zero(self):
        rng = np.random.default_rng(5)
        samples = rng.normal(size=(400, 1))
        est = js_lower_bound(samples, samples.copy(), critic_for(1), steps=500)
        assert est <= 0.02

    def test_separated_point_masses(self):
        p = np.full((300, 1), -0.5)
        q = np.full((300, 1), 0.5)
        est = js_lower_bound(p, q, critic_for(1), steps=2000)
        assert abs(est - LOG_TWO) <= 0.05

    def test_overlapping_gaussians_match_histogram_oracle(self):
        rng = np.random.default_rng(9)
        p = rng.normal(loc=-0.5, scale=0.6, size=(5000, 1))
        q = rng.normal(loc=0.5, scale=0.6, size=(5000, 1))
        # oracle: bin both sample sets on a shared 200-bin grid and take the
        # exact discrete divergence of the two histograms
        lo = min(p.min(), q.min())
        hi = max(p.max(), q.max())
        edges = np.linspace(lo, hi, 201)
        hp, _ = np.histogram(p, bins=edges)
        hq, _ = np.histogram(q, bins=edges)
        keep = (hp + hq) > 0
        oracle = closed_form_js(
            DiscreteDist(tuple(hp[keep] / hp.sum())),
            DiscreteDist(tuple(hq[keep] / hq.sum())),
        )
        est = js_lower_bound(p, q, critic_for(1), steps=2000)
        assert abs(est - oracle) <= 0.05

    def test_never_far_above_closed_form(self):
        pairs = [
            (DiscreteDist((0.5, 0.5)), DiscreteDist((0.9, 0.1))),
            (DiscreteDist((0.3, 0.7)), DiscreteDist((0.7, 0.3))),
        ]
        for p, q in pairs:
            est = js_lower_bound(
                proportional_samples(p, 800), proportional_samples(q, 800), critic_for(1), steps=1500
            )
            assert est <= closed_form_js(p, q) + 0.05

    def test_validation(self):
        with pytest.raises(ValueError):
            js_lower_bound(np.zeros((1, 1)), np.zeros((1, 1)), critic_for(1), steps=0)
        with pytest.raises(ValueError):
            js_lower_bound(np.zeros((0, 1)), np.zeros((1, 1)), critic_for(1), steps=1)
