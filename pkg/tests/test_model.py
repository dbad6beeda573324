"""Tests for the generative/inference networks and the sequence ELBO."""

import math

import numpy as np
import pytest

from sgru_forecast.autodiff import grad_check_leaves
from sgru_forecast.exceptions import ContractError, DimensionError, NumericError
from sgru_forecast.model import SCALE_FLOOR, GaussianHead, build_model, elbo, model_dims
from sgru_forecast.trainer import TrainConfig


def _sequence(length=3, n_cov=2, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=length), rng.normal(size=(length, n_cov))


class TestGaussianHead:
    """Test the MLP-to-Gaussian head."""

    def test_scale_respects_floor(self):
        """softplus + floor keeps scales at or above the floor."""
        head = GaussianHead(3, 2, 1, 4, rng=np.random.default_rng(0))
        for w in head.mlp.weights:
            w.value[...] = 0.0
        head.mlp.biases[-1].value[...] = -1000.0
        out = head(np.ones(3))
        assert out.dim == 2
        np.testing.assert_allclose(out.scale.value, SCALE_FLOOR)

    def test_input_dimension(self):
        """Wrong state size raises DimensionError."""
        with pytest.raises(DimensionError):
            GaussianHead(3, 2, 1, 4)(np.ones(4))


class TestBuildModel:
    """Test model construction from a TrainConfig."""

    def test_dims_follow_config(self, tiny_model):
        """model_dims reports the configured sizes."""
        theta, phi = tiny_model
        assert model_dims(theta, phi) == {"input_dim": 2, "latent_dim": 2, "hidden_dim": 3, "g_dim": 3}

    def test_posterior_head_has_own_topology(self):
        """posterior_mlp controls the inference head topology."""
        cfg = TrainConfig(latent_dim=2, hidden_dim=3, g_dim=5, prior_mlp=(1, 4), emission_mlp=(1, 4),
                          posterior_mlp=(2, 6))
        _, phi = build_model(1, cfg)
        assert phi.posterior_head.mlp.sizes == [5, 6, 6, 4]


class TestElbo:
    """Test the sequential ELBO."""

    def test_total_is_recon_minus_kl(self, tiny_model):
        """The differentiable total equals sum(recon) - sum(kl)."""
        theta, phi = tiny_model
        y, x = _sequence(5)
        out = elbo(theta, phi, y, x, rng=np.random.default_rng(1))
        assert out.steps == 5
        assert out.value == pytest.approx(out.recon.sum() - out.kl.sum())
        assert np.all(out.kl >= 0.0)

    def test_frozen_noise_is_deterministic(self, tiny_model):
        """Equal noise gives equal ELBO and final states."""
        theta, phi = tiny_model
        y, x = _sequence(4)
        noise = np.random.default_rng(2).standard_normal((4, 2))
        a = elbo(theta, phi, y, x, noise=noise)
        b = elbo(theta, phi, y, x, noise=noise)
        assert a.value == b.value
        np.testing.assert_array_equal(a.h_last.value, b.h_last.value)

    def test_carried_state_changes_result(self, tiny_model):
        """A non-zero initial state is used."""
        theta, phi = tiny_model
        y, x = _sequence(3)
        noise = np.zeros((3, 2))
        a = elbo(theta, phi, y, x, noise=noise)
        b = elbo(theta, phi, y, x, h_init=np.ones(3), g_init=np.ones(3), noise=noise)
        assert a.value != b.value

    def test_gradients_match_finite_differences(self):
        """Backward gradients of the full ELBO agree with central differences (3 steps, z=2, h=3, g=3)."""
        cfg = TrainConfig(latent_dim=2, hidden_dim=3, g_dim=3, prior_mlp=(1, 4), emission_mlp=(1, 4))
        theta, phi = build_model(2, cfg, np.random.default_rng(5))
        y, x = _sequence(3, seed=6)
        noise = np.random.default_rng(7).standard_normal((3, 2))
        params = theta.parameters() + phi.parameters()

        report = grad_check_leaves(lambda: elbo(theta, phi, y, x, noise=noise).total, params, h=1e-5, tol=1e-4)
        assert report.passed, report.max_rel_error

    def test_empty_sequence(self, tiny_model):
        """Length zero is a contract violation."""
        theta, phi = tiny_model
        with pytest.raises(ContractError):
            elbo(theta, phi, [], np.zeros((0, 2)), rng=np.random.default_rng(0))

    def test_length_mismatch(self, tiny_model):
        """Targets and covariates must align."""
        theta, phi = tiny_model
        with pytest.raises(ContractError):
            elbo(theta, phi, [1.0, 2.0], np.zeros((3, 2)), rng=np.random.default_rng(0))

    def test_needs_noise_source(self, tiny_model):
        """Either rng or noise must be given."""
        theta, phi = tiny_model
        with pytest.raises(ContractError):
            elbo(theta, phi, [1.0], np.zeros((1, 2)))

    def test_noise_shape(self, tiny_model):
        """Frozen noise must be (L, latent_dim)."""
        theta, phi = tiny_model
        with pytest.raises(DimensionError):
            elbo(theta, phi, [1.0], np.zeros((1, 2)), noise=np.zeros((1, 3)))

    def test_non_finite_target(self, tiny_model):
        """A NaN target raises NumericError."""
        theta, phi = tiny_model
        with pytest.raises(NumericError):
            elbo(theta, phi, [0.0, np.nan], np.zeros((2, 2)), rng=np.random.default_rng(0))


@pytest.fixture
def zero_model():
    """Every weight and bias zero: z = 2, h = 3, g = 3, two covariates."""
    cfg = TrainConfig(latent_dim=2, hidden_dim=3, g_dim=3, prior_mlp=(1, 4), emission_mlp=(1, 4))
    return build_model(2, cfg)


ZERO_SCALE = math.log(2.0) + SCALE_FLOOR


class TestZeroWeightModel:
    """Test the closed forms of a model whose weights are all zero."""

    def test_prior_head(self, zero_model):
        """p(z | h) is N(0, (ln 2 + floor)^2) for any h."""
        theta, _ = zero_model
        prior = theta.prior_z([0.3, -1.0, 2.0])
        np.testing.assert_array_equal(prior.mean.value, [0.0, 0.0])
        np.testing.assert_allclose(prior.scale.value, [ZERO_SCALE] * 2, rtol=1e-14)

    def test_posterior_head(self, zero_model):
        """q(z | g) has the same zero-weight form."""
        _, phi = zero_model
        posterior = phi.posterior_z([1.0, 1.0, -1.0])
        np.testing.assert_array_equal(posterior.mean.value, [0.0, 0.0])
        np.testing.assert_allclose(posterior.scale.value, [ZERO_SCALE] * 2, rtol=1e-14)

    def test_emission_head(self, zero_model):
        """p(y | h) is a scalar N(0, (ln 2 + floor)^2)."""
        theta, _ = zero_model
        emission = theta.emission([0.5, 0.5, 0.5])
        assert emission.dim == 1
        assert emission.mean.item() == 0.0
        assert emission.scale.item() == pytest.approx(ZERO_SCALE, rel=1e-14)

    def test_inference_step_halves_state(self, zero_model):
        """g_t = 0.5 g_{t-1} whatever the target."""
        _, phi = zero_model
        g = phi.step([2.0, -1.0, 0.5], 7.0)
        np.testing.assert_allclose(g.value, [1.0, -0.5, 0.25], rtol=0, atol=1e-15)

    @pytest.mark.parametrize("y", [0.0, 0.8])
    def test_single_step_elbo(self, zero_model, y):
        """L = 1: KL vanishes and the ELBO is the emission log-density of y."""
        theta, phi = zero_model
        out = elbo(theta, phi, [y], np.ones((1, 2)), rng=np.random.default_rng(0))
        expected = -0.5 * math.log(2 * math.pi) - math.log(ZERO_SCALE) - y * y / (2 * ZERO_SCALE**2)
        assert out.kl[0] == pytest.approx(0.0, abs=1e-15)
        assert out.value == pytest.approx(expected, rel=1e-12)
        np.testing.assert_array_equal(out.h_last.value, np.zeros(3))
