"""Tests for recurrent cells, MLPs and parameter bookkeeping."""

import math

import numpy as np
import pytest

from sgru_forecast.autodiff import Tensor, grad_check_leaves, sum_all
from sgru_forecast.exceptions import ConfigError, ContractError, DimensionError
from sgru_forecast.layers import (
    GATES,
    MLP,
    DeterministicGRUCell,
    LSTMCell,
    StochasticGRUCell,
    uniform_init,
)


class TestUniformInit:
    """Test the +-1/sqrt(fan_in) initialisation rule."""

    def test_bounds(self):
        """Draws stay inside the fan-in bound."""
        t = uniform_init(np.random.default_rng(0), (50, 16), 16)
        assert t.requires_grad
        assert np.all(np.abs(t.value) <= 0.25)

    def test_no_rng_gives_zeros(self):
        """A missing generator yields zeros."""
        assert not np.any(uniform_init(None, (2, 3), 3).value)


class TestModule:
    """Test parameter enumeration and state dicts."""

    def test_named_parameters_are_ordered_and_complete(self):
        """A stochastic cell exposes W, C, M and b for each gate."""
        cell = StochasticGRUCell(2, 3, 4)
        names = [n for n, _ in cell.named_parameters()]
        assert names == [f"{k}_{g}" for g in GATES for k in ("W", "C", "M", "b")]
        assert cell.num_parameters() == 3 * (3 * 2 + 3 * 4 + 3 * 3 + 3)

    def test_mlp_list_parameters(self):
        """List attributes are enumerated with their index."""
        names = [n for n, _ in MLP(2, 1, hidden_layers=1, width=4).named_parameters()]
        assert names == ["weights.0", "weights.1", "biases.0", "biases.1"]

    def test_state_dict_round_trip(self):
        """load_state_dict copies values into another module."""
        source = MLP(3, 2, 2, 5, rng=np.random.default_rng(1))
        target = MLP(3, 2, 2, 5)
        target.load_state_dict(source.state_dict())
        for (_, a), (_, b) in zip(source.named_parameters(), target.named_parameters()):
            np.testing.assert_array_equal(a.value, b.value)

    def test_load_rejects_wrong_shape(self):
        """Shape mismatches raise DimensionError."""
        state = MLP(3, 2, 1, 5).state_dict()
        with pytest.raises(DimensionError):
            MLP(3, 2, 1, 6).load_state_dict(state)

    def test_load_rejects_missing_names(self):
        """Missing parameters raise ContractError."""
        with pytest.raises(ContractError):
            MLP(3, 2, 1, 5).load_state_dict({})


class TestStochasticGRUCell:
    """Test the stochastic GRU update."""

    def test_zero_weights_halve_the_state(self):
        """With every weight zero: u = 0.5, candidate = 0, so h_t = 0.5 h_{t-1}."""
        cell = StochasticGRUCell(2, 2, 3)
        h = cell.step([1.0, 2.0], [5.0, -5.0], [1.0, 1.0, 1.0])
        np.testing.assert_allclose(h.value, [0.5, 1.0], atol=1e-15)

    def test_reduces_to_gru_when_c_is_zero(self):
        """With C = 0 the stochastic cell equals the deterministic GRU on 100 random draws."""
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(100):
            n_in, n_h, n_z = rng.integers(1, 6, size=3)
            cell = StochasticGRUCell(n_in, n_h, n_z, rng)
            for gate in GATES:
                getattr(cell, f"C_{gate}").value[...] = 0.0
            gru = cell.deterministic()
            h, x, z = rng.normal(size=n_h), rng.normal(size=n_in), rng.normal(size=n_z)
            diff = np.abs(cell.step(h, x, z).value - gru.step(h, x).value).max()
            worst = max(worst, diff)
        assert worst < 1e-12

    def test_batched_columns_match_single_steps(self):
        """A column-batched step equals stepping each column separately."""
        rng = np.random.default_rng(3)
        cell = StochasticGRUCell(2, 4, 3, rng)
        h, x, z = rng.normal(size=(4, 5)), rng.normal(size=(2, 5)), rng.normal(size=(3, 5))
        batched = cell.step(h, x, z).value
        for j in range(5):
            np.testing.assert_allclose(batched[:, j], cell.step(h[:, j], x[:, j], z[:, j]).value, atol=1e-14)

    def test_dimension_mismatch(self):
        """Wrong latent size raises DimensionError."""
        cell = StochasticGRUCell(2, 3, 4)
        with pytest.raises(DimensionError):
            cell.step(np.zeros(3), np.zeros(2), np.zeros(3))

    def test_non_positive_dims(self):
        """Dimensions must be positive."""
        with pytest.raises(ContractError):
            StochasticGRUCell(2, 0, 1)


class TestMLP:
    """Test the multi-layer perceptron."""

    def test_zero_hidden_layers_is_affine(self):
        """hidden_layers=0 is a single affine map."""
        mlp = MLP(2, 1, hidden_layers=0)
        mlp.weights[0].value[...] = [[2.0, -1.0]]
        mlp.biases[0].value[...] = [0.5]
        assert mlp([1.0, 3.0]).item() == pytest.approx(-0.5)

    def test_softplus_head_is_positive(self):
        """The softplus head never returns negatives."""
        mlp = MLP(3, 4, 1, 8, head="softplus", rng=np.random.default_rng(0))
        out = mlp(np.random.default_rng(1).normal(size=(3, 20)) * 10)
        assert np.all(out.value > 0.0)

    def test_relu_three_layer_topology(self):
        """Two hidden layers of 5 units plus the output layer."""
        mlp = MLP(4, 1, hidden_layers=2, width=5, activation="relu")
        assert mlp.sizes == [4, 5, 5, 1]

    def test_unknown_activation(self):
        """Unknown activations are a configuration error."""
        with pytest.raises(ConfigError):
            MLP(2, 1, activation="gelu")

    def test_input_dimension_checked(self):
        """Inputs of the wrong size raise DimensionError."""
        with pytest.raises(DimensionError):
            MLP(2, 1)(np.zeros(3))


class TestLSTMCell:
    """Test the LSTM baseline cell."""

    def test_zero_weights_decay_cell_state(self):
        """Zero weights: gates are 0.5 and the candidate 0, so c halves and h = 0.5 tanh(c)."""
        cell = LSTMCell(2, 2)
        h, c = cell.step(([0.0, 0.0], [1.0, -2.0]), [3.0, 4.0])
        np.testing.assert_allclose(c.value, [0.5, -1.0])
        np.testing.assert_allclose(h.value, [0.5 * math.tanh(0.5), 0.5 * math.tanh(-1.0)])

    def test_initial_state_is_zero(self):
        """initial_state returns zero h and c."""
        h, c = LSTMCell(1, 3).initial_state()
        assert not np.any(h.value) and not np.any(c.value)

    def test_dimension_mismatch(self):
        """Mismatched state shapes raise DimensionError."""
        with pytest.raises(DimensionError):
            LSTMCell(1, 3).step((np.zeros(3), np.zeros(2)), [1.0])


class TestDeterministicGRUCell:
    """Test the plain GRU."""

    def test_zero_weights_halve_the_state(self):
        """Same zero-weight algebra as the stochastic cell."""
        h = DeterministicGRUCell(1, 2).step([2.0, -4.0], [9.0])
        np.testing.assert_allclose(h.value, [1.0, -2.0])


def _sig(v):
    return 1.0 / (1.0 + np.exp(-v))


class TestStochasticGRUEquations:
    """Test the stochastic GRU against a direct evaluation of its gate equations."""

    def test_matches_hand_evaluation(self):
        """hidden=3, input=2, latent=2 with random weights and biases."""
        rng = np.random.default_rng(21)
        cell = StochasticGRUCell(2, 3, 2, rng)
        for gate in GATES:
            getattr(cell, f"b_{gate}").value[...] = rng.normal(size=3)
        p = {name: t.value for name, t in cell.named_parameters()}
        h, x, z = rng.normal(size=3), rng.normal(size=2), rng.normal(size=2)

        u = _sig(p["W_u"] @ x + p["C_u"] @ z + p["M_u"] @ h + p["b_u"])
        r = _sig(p["W_r"] @ x + p["C_r"] @ z + p["M_r"] @ h + p["b_r"])
        candidate = np.tanh(p["W_h"] @ x + p["C_h"] @ z + r * (p["M_h"] @ h) + p["b_h"])
        expected = u * h + (1.0 - u) * candidate

        np.testing.assert_allclose(cell.step(h, x, z).value, expected, rtol=0, atol=1e-12)

    def test_state_is_convex_combination(self):
        """Each coordinate of h_t lies between h_{t-1} and the candidate."""
        rng = np.random.default_rng(22)
        for _ in range(50):
            cell = StochasticGRUCell(2, 4, 3, rng)
            p = {name: t.value for name, t in cell.named_parameters()}
            h, x, z = rng.uniform(-1.0, 1.0, size=4), rng.normal(size=2), rng.normal(size=3)
            r = _sig(p["W_r"] @ x + p["C_r"] @ z + p["M_r"] @ h + p["b_r"])
            candidate = np.tanh(p["W_h"] @ x + p["C_h"] @ z + r * (p["M_h"] @ h) + p["b_h"])
            out = cell.step(h, x, z).value
            assert np.all(out >= np.minimum(h, candidate) - 1e-15)
            assert np.all(out <= np.maximum(h, candidate) + 1e-15)

    def test_latent_ignored_when_c_is_zero(self):
        """With C = 0, shifting z leaves h_t unchanged."""
        rng = np.random.default_rng(23)
        cell = StochasticGRUCell(2, 3, 2, rng)
        for gate in GATES:
            getattr(cell, f"C_{gate}").value[...] = 0.0
        h, x, z = rng.normal(size=3), rng.normal(size=2), rng.normal(size=2)
        np.testing.assert_array_equal(cell.step(h, x, z).value, cell.step(h, x, z + 1.0).value)

    def test_gradients_match_finite_differences(self):
        """Every weight, the inputs and the state pass a 1e-4 gradient check."""
        rng = np.random.default_rng(24)
        cell = StochasticGRUCell(2, 3, 2, rng)
        for gate in GATES:
            getattr(cell, f"b_{gate}").value[...] = rng.normal(scale=0.3, size=3)
        h = Tensor(rng.normal(size=3), requires_grad=True)
        x = Tensor(rng.normal(size=2), requires_grad=True)
        z = Tensor(rng.normal(size=2), requires_grad=True)
        weights = Tensor(rng.normal(size=3))

        report = grad_check_leaves(
            lambda: sum_all(cell.step(h, x, z) * weights),
            cell.parameters() + [h, x, z],
            tol=1e-4,
        )
        assert report.passed, report.max_rel_error


class TestHandSetWeights:
    """Test cells and MLPs with weights chosen by hand."""

    def test_scalar_gru(self):
        """Hidden size 1: the update reduces to a scalar recurrence."""
        cell = DeterministicGRUCell(1, 1)
        values = {
            "W_u": 0.5, "M_u": -1.0, "b_u": 0.1,
            "W_r": 1.0, "M_r": 0.5, "b_r": 0.0,
            "W_h": 2.0, "M_h": 1.5, "b_h": -0.5,
        }
        for name, value in values.items():
            getattr(cell, name).value[...] = value
        h, x = 0.4, 0.3

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        u = sig(0.5 * x - 1.0 * h + 0.1)
        r = sig(1.0 * x + 0.5 * h)
        candidate = math.tanh(2.0 * x + r * (1.5 * h) - 0.5)
        expected = u * h + (1.0 - u) * candidate
        assert cell.step([h], [x]).item() == pytest.approx(expected, rel=1e-12)

    def test_zero_softplus_head_gives_log_two(self):
        """Zero weights into a softplus head give ln 2 per coordinate."""
        out = MLP(3, 2, hidden_layers=1, width=4, head="softplus")([1.0, -2.0, 0.5])
        np.testing.assert_allclose(out.value, [math.log(2.0)] * 2, rtol=1e-14)

    def test_zero_identity_head_gives_zero(self):
        """Zero weights into an identity head give zeros."""
        out = MLP(3, 2, hidden_layers=2, width=4)([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(out.value, [0.0, 0.0])

    def test_two_layer_forward(self):
        """One tanh hidden layer of two units and a linear output."""
        mlp = MLP(2, 1, hidden_layers=1, width=2, activation="tanh")
        mlp.weights[0].value[...] = [[1.0, -1.0], [0.5, 2.0]]
        mlp.biases[0].value[...] = [0.0, -1.0]
        mlp.weights[1].value[...] = [[1.0, -2.0]]
        mlp.biases[1].value[...] = [0.5]
        expected = math.tanh(3.0 - 1.0) - 2.0 * math.tanh(1.5 + 2.0 - 1.0) + 0.5
        assert mlp([3.0, 1.0]).item() == pytest.approx(expected, rel=1e-12)

    def test_lstm_matches_hand_evaluation(self):
        """A random 2-unit LSTM agrees with the standard gate equations."""
        rng = np.random.default_rng(25)
        cell = LSTMCell(3, 2, rng)
        for gate in ("i", "f", "o", "g"):
            getattr(cell, f"b_{gate}").value[...] = rng.normal(size=2)
        p = {name: t.value for name, t in cell.named_parameters()}
        h, c, x = rng.normal(size=2), rng.normal(size=2), rng.normal(size=3)

        i = _sig(p["W_i"] @ x + p["U_i"] @ h + p["b_i"])
        f = _sig(p["W_f"] @ x + p["U_f"] @ h + p["b_f"])
        o = _sig(p["W_o"] @ x + p["U_o"] @ h + p["b_o"])
        g = np.tanh(p["W_g"] @ x + p["U_g"] @ h + p["b_g"])
        c_expected = f * c + i * g

        h_out, c_out = cell.step((h, c), x)
        np.testing.assert_allclose(c_out.value, c_expected, rtol=0, atol=1e-12)
        np.testing.assert_allclose(h_out.value, o * np.tanh(c_expected), rtol=0, atol=1e-12)

    def test_lstm_zero_everything(self):
        """Zero input, state and weights give a zero hidden state."""
        h, c = LSTMCell(2, 3).step((np.zeros(3), np.zeros(3)), np.zeros(2))
        np.testing.assert_array_equal(h.value, np.zeros(3))
        np.testing.assert_array_equal(c.value, np.zeros(3))
