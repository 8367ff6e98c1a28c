import numpy as np
import pytest

from xids.errors import DivergenceError, UsageError
from xids.vae import (
    build_vae,
    encode_dataset,
    reparameterize,
    train_vae,
    vae_encode,
    vae_from_dict,
    vae_loss,
    vae_loss_and_grads,
    vae_parameter_count,
    vae_to_dict,
)

from test_nets import finite_diff, rel_err


class TestPieces:
    def test_reparameterize_oracle(self):
        # z = mu + exp(logvar / 2) * noise; logvar = ln 4 gives scale 2
        z = reparameterize(np.array([[1.0]]), np.array([[np.log(4.0)]]), np.array([[0.5]]))
        np.testing.assert_allclose(z, [[2.0]], atol=1e-12)

    def test_zero_noise_returns_mean(self):
        rng = np.random.default_rng(0)
        mu = rng.standard_normal((4, 3))
        logvar = rng.standard_normal((4, 3))
        np.testing.assert_array_equal(reparameterize(mu, logvar, np.zeros((4, 3))), mu)

    def test_kl_of_unit_mean_zero_logvar_is_half(self):
        _, _, kl = vae_loss(np.zeros((1, 1)), np.zeros((1, 1)),
                            mu=np.array([[1.0]]), logvar=np.array([[0.0]]))
        np.testing.assert_allclose(kl, 0.5, atol=1e-12)

    def test_kl_zero_at_standard_normal(self):
        _, _, kl = vae_loss(np.zeros((3, 2)), np.zeros((3, 2)),
                            mu=np.zeros((3, 1)), logvar=np.zeros((3, 1)))
        assert kl == 0.0

    def test_recon_is_row_sum_of_squares_mean(self):
        x = np.array([[1.0, 0.0], [0.0, 2.0]])
        total, recon, kl = vae_loss(x, np.zeros_like(x), np.zeros((2, 1)), np.zeros((2, 1)))
        np.testing.assert_allclose(recon, (1.0 + 4.0) / 2)
        np.testing.assert_allclose(total, recon + kl)

    def test_beta_scales_kl(self):
        x = np.ones((2, 2))
        mu, logvar = np.ones((2, 1)), np.zeros((2, 1))
        t1, r, k = vae_loss(x, x, mu, logvar, beta=1.0)
        t3, _, _ = vae_loss(x, x, mu, logvar, beta=3.0)
        np.testing.assert_allclose(t3 - t1, 2.0 * k, atol=1e-12)


class TestModel:
    def test_shapes(self):
        model = build_vae(6, [10, 8], 3, np.random.default_rng(0))
        mu, logvar = vae_encode(model, np.zeros((4, 6)))
        assert mu.shape == logvar.shape == (4, 3)
        assert model.in_dim == 6 and model.latent_dim == 3
        # trunk 6->10->8, heads 8->3 twice, decoder 3->8->10->6
        assert vae_parameter_count(model) == (
            (10 * 6 + 10) + (8 * 10 + 8) + 2 * (3 * 8 + 3)
            + (8 * 3 + 8) + (10 * 8 + 10) + (6 * 10 + 6)
        )

    def test_needs_hidden_layer(self):
        with pytest.raises(UsageError):
            build_vae(6, [], 3, np.random.default_rng(0))

    def test_encode_dataset_is_posterior_mean(self):
        rng = np.random.default_rng(1)
        model = build_vae(5, [7], 2, rng)
        X = rng.standard_normal((9, 5))
        mu, _ = vae_encode(model, X)
        np.testing.assert_array_equal(encode_dataset(model, X), mu)

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(2)
        model = build_vae(4, [6], 2, rng)
        clone = vae_from_dict(vae_to_dict(model))
        X = rng.standard_normal((5, 4))
        np.testing.assert_array_equal(encode_dataset(model, X), encode_dataset(clone, X))


class TestGradients:
    def test_matches_finite_differences(self):
        for trial in range(6):
            rng = np.random.default_rng(200 + trial)
            model = build_vae(4, [5], 2, rng)
            x = rng.standard_normal((6, 4))
            noise = rng.standard_normal((6, 2))
            beta = float(rng.uniform(0.3, 2.0))
            total, recon, kl, grads = vae_loss_and_grads(model, x, noise, beta)
            np.testing.assert_allclose(total, recon + beta * kl, atol=1e-12)

            def loss_fn():
                t, _, _, _ = vae_loss_and_grads(model, x, noise, beta)
                return t

            numeric = finite_diff(loss_fn, model.parameters())
            assert rel_err(grads, numeric) < 1e-6

    def test_grad_order_matches_parameters(self):
        rng = np.random.default_rng(3)
        model = build_vae(3, [4], 2, rng)
        _, _, _, grads = vae_loss_and_grads(
            model, rng.standard_normal((2, 3)), rng.standard_normal((2, 2))
        )
        for g, p in zip(grads, model.parameters()):
            assert g.shape == p.shape


class TestTraining:
    def test_loss_decreases(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((120, 6)) * 0.5
        _, history = train_vae(X, hidden=[8], latent_dim=2, epochs=20, batch_size=16, seed=0)
        assert history[-1]["loss"] < history[0]["loss"]

    def test_seeded_determinism(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((60, 4))
        m1, h1 = train_vae(X, hidden=[5], latent_dim=2, epochs=3, seed=9)
        m2, h2 = train_vae(X, hidden=[5], latent_dim=2, epochs=3, seed=9)
        for p1, p2 in zip(m1.parameters(), m2.parameters()):
            np.testing.assert_array_equal(p1, p2)
        assert h1 == h2

    def test_divergence_raises(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((64, 4))
        with pytest.raises(DivergenceError) as err:
            train_vae(X, hidden=[6], latent_dim=2, epochs=5, batch_size=16, lr=1e15, seed=0)
        assert err.value.kind == "divergence"
        assert err.value.exit_code == 3

    def test_input_validation(self):
        with pytest.raises(UsageError):
            train_vae(np.zeros((0, 3)), hidden=[4], latent_dim=2)
        with pytest.raises(UsageError):
            train_vae(np.zeros((5, 3)), hidden=[4], latent_dim=2, epochs=0)
