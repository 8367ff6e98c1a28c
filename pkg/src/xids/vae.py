"""Variational autoencoder for compact tabular representations.

Encoder: a relu trunk feeding two linear heads (mu, log-variance).
Sampling: z = mu + exp(logvar / 2) * noise with standard-normal noise.
Decoder: the mirrored stack back to input width, linear output.

Loss, averaged over the batch rows:

  recon = mean_i sum_d (x - xhat)^2
  kl    = mean_i -0.5 * sum_k (1 + logvar - mu^2 - exp(logvar))
  total = recon + beta * kl

After training, features are the posterior means (no sampling).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, UsageError
from .nets import (
    DenseLayer,
    DenseNet,
    backward,
    build_net,
    forward,
    forward_cache,
    init_layer,
    make_optimizer,
    net_from_dict,
    net_to_dict,
)


@dataclass
class VaeModel:
    trunk: DenseNet
    mu_head: DenseLayer
    logvar_head: DenseLayer
    decoder: DenseNet

    @property
    def in_dim(self) -> int:
        return self.trunk.in_dim

    @property
    def latent_dim(self) -> int:
        return self.mu_head.fan_out

    def parameters(self) -> list[np.ndarray]:
        return (
            self.trunk.parameters()
            + [self.mu_head.W, self.mu_head.b, self.logvar_head.W, self.logvar_head.b]
            + self.decoder.parameters()
        )


def build_vae(in_dim: int, hidden: list[int], latent_dim: int, rng: np.random.Generator) -> VaeModel:
    if not hidden:
        raise UsageError("the encoder needs at least one hidden layer")
    if latent_dim < 1:
        raise UsageError("latent_dim must be positive")
    sizes = [in_dim] + list(hidden)
    trunk = DenseNet(
        [init_layer(rng, sizes[i], sizes[i + 1], "relu") for i in range(len(sizes) - 1)]
    )
    mu_head = init_layer(rng, hidden[-1], latent_dim, "linear")
    logvar_head = init_layer(rng, hidden[-1], latent_dim, "linear")
    decoder = build_net([latent_dim] + list(reversed(hidden)) + [in_dim], rng, "linear")
    return VaeModel(trunk, mu_head, logvar_head, decoder)


def vae_encode(model: VaeModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = forward(model.trunk, X)
    mu = h @ model.mu_head.W.T + model.mu_head.b
    logvar = h @ model.logvar_head.W.T + model.logvar_head.b
    return mu, logvar


def reparameterize(mu: np.ndarray, logvar: np.ndarray, noise: np.ndarray) -> np.ndarray:
    return mu + np.exp(0.5 * logvar) * noise


def vae_loss(x, xhat, mu, logvar, beta: float = 1.0) -> tuple[float, float, float]:
    """(total, recon, kl), each a batch mean over rows."""
    x = np.asarray(x, dtype=np.float64)
    recon = float(np.sum((x - xhat) ** 2, axis=1).mean())
    kl = float((-0.5 * np.sum(1.0 + logvar - mu**2 - np.exp(logvar), axis=1)).mean())
    return recon + beta * kl, recon, kl


def vae_loss_and_grads(model: VaeModel, x: np.ndarray, noise: np.ndarray, beta: float = 1.0):
    """One forward/backward pass with the noise fixed by the caller.

    Returns (total, recon, kl, grads) with grads in model.parameters()
    order.  Fixing the noise makes the gradient exact and finite-
    difference checkable.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    h, trunk_caches = forward_cache(model.trunk, x)
    mu = h @ model.mu_head.W.T + model.mu_head.b
    logvar = h @ model.logvar_head.W.T + model.logvar_head.b
    std = np.exp(0.5 * logvar)
    z = mu + std * noise
    xhat, dec_caches = forward_cache(model.decoder, z)
    total, recon, kl = vae_loss(x, xhat, mu, logvar, beta)

    g_xhat = 2.0 * (xhat - x) / n
    dec_grads, g_z = backward(model.decoder, dec_caches, g_xhat)
    g_mu = g_z + beta * mu / n
    g_logvar = g_z * noise * 0.5 * std + beta * 0.5 * (np.exp(logvar) - 1.0) / n
    gW_mu = g_mu.T @ h
    gb_mu = g_mu.sum(axis=0)
    gW_lv = g_logvar.T @ h
    gb_lv = g_logvar.sum(axis=0)
    g_h = g_mu @ model.mu_head.W + g_logvar @ model.logvar_head.W
    trunk_grads, _ = backward(model.trunk, trunk_caches, g_h)

    grads = trunk_grads + [gW_mu, gb_mu, gW_lv, gb_lv] + dec_grads
    return total, recon, kl, grads


def train_vae(
    X: np.ndarray,
    hidden: list[int],
    latent_dim: int,
    epochs: int = 100,
    batch_size: int = 64,
    lr: float = 0.001,
    beta: float = 1.0,
    optimizer: str = "adam",
    seed: int = 0,
) -> tuple[VaeModel, list[dict]]:
    """Minibatch training from a seed; returns the model and an epoch log.

    Raises DivergenceError as soon as a batch loss goes non-finite.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise UsageError("X must be a non-empty 2-d array")
    if epochs < 1 or batch_size < 1:
        raise UsageError("epochs and batch_size must be positive")
    rng = np.random.default_rng(seed)
    model = build_vae(X.shape[1], hidden, latent_dim, rng)
    opt = make_optimizer(optimizer, lr)
    params = model.parameters()
    n = X.shape[0]
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        tot_sum = rec_sum = kl_sum = 0.0
        for start in range(0, n, batch_size):
            batch = X[order[start : start + batch_size]]
            noise = rng.standard_normal((batch.shape[0], latent_dim))
            # overflow surfaces as a non-finite loss below, not a warning
            with np.errstate(over="ignore", invalid="ignore"):
                total, recon, kl, grads = vae_loss_and_grads(model, batch, noise, beta)
            if not np.isfinite(total):
                raise DivergenceError(
                    f"representation training diverged at epoch {epoch}", epoch=epoch
                )
            opt.step(params, grads)
            tot_sum += total * batch.shape[0]
            rec_sum += recon * batch.shape[0]
            kl_sum += kl * batch.shape[0]
        history.append(
            {"epoch": epoch, "loss": tot_sum / n, "recon": rec_sum / n, "kl": kl_sum / n}
        )
    return model, history


def encode_dataset(model: VaeModel, X: np.ndarray) -> np.ndarray:
    """Posterior means: the deterministic features downstream models use."""
    mu, _ = vae_encode(model, X)
    return mu


def vae_parameter_count(model: VaeModel) -> int:
    return sum(p.size for p in model.parameters())


def _layer_to_dict(l: DenseLayer) -> dict:
    return {"W": l.W.tolist(), "b": l.b.tolist(), "activation": l.activation}


def _layer_from_dict(e: dict) -> DenseLayer:
    return DenseLayer(
        W=np.array(e["W"], dtype=np.float64),
        b=np.array(e["b"], dtype=np.float64),
        activation=e["activation"],
    )


def vae_to_dict(model: VaeModel) -> dict:
    return {
        "in_dim": model.in_dim,
        "latent_dim": model.latent_dim,
        "trunk": net_to_dict(model.trunk),
        "mu_head": _layer_to_dict(model.mu_head),
        "logvar_head": _layer_to_dict(model.logvar_head),
        "decoder": net_to_dict(model.decoder),
    }


def vae_from_dict(d: dict) -> VaeModel:
    return VaeModel(
        trunk=net_from_dict(d["trunk"]),
        mu_head=_layer_from_dict(d["mu_head"]),
        logvar_head=_layer_from_dict(d["logvar_head"]),
        decoder=net_from_dict(d["decoder"]),
    )
