"""Imputation network and its adversarial pretraining.

ImNet maps ``concat(X, M)`` (width 2d) through ``fc -> relu -> fc -> relu
-> fc -> sigmoid`` to a d-wide output in (0, 1), which is mapped affinely
onto each column's observed range ``[lo, hi]``. Inputs are min-max
normalised with the same bounds, so the network always works in unit
scale regardless of how the data were (or were not) standardised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .datagen import MaskedDataset
from .numcore import RngStream, Tensor

log = logging.getLogger(__name__)


def glorot(fan_in: int, fan_out: int, rng: RngStream, shape=None) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = shape or (fan_in, fan_out)
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)


def zeros_param(*shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


@dataclass
class ImNetParams:
    W1: Tensor  # (2d, d)
    b1: Tensor
    W2: Tensor  # (d, d)
    b2: Tensor
    W3: Tensor  # (d, d)
    b3: Tensor
    lo: np.ndarray
    hi: np.ndarray

    @property
    def d(self) -> int:
        return self.W3.shape[1]

    def tensors(self) -> list[Tensor]:
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def named(self) -> dict[str, Tensor]:
        return dict(zip(("W1", "b1", "W2", "b2", "W3", "b3"), self.tensors()))

    @property
    def span(self) -> np.ndarray:
        span = self.hi - self.lo
        return np.where(span > 0, span, 1.0)

    def copy(self) -> "ImNetParams":
        t = [Tensor(p.data.copy(), requires_grad=True) for p in self.tensors()]
        return ImNetParams(*t, lo=self.lo.copy(), hi=self.hi.copy())


def init_imnet(d: int, rng: RngStream, lo, hi) -> ImNetParams:
    return ImNetParams(
        glorot(2 * d, d, rng), zeros_param(d),
        glorot(d, d, rng), zeros_param(d),
        glorot(d, d, rng), zeros_param(d),
        lo=np.asarray(lo, dtype=np.float64).copy(),
        hi=np.asarray(hi, dtype=np.float64).copy(),
    )


def init_imnet_for(ds: MaskedDataset, rng: RngStream) -> ImNetParams:
    lo, hi = ds.column_bounds()
    return init_imnet(ds.d, rng, lo, hi)


def normalize(X: np.ndarray, params: ImNetParams) -> np.ndarray:
    return (X - params.lo) / params.span


def imnet_unit(Z, M, params: ImNetParams) -> Tensor:
    """Network body on unit-scale input ``Z``; output in (0, 1)."""
    M = np.asarray(M, dtype=np.float64)
    Z = nc.as_tensor(Z)
    if Z.shape != M.shape or Z.shape[1] != params.d:
        raise nc.ShapeError("imnet_forward", Z.shape, M.shape)
    h = nc.concat([Z, Tensor(M)], axis=1)
    h = nc.relu(h @ params.W1 + params.b1)
    h = nc.relu(h @ params.W2 + params.b2)
    return nc.sigmoid(h @ params.W3 + params.b3)


def imnet_forward(X_filled, M, params: ImNetParams, fill=None) -> Tensor:
    """Impute: returns X_im (n x d) in data units.

    ``X_filled`` must hold finite values everywhere (unobserved cells are
    ignored). ``fill`` gives the unit-scale values the network sees at
    unobserved cells; zeros by default.
    """
    M = np.asarray(M, dtype=np.float64)
    X_filled = np.asarray(X_filled, dtype=np.float64)
    if X_filled.shape != M.shape:
        raise nc.ShapeError("imnet_forward", X_filled.shape, M.shape)
    Z = M * normalize(np.where(M == 1, X_filled, params.lo), params)
    if fill is not None:
        Z = Z + (1.0 - M) * fill
    out = imnet_unit(Z, M, params)
    return out * params.span + params.lo


def combine(X, M, X_im):
    """``(1 - M) * X_im + M * X``; observed entries are copied verbatim.

    Works on plain arrays or on a :class:`Tensor` ``X_im`` (in which case the
    result stays on the autodiff graph).
    """
    M = np.asarray(M)
    X = np.asarray(X, dtype=np.float64)
    if isinstance(X_im, Tensor):
        if X_im.shape != M.shape or X.shape != M.shape:
            raise nc.ShapeError("combine", X.shape, M.shape, X_im.shape)
        observed = np.where(M == 1, X, 0.0)
        return X_im * (1.0 - M) + observed
    X_im = np.asarray(X_im, dtype=np.float64)
    if X_im.shape != M.shape or X.shape != M.shape:
        raise nc.ShapeError("combine", X.shape, M.shape, X_im.shape)
    return np.where(M == 1, X, X_im)


def imputation_rmse(ds: MaskedDataset, X_true, X_in) -> float:
    """Root-mean-square error over unobserved cells only."""
    missing = ds.M == 0
    if not missing.any():
        raise ValueError("imputation_rmse: dataset has no unobserved entries")
    diff = np.asarray(X_in, dtype=np.float64)[missing] - np.asarray(X_true, dtype=np.float64)[missing]
    return float(np.sqrt(np.mean(diff * diff)))


def mean_impute(ds: MaskedDataset) -> np.ndarray:
    return ds.filled(ds.column_means())


def impute(ds: MaskedDataset, params: ImNetParams, fill=None) -> np.ndarray:
    """Complete matrix X_in for a whole dataset (no gradient tracking)."""
    X_im = imnet_forward(ds.filled(0.0), ds.M, params, fill=fill).data
    return combine(ds.filled(0.0), ds.M, X_im)


# -- adversarial pretraining ---------------------------------------------------
@dataclass
class _Discriminator:
    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    W3: Tensor
    b3: Tensor

    def tensors(self):
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def logits(self, Z: Tensor, H: np.ndarray) -> Tensor:
        h = nc.concat([Z, Tensor(H)], axis=1)
        h = nc.relu(h @ self.W1 + self.b1)
        h = nc.relu(h @ self.W2 + self.b2)
        return h @ self.W3 + self.b3


def _masked_mean(t: Tensor, weights: np.ndarray) -> Tensor:
    return nc.sum_(t * weights) * (1.0 / max(float(weights.sum()), 1.0))


def pretrain_adversarial(
    ds: MaskedDataset,
    rng: RngStream,
    epochs: int = 2000,
    batch_size: int = 64,
    hint_rate: float = 0.9,
    alpha: float = 10.0,
    lr: float = 3e-2,
    noise_scale: float = 0.01,
    drop_rate: float = 0.2,
    init: ImNetParams | None = None,
    history: list | None = None,
    log_every: int = 100,
) -> ImNetParams:
    """Train ImNet as the generator of a hint-based imputation GAN.

    The discriminator mirrors ImNet (inputs: completed row and hint, output:
    per-cell probability of "observed"). The hint reveals each mask cell with
    probability ``hint_rate`` and is 0.5 elsewhere. The generator minimises
    the adversarial loss on unobserved cells plus ``alpha`` times the
    unit-scale squared reconstruction error on observed cells. Unobserved
    inputs are filled with ``U(0, noise_scale)`` noise.

    Each observed cell is additionally hidden from the generator with
    probability ``drop_rate``; the game is played on that thinned mask while
    the reconstruction term still covers every observed cell, so the
    generator has to predict values rather than copy its input.

    ``epochs`` counts minibatch updates; 0 returns ``init`` untouched.
    """
    if not 0.0 <= hint_rate <= 1.0:
        raise ValueError(f"pretrain_adversarial: hint_rate must lie in [0, 1], got {hint_rate}")
    if not 0.0 <= drop_rate < 1.0:
        raise ValueError(f"pretrain_adversarial: drop_rate must lie in [0, 1), got {drop_rate}")
    if epochs < 0:
        raise ValueError("pretrain_adversarial: epochs must be >= 0")
    ds.check_coverage(2)
    params = init if init is not None else init_imnet_for(ds, rng.child("imnet-init"))
    if epochs == 0:
        return params
    d = ds.d
    dr = rng.child("discriminator-init")
    disc = _Discriminator(
        glorot(2 * d, d, dr), zeros_param(d),
        glorot(d, d, dr), zeros_param(d),
        glorot(d, d, dr), zeros_param(d),
    )
    opt_g = nc.Adam(params.tensors(), lr)
    opt_d = nc.Adam(disc.tensors(), lr)
    Xu = normalize(ds.filled(0.0), params) * ds.M
    M_all = ds.M.astype(np.float64)
    batch_rng = rng.child("batches")
    noise_rng = rng.child("noise")
    hint_rng = rng.child("hints")
    drop_rng = rng.child("drop")
    bs = min(batch_size, ds.n)
    for step in range(epochs):
        idx = batch_rng.choice(ds.n, size=bs, replace=False)
        M_obs = M_all[idx]
        X_obs = Xu[idx]
        M = M_obs * (drop_rng.random(M_obs.shape) >= drop_rate)
        Z = M * X_obs + (1.0 - M) * noise_rng.uniform(0.0, noise_scale, size=M.shape)
        B = (hint_rng.random(M.shape) < hint_rate).astype(np.float64)
        H = B * M + 0.5 * (1.0 - B)

        # discriminator step on a detached imputation
        G = imnet_unit(Z, M, params).detach()
        Zhat = Tensor(M * Z + (1.0 - M) * G.data)
        logit = disc.logits(Zhat, H)
        d_loss = -nc.mean(nc.log_sigmoid(logit) * M + nc.log_sigmoid(-logit) * (1.0 - M))
        opt_d.zero_grad()
        nc.backward(d_loss)
        opt_d.step()

        # generator step
        G = imnet_unit(Z, M, params)
        Zhat = G * (1.0 - M) + M * Z
        logit = disc.logits(Zhat, H)
        adv = -_masked_mean(nc.log_sigmoid(logit), 1.0 - M) if (1.0 - M).sum() else None
        diff = G - M_obs * X_obs
        rec = _masked_mean(diff * diff, M_obs)
        g_loss = rec * alpha if adv is None else adv + rec * alpha
        for p in disc.tensors():
            p.zero_grad()
        opt_g.zero_grad()
        nc.backward(g_loss)
        opt_g.step()

        if history is not None and (step % log_every == 0 or step == epochs - 1):
            pred = logit.data > 0
            acc = float(np.mean(pred == (M == 1)))
            history.append(
                {"step": step, "d_loss": float(d_loss.item()), "g_loss": float(g_loss.item()),
                 "rec_loss": float(rec.item()), "disc_accuracy": acc}
            )
    log.debug("pretraining finished after %d steps", epochs)
    return params
