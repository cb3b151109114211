"""Actor-critic search over DAGs.

Per epoch: draw a minibatch of rows, impute it, encode the attributes,
decode edge logits, sample graph(s), score them, regress the critic on the
reward, then take a policy-gradient step on the actor (imputer, encoder
and decoder) with the critic's mean value as baseline.

Rewards are computed on the full imputed data matrix while only the
minibatch is fed to the encoder. The policy sees the raw reward after an
affine rescaling fixed at start-up: the empty graph maps to 0 and the score
gap between the empty graph and "every node regressed on all others" maps
to 1.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import numcore as nc
from .actor import (
    decoder_logits,
    edge_entropy,
    edge_log_prob,
    edge_probs,
    featnet_forward,
    init_decoder,
    init_featnet,
    sample_graphs,
)
from .critic import RssCache, compute_reward, init_vnet, node_rss, score_from_rss, vnet_forward
from .datagen import MaskedDataset
from .imputer import (
    ImNetParams,
    combine,
    impute,
    imnet_forward,
    init_imnet_for,
    mean_impute,
    pretrain_adversarial,
)
from .numcore import RngStream, Tensor, acyclicity_value, least_squares

log = logging.getLogger(__name__)


# advantage normalisation never divides by less than this
ADV_SCALE_FLOOR = 1e-3


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 20000
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    lr_imnet: float = 1e-4
    lambda1: float | None = None  # None: derived from the data, see Trainer
    lambda2: float | None = None
    penalty_scale: float = 1.0
    penalty_patience: int = 500
    penalty_factor: float = 10.0
    entropy_weight: float = 0.01
    prune_threshold: float = 0.3
    seed: int = 0
    basis: str = "linear"
    imputer: str = "imnet"
    pretrain: bool = True
    pretrain_epochs: int = 2000
    pretrain_batch_size: int = 64
    pretrain_lr: float = 3e-2
    hint_rate: float = 0.9
    alpha: float = 10.0
    samples_per_epoch: int = 8
    feature_dim: int = 64
    encoder_layers: int = 2
    attention_heads: int = 4
    ff_dim: int = 128
    decoder_hidden: int = 64
    value_hidden: int = 64
    edge_bias: float | None = None  # None: 0 for d <= 12, -10 above
    grad_clip: float = 5.0
    optimizer: str = "adam"
    reward_rows: str = "all"
    normalize_advantage: bool = True
    encoder_scaling: str = "global"

    def validate(self) -> list[str]:
        errors = []
        positive_int = ("batch_size", "pretrain_batch_size", "samples_per_epoch", "feature_dim",
                        "encoder_layers", "attention_heads", "ff_dim", "decoder_hidden",
                        "value_hidden", "penalty_patience")
        for name in positive_int:
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                errors.append(f"{name} must be a positive integer, got {v!r}")
        for name in ("epochs", "pretrain_epochs", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                errors.append(f"{name} must be a nonnegative integer, got {v!r}")
        for name in ("lr_actor", "lr_critic", "pretrain_lr", "penalty_factor", "penalty_scale"):
            if not getattr(self, name) > 0:
                errors.append(f"{name} must be positive")
        for name in ("lr_imnet", "entropy_weight", "prune_threshold", "alpha", "grad_clip"):
            if not getattr(self, name) >= 0:
                errors.append(f"{name} must be nonnegative")
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                errors.append(f"{name} must be nonnegative or null")
        if not 0.0 <= self.hint_rate <= 1.0:
            errors.append("hint_rate must lie in [0, 1]")
        if self.basis not in ("linear", "quadratic"):
            errors.append(f"basis must be 'linear' or 'quadratic', got {self.basis!r}")
        if self.imputer not in ("imnet", "mean"):
            errors.append(f"imputer must be 'imnet' or 'mean', got {self.imputer!r}")
        if self.optimizer not in ("adam", "sgd"):
            errors.append(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.reward_rows not in ("all", "batch"):
            errors.append(f"reward_rows must be 'all' or 'batch', got {self.reward_rows!r}")
        if self.encoder_scaling not in ("column", "global"):
            errors.append(f"encoder_scaling must be 'column' or 'global', got {self.encoder_scaling!r}")
        if isinstance(self.feature_dim, int) and isinstance(self.attention_heads, int) \
                and self.attention_heads > 0 and self.feature_dim % self.attention_heads:
            errors.append("feature_dim must be divisible by attention_heads")
        return errors

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrainResult:
    best_graph: np.ndarray | None
    best_reward: float | None
    best_score: float | None
    best_epoch: int | None
    pruned_graph: np.ndarray | None
    trace: list[dict]
    wall_time: float
    edge_probs: np.ndarray | None = None
    lambdas: tuple[float, float] = (0.0, 0.0)
    error: str | None = None
    X_in: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def compute_loss(reward, values: Tensor, log_prob, entropy, entropy_weight: float, adv_scale: float = 1.0):
    """Return ``(actor_loss, critic_loss)``.

    ``reward`` may be a scalar with a scalar ``log_prob`` or a length-s
    vector of rewards with the matching vector of log-probabilities, in
    which case both losses are averaged over the s samples. The advantage
    ``reward - mean(values)`` enters the actor loss as a constant, so only
    ``log_prob`` and ``entropy`` carry actor gradients. ``adv_scale``
    divides the advantage only (the critic target is unchanged).
    """
    r = np.atleast_1d(np.asarray(reward, dtype=np.float64))
    if not np.all(np.isfinite(r)):
        raise TrainingError(f"non-finite reward {reward}")
    values = nc.as_tensor(values)
    advantage = (r - float(values.data.mean())) / adv_scale
    lp = nc.reshape(nc.as_tensor(log_prob), (len(r),))
    actor_loss = nc.scale(nc.sum_(lp * advantage), -1.0 / len(r))
    actor_loss = actor_loss - nc.scale(nc.as_tensor(entropy), entropy_weight)
    err = nc.reshape(values, (1, -1)) - r[:, None]
    critic_loss = nc.mean(err * err)
    return actor_loss, critic_loss


def literal_loss(reward: float, values: np.ndarray, log_prob: float, entropy_weight: float) -> float:
    d = len(values)
    return float(np.mean(reward - values) + entropy_weight * log_prob / d)


def prune_graph(A, X_in, threshold: float) -> np.ndarray:
    """Refit each node on its parents (with intercept) and drop edges whose
    coefficient magnitude is below ``threshold``."""
    A = np.asarray(A, dtype=np.int8).copy()
    X = np.asarray(X_in, dtype=np.float64)
    if acyclicity_value(A) != 0.0:
        raise ValueError("prune_graph: input graph is not acyclic")
    n = X.shape[0]
    for j in range(A.shape[0]):
        parents = np.nonzero(A[:, j])[0]
        if not len(parents):
            continue
        coef, _ = least_squares(X[:, j], np.column_stack([X[:, parents], np.ones(n)]))
        for p, c in zip(parents, coef[:-1]):
            if abs(c) < threshold:
                A[p, j] = 0
    return A


def score_bounds(X: np.ndarray, basis: str = "linear") -> tuple[float, float]:
    """Score of the empty graph and the edge-free score of the graph where
    every node is regressed on all others (a lower bound on any RSS)."""
    n, d = X.shape
    empty = sum(node_rss(X, i, [], basis) for i in range(d))
    full = sum(node_rss(X, i, [j for j in range(d) if j != i], basis) for i in range(d))
    return score_from_rss(empty, n, d, 0), score_from_rss(full, n, d, 0)


class Trainer:
    def __init__(self, ds: MaskedDataset, cfg: TrainConfig, imnet: ImNetParams | None = None):
        problems = cfg.validate()
        if problems:
            raise ValueError("invalid training config: " + "; ".join(problems))
        ds.check_coverage(2)
        self.ds = ds
        self.cfg = cfg
        self.d = ds.d
        self.rng = RngStream(cfg.seed, "train")
        self.batch_size = min(cfg.batch_size, ds.n)
        self.X0 = ds.filled(0.0)
        self.M = ds.M.astype(np.float64)

        self.imnet: ImNetParams | None = None
        if cfg.imputer == "imnet":
            if imnet is not None:
                self.imnet = imnet.copy()
            elif cfg.pretrain and cfg.pretrain_epochs > 0:
                self.imnet = pretrain_adversarial(
                    ds, self.rng.child("pretrain"), epochs=cfg.pretrain_epochs,
                    batch_size=cfg.pretrain_batch_size, hint_rate=cfg.hint_rate, alpha=cfg.alpha,
                    lr=cfg.pretrain_lr,
                )
            else:
                self.imnet = init_imnet_for(ds, self.rng.child("imnet-init"))
        self.fully_observed = bool(ds.M.all())
        self._X_mean = mean_impute(ds) if self.imnet is None else None

        self.center = ds.column_means()
        sd = ds.column_stds()
        self.spread = np.where(sd > 0, sd, 1.0)
        if cfg.encoder_scaling == "global":
            # one shared scale keeps relative column spreads visible to the encoder
            self.spread = np.full(self.d, float(np.sqrt(np.mean(sd * sd))) or 1.0)

        k = cfg.feature_dim
        bias = cfg.edge_bias if cfg.edge_bias is not None else (0.0 if self.d <= 12 else -10.0)
        self.featnet = init_featnet(self.batch_size, self.rng.child("featnet-init"), k=k,
                                    layers=cfg.encoder_layers, heads=cfg.attention_heads, ff=cfg.ff_dim)
        self.decoder = init_decoder(k, self.rng.child("decoder-init"), hidden=cfg.decoder_hidden, bias=bias)
        self.vnet = init_vnet(k, self.rng.child("vnet-init"), hidden=cfg.value_hidden)

        clip = cfg.grad_clip if cfg.grad_clip > 0 else None
        self.opt_actor = nc.make_optimizer(cfg.optimizer, self.featnet.tensors() + self.decoder.tensors(),
                                           cfg.lr_actor, clip)
        self.opt_critic = nc.make_optimizer(cfg.optimizer, self.vnet.tensors(), cfg.lr_critic, clip)
        self.opt_imnet = None
        if self.imnet is not None and cfg.lr_imnet > 0 and not self.fully_observed:
            self.opt_imnet = nc.make_optimizer(cfg.optimizer, self.imnet.tensors(), cfg.lr_imnet, clip)

        self.batch_rng = self.rng.child("batches")
        self.sample_rng = self.rng.child("graphs")
        self.cache = RssCache()
        self._X_in: np.ndarray | None = None

        s_empty, s_full = score_bounds(self.full_imputation(), cfg.basis)
        self.score_offset = s_empty
        self.score_scale = max(s_empty - s_full, 1.0)
        self.lambda1 = cfg.lambda1 if cfg.lambda1 is not None else cfg.penalty_scale * self.score_scale
        self.lambda2 = cfg.lambda2 if cfg.lambda2 is not None else cfg.penalty_scale * self.score_scale

        self.epoch = 0
        self.last_dag_epoch = 0
        self.best: tuple[float, np.ndarray, float, int] | None = None
        self.trace: list[dict] = []

    # -- imputation ------------------------------------------------------
    def full_imputation(self) -> np.ndarray:
        if self._X_in is None:
            if self.imnet is None:
                self._X_in = self._X_mean.copy()
            else:
                self._X_in = impute(self.ds, self.imnet)
            self._X_in.flags.writeable = False
        return self._X_in

    def batch_input(self, rows: np.ndarray):
        if self.imnet is None:
            return Tensor(self._X_mean[rows])
        X_im = imnet_forward(self.X0[rows], self.M[rows], self.imnet)
        return combine(self.X0[rows], self.M[rows], X_im)

    def signal(self, reward: float) -> float:
        return (reward + self.score_offset) / self.score_scale

    # -- forward --------------------------------------------------------
    def encode(self, rows: np.ndarray):
        X_in = self.batch_input(rows)
        Z = (X_in - self.center) * (1.0 / self.spread)
        feat = featnet_forward(Z, self.featnet)
        return X_in, feat, decoder_logits(feat, self.decoder)

    def current_logits(self, rows: np.ndarray | None = None) -> np.ndarray:
        if rows is None:
            rows = np.arange(self.batch_size)
        return self.encode(rows)[2].data

    # -- one update -----------------------------------------------------
    def step(self, rows: np.ndarray | None = None) -> dict:
        cfg = self.cfg
        if rows is None:
            rows = self.batch_rng.choice(self.ds.n, size=self.batch_size, replace=False)
        X_in_b, feat, logits = self.encode(rows)
        A_s, P = sample_graphs(logits, self.sample_rng, cfg.samples_per_epoch)
        X_reward = self.full_imputation() if cfg.reward_rows == "all" else X_in_b.data
        breakdowns = [compute_reward(A, X_reward, self.lambda1, self.lambda2, self.cache, cfg.basis) for A in A_s]
        signals = np.array([self.signal(b.reward) for b in breakdowns])
        if not np.all(np.isfinite(signals)):
            raise TrainingError(f"non-finite reward at epoch {self.epoch}")

        any_dag = False
        for A, b in zip(A_s, breakdowns):
            if b.is_dag:
                any_dag = True
                if self.best is None or b.reward > self.best[0]:
                    self.best = (b.reward, A.copy(), b.score, self.epoch)

        # critic first, so the baseline reflects the current features
        feat_c = feat.detach()
        log_probs = edge_log_prob(logits, A_s)
        ent = edge_entropy(logits)
        _, critic_loss = compute_loss(signals, vnet_forward(feat_c, self.vnet), log_probs.data, ent.data,
                                      cfg.entropy_weight)
        self.opt_critic.zero_grad()
        nc.backward(critic_loss)
        self.opt_critic.step()

        values_after = vnet_forward(feat_c, self.vnet)
        adv_scale = 1.0
        if cfg.normalize_advantage and len(signals) > 1:
            adv_scale = max(float(signals.std()), ADV_SCALE_FLOOR)
        actor_loss, _ = compute_loss(signals, values_after.detach(), log_probs, ent, cfg.entropy_weight,
                                     adv_scale)
        if not math.isfinite(actor_loss.item()):
            raise TrainingError(f"non-finite actor loss at epoch {self.epoch}")
        self.opt_actor.zero_grad()
        if self.opt_imnet is not None:
            self.opt_imnet.zero_grad()
        nc.backward(actor_loss)
        self.opt_actor.step()
        if self.opt_imnet is not None:
            self.opt_imnet.step()
            self._X_in = None

        if any_dag:
            self.last_dag_epoch = self.epoch
        elif self.epoch - self.last_dag_epoch >= cfg.penalty_patience:
            self.lambda1 *= cfg.penalty_factor
            self.lambda2 *= cfg.penalty_factor
            self.last_dag_epoch = self.epoch
            log.info("epoch %d: no DAG for %d epochs, penalties now %g / %g",
                     self.epoch, cfg.penalty_patience, self.lambda1, self.lambda2)

        b0 = breakdowns[0]
        row = {
            "epoch": self.epoch,
            "reward": float(np.mean([b.reward for b in breakdowns])),
            "score": b0.score,
            "h": b0.h,
            "is_dag": int(b0.is_dag),
            "edges": b0.edge_count,
            "actor_loss": actor_loss.item(),
            "critic_loss": critic_loss.item(),
            "literal_loss": literal_loss(float(signals[0]), values_after.data, float(log_probs.data[0]),
                                         cfg.entropy_weight),
            "mean_value": float(values_after.data.mean()),
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "best_reward": self.best[0] if self.best else float("nan"),
        }
        self.trace.append(row)
        self.epoch += 1
        return row

    def run(self, epochs: int | None = None) -> TrainResult:
        epochs = self.cfg.epochs if epochs is None else epochs
        t0 = time.perf_counter()
        for _ in range(epochs):
            self.step()
        return self.result(time.perf_counter() - t0)

    def result(self, wall_time: float = 0.0) -> TrainResult:
        X_in = self.full_imputation()
        probs = edge_probs(self.current_logits()) if self.trace else None
        if self.best is None:
            return TrainResult(None, None, None, None, None, self.trace, wall_time, probs,
                               (self.lambda1, self.lambda2), error="no acyclic graph was sampled",
                               X_in=X_in)
        reward, A, score, epoch = self.best
        pruned = prune_graph(A, X_in, self.cfg.prune_threshold)
        return TrainResult(A, reward, score, epoch, pruned, self.trace, wall_time, probs,
                           (self.lambda1, self.lambda2), X_in=X_in,
                           extra={"cache_hits": self.cache.hits, "cache_misses": self.cache.misses})


def train(ds: MaskedDataset, cfg: TrainConfig, imnet: ImNetParams | None = None) -> TrainResult:
    return Trainer(ds, cfg, imnet).run()
