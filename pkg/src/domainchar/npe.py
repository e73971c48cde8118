"""Neural posterior estimation: fit a ConditionalFlow on simulated pairs."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .flow import ConditionalFlow
from .neural import AdamState, adam_step

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 256
    learning_rate: float = 1e-3
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    num_layers: int = 6
    hidden: tuple = (64, 64)
    num_bins: int = 8
    tail_bound: float = 3.0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if min(self.batch_size, self.max_epochs, self.num_layers, self.num_bins) < 1:
            raise ValueError("batch size, epochs, layers and bins must be positive")
        if self.learning_rate <= 0 or self.patience < 0 or self.tail_bound <= 0:
            raise ValueError("learning rate and tail bound must be positive, patience >= 0")


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)   # (epoch, train_loss, val_loss)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def best_val_loss(self) -> float:
        return min(v for _, _, v in self.epochs)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss"])
            for e, tr, va in self.epochs:
                w.writerow([e, repr(float(tr)), repr(float(va))])


def npe_loss(flow: ConditionalFlow, theta, x) -> float:
    """Mean negative log posterior density (physical units) over a batch."""
    theta = np.atleast_2d(theta)
    if len(theta) == 0:
        raise ValueError("empty batch")
    loss = -float(np.mean(flow.log_prob(theta, x)))
    if not np.isfinite(loss):
        raise DivergenceError("non-finite NPE loss")
    return loss


def _batched_loss(flow, theta, x, chunk=4096):
    total = 0.0
    for i in range(0, len(theta), chunk):
        total += -float(np.sum(flow.log_prob(theta[i:i + chunk], x[i:i + chunk])))
    return total / len(theta)


def fit(flow: ConditionalFlow, theta_train, x_train, theta_val, x_val,
        config: TrainConfig, rng: np.random.Generator) -> TrainReport:
    """Adam over shuffled minibatches with early stopping; restores the best
    validation checkpoint into ``flow``."""
    u_train = flow.space.to_model(theta_train)
    params = flow.parameters()
    state = AdamState.for_params(params, lr=config.learning_rate)
    report = TrainReport()
    best, best_params, wait = np.inf, flow.get_params(), 0
    n = len(u_train)
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = flow.loss_and_grad(u_train[idx], x_train[idx])
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise DivergenceError(
                    f"non-finite loss/gradient at epoch {epoch}, batch starting {start}")
            adam_step(params, grads, state)
            total += loss * len(idx)
        # report in physical units so train/val are comparable
        train_loss = total / n - flow.space.log_jacobian
        val_loss = _batched_loss(flow, theta_val, x_val)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        report.epochs.append((epoch, train_loss, val_loss))
        log.info("epoch %d train %.4f val %.4f", epoch, train_loss, val_loss)
        if val_loss < best:
            best, best_params, wait = val_loss, flow.get_params(), 0
            report.best_epoch = epoch
        else:
            wait += 1
            if wait > config.patience:
                report.stopped_early = True
                break
    flow.set_params(best_params)
    return report


def train(dataset, config: TrainConfig | None = None):
    """Build and train a flow on a Dataset's train/val splits."""
    config = config or TrainConfig()
    train_set, val_set = dataset.subset("train"), dataset.subset("val")
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("dataset needs non-empty train and val splits")
    rng = np.random.default_rng(config.seed)
    x = train_set.features
    flow = ConditionalFlow(dataset.space, x.shape[1], config.num_layers,
                           config.hidden, config.num_bins, config.tail_bound, rng=rng,
                           context_mean=x.mean(axis=0),
                           context_scale=x.std(axis=0) + 1e-8)
    report = fit(flow, train_set.theta, x, val_set.theta, val_set.features,
                 config, rng)
    return flow, report
