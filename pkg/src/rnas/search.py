"""Robust architecture search drivers.

Three strategies share one alternating loop:

* ``max``: perturbed inputs come from PGD maximizing the output discrepancy.
* ``uniform``: perturbed inputs are uniform samples from the epsilon ball.
* ``baseline``: plain first-order DARTS (no perturbation, no regularizer).

Every step pair updates the architecture matrices with Adam on a validation
batch, then the network weights with momentum SGD on a training batch.
Each update differentiates only the variables it changes; the other set is
held fixed.
"""

import csv
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import SGD, Adam, Tensor, clip_grad_norm, cosine_lr, grad
from .autodiff import functional as F
from .data import split
from .perturb import PerturbSpec, pgd_attack, search_pgd, uniform_noise
from .robustloss import F_KINDS, discrepancy, robust_loss
from .supernet import Supernet, SupernetConfig, derive_genotype

STRATEGIES = ("max", "uniform", "baseline")


@dataclass
class SearchConfig:
    strategy: str = "max"
    epochs: int = 50
    warmup: int = 15
    batch_size: int = 64
    lam: float = 1.0
    f_kind: str = "kl"
    perturb: PerturbSpec = field(default_factory=search_pgd)
    w_lr: float = 0.025
    w_lr_min: float = 0.001
    w_momentum: float = 0.9
    w_weight_decay: float = 3e-4
    grad_clip: float = 5.0
    a_lr: float = 3e-4
    a_betas: tuple = (0.5, 0.999)
    a_weight_decay: float = 1e-3
    split_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.perturb, dict):
            self.perturb = PerturbSpec(**self.perturb)
        self.a_betas = tuple(self.a_betas)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.f_kind not in F_KINDS:
            raise ValueError(f"unknown discrepancy {self.f_kind!r}; choose from {F_KINDS}")
        if not 0 <= self.warmup < self.epochs:
            raise ValueError(f"need 0 <= warmup < epochs, got warmup={self.warmup}, epochs={self.epochs}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")


@dataclass
class EpochRecord:
    epoch: int
    phase: str
    lr: float
    train_loss: float
    train_reg: float
    valid_loss: float
    valid_reg: float
    alpha_steps: int
    weight_steps: int
    attack_grads: int
    entropy_normal: list
    entropy_reduce: list
    seconds: float = 0.0


@dataclass
class SearchReport:
    config: SearchConfig
    records: list
    genotype: object = None
    alpha_normal: np.ndarray = None
    alpha_reduce: np.ndarray = None
    wall_clock: float = 0.0

    def to_csv(self, path):
        """One row per epoch; wall-clock timings are left out so reruns match byte for byte."""
        if not self.records:
            raise ValueError("no epochs recorded")
        n_edges = len(self.records[0].entropy_normal)
        head = ["epoch", "phase", "lr", "train_loss", "train_reg", "valid_loss", "valid_reg",
                "alpha_steps", "weight_steps", "attack_grads"]
        head += [f"entropy_normal_{e}" for e in range(n_edges)]
        head += [f"entropy_reduce_{e}" for e in range(n_edges)]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(head)
            for r in self.records:
                out.writerow([r.epoch, r.phase, repr(r.lr), repr(r.train_loss), repr(r.train_reg),
                              repr(r.valid_loss), repr(r.valid_reg), r.alpha_steps, r.weight_steps,
                              r.attack_grads] + [repr(v) for v in r.entropy_normal + r.entropy_reduce])


def edge_entropy(alpha):
    a = np.asarray(alpha, dtype=np.float64)
    p = np.exp(a - a.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    return [float(v) for v in -(p * np.log(np.clip(p, 1e-300, None))).sum(axis=1)]


class Searcher:
    """Holds a supernet, both optimizers, the RNG streams, and step counters.

    ``trace`` (when enabled) records every update as ``"A"`` (architecture)
    or ``"W"`` (weights), in order.
    """

    def __init__(self, model, config, trace=False):
        self.model = model
        self.cfg = config
        data_seq, attack_seq = np.random.SeedSequence(config.seed).spawn(2)
        self.data_rng = np.random.default_rng(data_seq)
        self.attack_rng = np.random.default_rng(attack_seq)
        self.w_opt = SGD(model.weights(), config.w_lr, config.w_momentum, config.w_weight_decay)
        self.a_opt = Adam(model.arch_parameters(), config.a_lr, config.a_betas, weight_decay=config.a_weight_decay)
        self.alpha_steps = 0
        self.weight_steps = 0
        self.attack_grads = 0
        self.trace = [] if trace else None

    # perturbation and loss

    def perturbed(self, x, clean_logits):
        cfg = self.cfg
        if cfg.strategy == "uniform":
            return uniform_noise(x, cfg.perturb.replace(kind="uniform"), self.attack_rng)
        spec = cfg.perturb.replace(kind="pgd")
        clean = Tensor(clean_logits)

        def objective(xt):
            self.attack_grads += 1
            return discrepancy(clean, self.model(xt), cfg.f_kind)

        return pgd_attack(objective, x, spec, self.attack_rng)

    def loss(self, x, y):
        """Robust loss on one batch; returns (loss Tensor, regularizer value)."""
        logits = self.model(x)
        task = F.cross_entropy(logits, y)
        if self.cfg.strategy == "baseline":
            return task, 0.0
        x_pert = self.perturbed(x, logits.data)
        disc = discrepancy(logits, self.model(x_pert), self.cfg.f_kind)
        return robust_loss(task, disc, self.cfg.lam), float(disc.item())

    # updates

    def arch_step(self, x, y):
        loss, reg = self.loss(x, y)
        params = self.model.arch_parameters()
        for p, g in zip(params, grad(loss, params)):
            p.grad = g
        self.a_opt.step()
        self.a_opt.zero_grad()
        self.alpha_steps += 1
        if self.trace is not None:
            self.trace.append("A")
        return float(loss.item()), reg

    def weight_step(self, x, y):
        loss, reg = self.loss(x, y)
        params = self.model.weights()
        for p, g in zip(params, grad(loss, params)):
            p.grad = g
        if self.cfg.grad_clip:
            clip_grad_norm(params, self.cfg.grad_clip)
        self.w_opt.step()
        self.w_opt.zero_grad()
        self.weight_steps += 1
        if self.trace is not None:
            self.trace.append("W")
        return float(loss.item()), reg

    # epochs

    def run_epoch(self, train, valid, epoch, update_arch):
        cfg = self.cfg
        t0 = time.perf_counter()
        counts = (self.alpha_steps, self.weight_steps, self.attack_grads)
        self.w_opt.lr = cosine_lr(cfg.w_lr, cfg.w_lr_min, epoch, cfg.epochs)
        order_t = self.data_rng.permutation(len(train))
        order_v = self.data_rng.permutation(len(valid))
        b = cfg.batch_size
        steps = min(len(train), len(valid)) // b if update_arch else len(train) // b
        if steps < 1:
            raise ValueError(f"dataset too small for one batch of {b}")
        t_loss, t_reg, v_loss, v_reg = [], [], [], []
        for s in range(steps):
            if update_arch:
                iv = order_v[s * b : (s + 1) * b]
                loss, reg = self.arch_step(valid.images[iv], valid.labels[iv])
                v_loss.append(loss)
                v_reg.append(reg)
            it = order_t[s * b : (s + 1) * b]
            loss, reg = self.weight_step(train.images[it], train.labels[it])
            t_loss.append(loss)
            t_reg.append(reg)
        nan = float("nan")
        return EpochRecord(
            epoch=epoch,
            phase="search" if update_arch else "warmup",
            lr=float(self.w_opt.lr),
            train_loss=float(np.mean(t_loss)),
            train_reg=float(np.mean(t_reg)),
            valid_loss=float(np.mean(v_loss)) if v_loss else nan,
            valid_reg=float(np.mean(v_reg)) if v_reg else nan,
            alpha_steps=self.alpha_steps - counts[0],
            weight_steps=self.weight_steps - counts[1],
            attack_grads=self.attack_grads - counts[2],
            entropy_normal=edge_entropy(self.model.alpha_normal.data),
            entropy_reduce=edge_entropy(self.model.alpha_reduce.data),
            seconds=time.perf_counter() - t0,
        )


def warmup_epoch(searcher, train, epoch=0):
    """Weights-only epoch; the architecture matrices are left untouched."""
    return searcher.run_epoch(train, train, epoch, update_arch=False)


def rnas_max_epoch(searcher, train, valid, epoch=0):
    if searcher.cfg.strategy != "max":
        raise ValueError("rnas_max_epoch needs a searcher configured with strategy='max'")
    return searcher.run_epoch(train, valid, epoch, update_arch=True)


def rnas_uniform_epoch(searcher, train, valid, epoch=0):
    if searcher.cfg.strategy != "uniform":
        raise ValueError("rnas_uniform_epoch needs a searcher configured with strategy='uniform'")
    return searcher.run_epoch(train, valid, epoch, update_arch=True)


def baseline_epoch(searcher, train, valid, epoch=0):
    return searcher.run_epoch(train, valid, epoch, update_arch=True)


def run_search(config, dataset=None, supernet_config=None, train=None, valid=None, trace=False,
               on_epoch=None):
    """Warm up for ``config.warmup`` epochs, then alternate updates until ``config.epochs``.

    Pass either ``dataset`` (split in two with ``config.split_fraction``) or
    explicit ``train``/``valid`` halves. Returns a :class:`SearchReport`; the
    trained supernet is attached as ``report.model`` and the searcher as
    ``report.searcher``.
    """
    if dataset is not None:
        train, valid = split(dataset, config.split_fraction, config.seed)
    if train is None or valid is None:
        raise ValueError("run_search needs a dataset or explicit train/valid halves")
    if min(len(train), len(valid)) < config.batch_size:
        raise ValueError(f"dataset too small for one batch of {config.batch_size}: "
                         f"{len(train)} train / {len(valid)} valid examples")
    if supernet_config is None:
        c, _, _ = train.image_shape
        supernet_config = SupernetConfig(in_channels=c, num_classes=train.num_classes)
    model = Supernet(supernet_config, seed=config.seed)
    searcher = Searcher(model, config, trace=trace)
    start = time.perf_counter()
    records = []
    for epoch in range(config.epochs):
        update_arch = epoch >= config.warmup
        rec = searcher.run_epoch(train, valid, epoch, update_arch)
        records.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
    report = SearchReport(
        config=config,
        records=records,
        genotype=derive_genotype(model.alpha_normal, model.alpha_reduce, supernet_config.op_names,
                                 supernet_config.nodes),
        alpha_normal=model.alpha_normal.data.copy(),
        alpha_reduce=model.alpha_reduce.data.copy(),
        wall_clock=time.perf_counter() - start,
    )
    report.model = model
    report.searcher = searcher
    return report


def config_dict(config):
    return asdict(config)
