"""Training and attacking derived networks.

Standard training minimizes cross-entropy on natural inputs; adversarial
training minimizes it on PGD examples crafted against the current weights.
Evaluation reports clean, FGSM and PGD accuracy.
"""

import csv
import io
from dataclasses import dataclass, field, fields

import numpy as np

from .autodiff import SGD, Tensor, clip_grad_norm, cosine_lr, no_grad
from .autodiff import functional as F
from .perturb import PerturbSpec, adversarial_training_pgd, eval_fgsm, eval_pgd, perturb
from .supernet import count_parameters

MODES = ("standard", "adversarial")


@dataclass
class TrainProtocol:
    mode: str = "standard"
    epochs: int = 30
    batch_size: int = 64
    lr: float = 0.025
    lr_min: float = 0.0
    momentum: float = 0.9
    weight_decay: float = 3e-4
    grad_clip: float = 5.0
    cutout: int = 0
    drop_path: float = 0.0
    aux_weight: float = 0.0
    attack: PerturbSpec = field(default_factory=adversarial_training_pgd)
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.attack, dict):
            self.attack = PerturbSpec(**self.attack)
        if self.mode not in MODES:
            raise ValueError(f"unknown training mode {self.mode!r}; choose from {MODES}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if not 0.0 <= self.drop_path < 1.0:
            raise ValueError("drop_path must lie in [0, 1)")
        if self.cutout < 0 or self.aux_weight < 0:
            raise ValueError("cutout and aux_weight must be non-negative")

    @classmethod
    def full_scale(cls, mode="standard", seed=0):
        """Full-scale reference settings (hundreds of GPU hours; not run in CI)."""
        return cls(mode=mode, epochs=600, batch_size=96, cutout=16, drop_path=0.3, aux_weight=0.4, seed=seed)


def cutout(images, length, rng):
    """Zero one ``length`` x ``length`` square per image, clipped at the borders."""
    out = images.copy()
    if length <= 0:
        return out
    n, _, h, w = images.shape
    cy = rng.integers(0, h, n)
    cx = rng.integers(0, w, n)
    for k in range(n):
        y0, y1 = max(cy[k] - length // 2, 0), min(cy[k] - length // 2 + length, h)
        x0, x1 = max(cx[k] - length // 2, 0), min(cx[k] - length // 2 + length, w)
        out[k, :, y0:y1, x0:x1] = 0.0
    return out


def _ce_objective(net, labels):
    return lambda xt: F.cross_entropy(net(xt), labels)


def train_discrete(net, dataset, proto):
    """Train ``net`` in place; returns (net, history) with one dict per epoch."""
    if proto.aux_weight > 0 and getattr(net, "aux_head", None) is None:
        raise ValueError("aux_weight > 0 needs a net built with auxiliary=True")
    if proto.epochs and len(dataset) < proto.batch_size:
        raise ValueError(f"dataset too small for one batch of {proto.batch_size}")
    data_seq, aug_seq, attack_seq = np.random.SeedSequence(proto.seed).spawn(3)
    data_rng = np.random.default_rng(data_seq)
    aug_rng = np.random.default_rng(aug_seq)
    attack_rng = np.random.default_rng(attack_seq)
    params = net.parameters()
    opt = SGD(params, proto.lr, proto.momentum, proto.weight_decay)
    history = []
    for epoch in range(proto.epochs):
        opt.lr = cosine_lr(proto.lr, proto.lr_min, epoch, proto.epochs)
        net.drop_path_prob = proto.drop_path * epoch / proto.epochs
        losses, correct, seen = [], 0, 0
        for x, y in dataset.batches(proto.batch_size, data_rng.permutation(len(dataset))):
            if proto.cutout:
                x = cutout(x, proto.cutout, aug_rng)
            if proto.mode == "adversarial":
                net.eval()
                x = perturb(_ce_objective(net, y), x, proto.attack, attack_rng)
            net.train()
            logits, aux = net(Tensor(x), with_aux=True)
            loss = F.cross_entropy(logits, y)
            if aux is not None and proto.aux_weight > 0:
                loss = loss + F.cross_entropy(aux, y) * proto.aux_weight
            net.zero_grad()
            loss.backward()
            if proto.grad_clip:
                clip_grad_norm(params, proto.grad_clip)
            opt.step()
            losses.append(float(loss.item()))
            correct += int((logits.data.argmax(axis=1) == y).sum())
            seen += len(y)
        history.append({"epoch": epoch, "lr": float(opt.lr), "loss": float(np.mean(losses)),
                        "accuracy": correct / seen})
    net.zero_grad()
    net.eval()
    return net, history


def predict(net, images, batch_size=100):
    net.eval()
    out = []
    with no_grad():
        for start in range(0, len(images), batch_size):
            out.append(net(Tensor(images[start : start + batch_size])).data.argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate_under_attack(net, dataset, attack=None, batch_size=100, seed=0):
    """Accuracy on ``dataset`` after perturbing each batch with ``attack``.

    The attack maximizes cross-entropy against the true labels. ``attack=None``
    gives clean accuracy. Network parameters are never modified.
    """
    net.eval()
    rng = np.random.default_rng(seed)
    correct = 0
    for start in range(0, len(dataset), batch_size):
        x = dataset.images[start : start + batch_size]
        y = dataset.labels[start : start + batch_size]
        if attack is not None:
            x = perturb(_ce_objective(net, y), x, attack, rng)
        with no_grad():
            pred = net(Tensor(x)).data.argmax(axis=1)
        correct += int((pred == y).sum())
    return correct / len(dataset)


@dataclass
class RobustnessRow:
    model: str
    mode: str
    params: int
    clean: float
    fgsm: float
    pgd20: float

    def __post_init__(self):
        for name in ("clean", "fgsm", "pgd20"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} accuracy {v} outside [0, 1]")


def robustness_row(name, net, test, mode, epsilon=0.031, pgd_steps=20, batch_size=100, seed=0):
    return RobustnessRow(
        model=name,
        mode=mode,
        params=count_parameters(net)["total"],
        clean=evaluate_under_attack(net, test, None, batch_size, seed),
        fgsm=evaluate_under_attack(net, test, eval_fgsm(epsilon), batch_size, seed),
        pgd20=evaluate_under_attack(net, test, eval_pgd(epsilon, pgd_steps), batch_size, seed),
    )


COLUMNS = [f.name for f in fields(RobustnessRow)]


def rows_to_csv(rows):
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(COLUMNS)
    for r in rows:
        out.writerow([r.model, r.mode, r.params, repr(r.clean), repr(r.fgsm), repr(r.pgd20)])
    return buf.getvalue()


def rows_from_csv(text):
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != COLUMNS:
        raise ValueError(f"expected columns {COLUMNS}, got {reader.fieldnames}")
    return [RobustnessRow(r["model"], r["mode"], int(r["params"]), float(r["clean"]), float(r["fgsm"]),
                          float(r["pgd20"])) for r in reader]


def rows_to_markdown(rows):
    head = ["Model", "Training", "Params", "Clean", "FGSM", "PGD20"]
    body = [[r.model, r.mode, f"{r.params:,}", f"{100 * r.clean:.2f}%", f"{100 * r.fgsm:.2f}%",
             f"{100 * r.pgd20:.2f}%"] for r in rows]
    widths = [max(len(head[i]), *(len(b[i]) for b in body)) for i in range(len(head))]

    def line(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(head), sep] + [line(b) for b in body]) + "\n"


def report_table(rows):
    """Return (csv_text, markdown_text) for a list of robustness rows."""
    rows = list(rows)
    if not rows:
        raise ValueError("report_table needs at least one row")
    return rows_to_csv(rows), rows_to_markdown(rows)
