"""Adversarial and noise examples inside an L-infinity ball.

All generators work on raw numpy batches and return a new array ``x_adv``
with ``|x_adv - x| <= epsilon`` elementwise and ``x_adv`` inside
``clamp_box``. Gradients are taken with :func:`rnas.autodiff.grad`, so no
model parameter ever receives a ``.grad`` from attack generation.
"""

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, grad

KINDS = ("fgsm", "pgd", "uniform")


@dataclass(frozen=True)
class PerturbSpec:
    kind: str = "pgd"
    epsilon: float = 0.031
    step_size: float = 0.003
    steps: int = 10
    random_start: bool = True
    clamp_box: tuple = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "clamp_box", tuple(float(v) for v in self.clamp_box))
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}; choose from {KINDS}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.kind == "pgd":
            if self.step_size <= 0:
                raise ValueError("pgd step_size must be positive")
            if self.steps < 1:
                raise ValueError("pgd needs at least one step")
        lo, hi = self.clamp_box
        if not lo < hi:
            raise ValueError(f"invalid clamp_box {self.clamp_box}")

    def replace(self, **changes):
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return PerturbSpec(**fields)


def search_pgd(epsilon=0.031):
    """10-step PGD used while searching."""
    return PerturbSpec("pgd", epsilon, 0.003, 10, True)


def adversarial_training_pgd(epsilon=0.031):
    """7-step PGD used for adversarial training of derived nets."""
    return PerturbSpec("pgd", epsilon, 0.01, 7, True)


def eval_pgd(epsilon=0.031, steps=20):
    """Evaluation PGD; the step is a quarter of the radius."""
    return PerturbSpec("pgd", epsilon, epsilon / 4 if epsilon > 0 else 1e-3, steps, True)


def eval_fgsm(epsilon=0.031):
    return PerturbSpec("fgsm", epsilon, 0.0, 1, False)


def project(x_adv, x, epsilon, clamp_box):
    """Clip to the epsilon box around ``x``, then to the valid data range."""
    lo, hi = clamp_box
    out = np.clip(x_adv, x - epsilon, x + epsilon)
    return np.clip(out, lo, hi).astype(x.dtype, copy=False)


def _input_grad(objective, x_adv):
    xt = Tensor(x_adv, requires_grad=True)
    value = objective(xt)
    if not isinstance(value, Tensor) or not value.requires_grad:
        raise TypeError("objective must return a scalar Tensor that depends on its input")
    return grad(value, [xt])[0]


def fgsm_attack(objective, x, spec):
    """One signed-gradient step of size epsilon."""
    if spec.kind != "fgsm":
        raise ValueError(f"fgsm_attack got a {spec.kind!r} spec")
    x = np.asarray(x)
    g = _input_grad(objective, x)
    eps = np.asarray(spec.epsilon, dtype=x.dtype)
    return project(x + eps * np.sign(g), x, spec.epsilon, spec.clamp_box)


def pgd_attack(objective, x, spec, rng=None):
    """``spec.steps`` signed-gradient ascent steps, each projected back into the ball.

    ``objective`` maps a Tensor batch to a scalar Tensor to be maximized.
    """
    if spec.kind != "pgd":
        raise ValueError(f"pgd_attack got a {spec.kind!r} spec")
    x = np.asarray(x)
    eps = np.asarray(spec.epsilon, dtype=x.dtype)
    step = np.asarray(spec.step_size, dtype=x.dtype)
    if spec.random_start:
        if rng is None:
            raise ValueError("random_start needs an rng")
        x_adv = project(x + rng.uniform(-spec.epsilon, spec.epsilon, x.shape).astype(x.dtype), x, eps, spec.clamp_box)
    else:
        x_adv = x.copy()
    for _ in range(spec.steps):
        g = _input_grad(objective, x_adv)
        x_adv = project(x_adv + step * np.sign(g), x, eps, spec.clamp_box)
    return x_adv


def uniform_noise(x, spec, rng):
    """Independent Uniform(-epsilon, epsilon) noise per element; no gradients."""
    x = np.asarray(x)
    u = rng.uniform(-spec.epsilon, spec.epsilon, x.shape).astype(x.dtype)
    return project(x + u, x, np.asarray(spec.epsilon, dtype=x.dtype), spec.clamp_box)


def perturb(objective, x, spec, rng=None):
    """Dispatch on ``spec.kind``."""
    if spec.kind == "pgd":
        return pgd_attack(objective, x, spec, rng)
    if spec.kind == "fgsm":
        return fgsm_attack(objective, x, spec)
    return uniform_noise(x, spec, rng)
