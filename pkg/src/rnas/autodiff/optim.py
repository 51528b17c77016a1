"""Momentum SGD and Adam with classic L2 weight decay.

Weight decay is added to the gradient (``g + wd * p``) before the update
rule, as in the reference DARTS optimizers.
"""

import numpy as np


def _checked_grad(p, i):
    if p.grad is None:
        raise ValueError(f"parameter {i} (shape {p.shape}) has no gradient")
    return p.grad


def clip_grad_norm(params, max_norm):
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    grads = [p.grad for p in params if p.grad is not None]
    total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads)))
    if total > max_norm:
        scale = max_norm / (total + 1e-6)
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * np.asarray(scale, dtype=p.grad.dtype)
    return total


class Optimizer:
    def __init__(self, params, lr, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.steps = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        grads = [_checked_grad(p, i) for i, p in enumerate(self.params)]
        self.steps += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            self._update(i, p, g)

    def _update(self, i, p, g):
        raise NotImplementedError


class SGD(Optimizer):
    def __init__(self, params, lr, momentum=0.0, weight_decay=0.0):
        super().__init__(params, lr, weight_decay)
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def _update(self, i, p, g):
        if self.momentum:
            v = self.velocity[i]
            v *= self.momentum
            v += g
            g = v
        p.data -= np.asarray(self.lr, dtype=p.dtype) * g


class Adam(Optimizer):
    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        super().__init__(params, lr, weight_decay)
        self.betas = tuple(betas)
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def _update(self, i, p, g):
        b1, b2 = self.betas
        m, v = self.m[i], self.v[i]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        mhat = m / (1 - b1 ** self.steps)
        vhat = v / (1 - b2 ** self.steps)
        p.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.dtype, copy=False)


def cosine_lr(base, minimum, epoch, total):
    """Cosine-annealed learning rate for ``epoch`` in ``[0, total)``."""
    if total <= 0:
        return base
    return minimum + 0.5 * (base - minimum) * (1 + np.cos(np.pi * epoch / total))
