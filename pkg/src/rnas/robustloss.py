"""Output-discrepancy regularizer and the composite robust loss.

``discrepancy(clean, pert)`` measures how far the network's outputs on
perturbed inputs drift from its outputs on natural inputs. The robust loss
adds it, scaled by ``lam``, to the task loss at both levels of the search.
"""

from dataclasses import dataclass

from .autodiff import ShapeError, Tensor
from .autodiff import functional as F

F_KINDS = ("kl", "l2", "cosine")


@dataclass(frozen=True)
class RegularizerConfig:
    lam: float = 1.0
    f_kind: str = "kl"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.f_kind not in F_KINDS:
            raise ValueError(f"unknown discrepancy {self.f_kind!r}; choose from {F_KINDS}")


def discrepancy(clean_logits, pert_logits, f_kind="kl"):
    """Batch-mean divergence between clean and perturbed outputs.

    kl: KL(softmax(clean) || softmax(pert)); l2: squared logit distance;
    cosine: 1 - cosine similarity of the logit vectors.
    """
    if clean_logits.shape != pert_logits.shape:
        raise ShapeError(f"discrepancy: shapes {clean_logits.shape} and {pert_logits.shape} differ")
    if f_kind == "kl":
        logp = F.log_softmax(clean_logits, axis=1)
        logq = F.log_softmax(pert_logits, axis=1)
        per_row = F.sum(F.exp(logp) * (logp - logq), axis=1)
        # rounding can push an exact-zero divergence a hair below zero
        return F.mean(F.clamp(per_row, lo=0.0))
    if f_kind == "l2":
        d = clean_logits - pert_logits
        return F.mean(F.sum(d * d, axis=1))
    if f_kind == "cosine":
        # 1 - cos(a, b) written as half the squared distance of the unit vectors,
        # which is exactly zero for identical rows
        ua = clean_logits / F.sqrt(F.sum(clean_logits * clean_logits, axis=1, keepdims=True) + 1e-12)
        ub = pert_logits / F.sqrt(F.sum(pert_logits * pert_logits, axis=1, keepdims=True) + 1e-12)
        d = ua - ub
        return F.mean(F.sum(d * d, axis=1)) * 0.5
    raise ValueError(f"unknown discrepancy {f_kind!r}; choose from {F_KINDS}")


def robust_loss(task_loss, disc, lam):
    """``task_loss + lam * disc``."""
    if not isinstance(task_loss, Tensor) or not isinstance(disc, Tensor):
        raise TypeError("robust_loss expects Tensor arguments")
    if task_loss.size != 1 or disc.size != 1:
        raise ShapeError("robust_loss expects scalar losses")
    return task_loss + disc * lam
