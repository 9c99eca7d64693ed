"""AdamW with per-group learning rates and a plateau LR scheduler."""

from __future__ import annotations

import math

import numpy as np

from .nn import Parameter


class AdamW:
    """Decoupled-weight-decay Adam over named parameter groups.

    `groups` maps a group name to (parameters, learning rate).  Weight
    decay only touches parameters with `decay=True` (matrices, not
    biases) and is scaled by the group learning rate, matching the
    usual decoupled formulation.
    """

    def __init__(
        self,
        groups: dict,
        betas: tuple = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-4,
    ):
        if not groups:
            raise ValueError("no parameter groups")
        self.groups = {}
        seen = set()
        for name, (params, lr) in groups.items():
            if lr <= 0:
                raise ValueError(f"learning rate for group {name!r} must be positive")
            for p in params:
                if id(p) in seen:
                    raise ValueError(f"parameter {p.name} appears in two groups")
                seen.add(id(p))
            self.groups[name] = {"params": list(params), "lr": float(lr)}
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = {}
        self._v = {}

    def zero_grad(self):
        for group in self.groups.values():
            for p in group["params"]:
                p.zero_grad()

    @property
    def learning_rates(self) -> dict:
        return {name: g["lr"] for name, g in self.groups.items()}

    def scale_lrs(self, factor: float):
        for g in self.groups.values():
            g["lr"] *= factor

    def step(self):
        self.t += 1
        b1, b2 = self.betas
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for group in self.groups.values():
            lr = group["lr"]
            for p in group["params"]:
                g = p.grad
                if g is None:
                    continue
                if not np.all(np.isfinite(g)):
                    raise FloatingPointError(
                        f"non-finite gradient in parameter {p.name!r} at step {self.t}"
                    )
                key = id(p)
                if key not in self._m:
                    self._m[key] = np.zeros_like(p.data)
                    self._v[key] = np.zeros_like(p.data)
                m = self._m[key]
                v = self._v[key]
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                m_hat = m / bias1
                v_hat = v / bias2
                if self.weight_decay and p.decay:
                    p.tensor.data -= lr * self.weight_decay * p.tensor.data
                p.tensor.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


class ReduceLROnPlateau:
    """Multiply all group LRs by `factor` after `patience` epochs without
    improvement of the monitored metric (lower is better)."""

    def __init__(
        self,
        optimizer: AdamW,
        factor: float = 0.2,
        patience: int = 2,
        min_improvement: float = 1e-8,
    ):
        if not (0.0 < factor < 1.0):
            raise ValueError("factor must be in (0, 1)")
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.min_improvement = min_improvement
        self.best = math.inf
        self.bad_epochs = 0
        self.n_reductions = 0

    def step(self, metric: float):
        if not math.isfinite(metric):
            raise ValueError("scheduler metric must be finite")
        if metric < self.best - self.min_improvement:
            self.best = metric
            self.bad_epochs = 0
            return
        self.bad_epochs += 1
        if self.bad_epochs > self.patience:
            self.optimizer.scale_lrs(self.factor)
            self.n_reductions += 1
            self.bad_epochs = 0
