from __future__ import annotations

import numpy as np

from ..exceptions import NonFiniteGradientError, ValidationError


class Adam:
    """Adam / AdamW with bias correction, updating parameters in place.

    With ``kind="adamw"`` parameters are first multiplied by
    ``1 - lr * weight_decay`` (decoupled decay), then the Adam step is applied.
    """

    def __init__(self, lr=1e-3, kind="adam", weight_decay=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        if kind not in ("adam", "adamw"):
            raise ValidationError(f"unknown optimizer {kind!r}")
        self.lr = lr
        self.kind = kind
        self.weight_decay = weight_decay if kind == "adamw" else 0.0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        if len(params) != len(grads):
            raise ValidationError("params and grads differ in length")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ValidationError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError("non-finite gradient; update rejected")
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**t
        c2 = 1.0 - b2**t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if self.weight_decay:
                p *= 1.0 - self.lr * self.weight_decay
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params
