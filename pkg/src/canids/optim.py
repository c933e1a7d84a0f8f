"""Per-parameter update rules: SGD, Adam, RMSprop, Adagrad.

Each optimizer mutates the parameter arrays in place and keeps accumulator
state keyed by parameter name, so one instance can drive a whole training
run (and keep its state across adversarial-retraining iterations).
"""

from __future__ import annotations

import numpy as np


class SGD:
    def __init__(self, lr=0.01):
        self.kind = "sgd"
        self.lr = lr
        self.t = 0

    def step(self, arrays, grads):
        self.t += 1
        for name, param in arrays.items():
            param -= self.lr * grads[name]


class Adagrad:
    def __init__(self, lr=0.01, eps=1e-8):
        self.kind = "adagrad"
        self.lr = lr
        self.eps = eps
        self.t = 0
        self.acc = {}

    def step(self, arrays, grads):
        self.t += 1
        for name, param in arrays.items():
            g = grads[name]
            acc = self.acc.setdefault(name, np.zeros_like(param))
            acc += g * g
            param -= self.lr * g / (np.sqrt(acc) + self.eps)


class RMSprop:
    def __init__(self, lr=0.001, rho=0.9, eps=1e-8):
        self.kind = "rmsprop"
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self.t = 0
        self.v = {}

    def step(self, arrays, grads):
        self.t += 1
        for name, param in arrays.items():
            g = grads[name]
            v = self.v.setdefault(name, np.zeros_like(param))
            v *= self.rho
            v += (1.0 - self.rho) * g * g
            param -= self.lr * g / (np.sqrt(v) + self.eps)


class Adam:
    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.kind = "adam"
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, arrays, grads):
        self.t += 1
        for name, param in arrays.items():
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(param))
            v = self.v.setdefault(name, np.zeros_like(param))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam, "rmsprop": RMSprop, "adagrad": Adagrad}


def make_optimizer(kind: str, lr: float | None = None, **hyper):
    """Build an optimizer by name with its conventional default learning rate."""
    try:
        cls = OPTIMIZERS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown optimizer {kind!r}; choose from {sorted(OPTIMIZERS)}") from None
    if lr is None:
        return cls(**hyper)
    return cls(lr=lr, **hyper)
