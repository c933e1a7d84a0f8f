"""Single-layer LSTM binary classifier: forward pass and full BPTT in numpy.

Parameters are float64 throughout. Gate order everywhere (weight layout,
checkpoints, caches) is input, forget, cell-candidate, output ("ifgo").
The backward pass returns gradients with respect to every parameter and
every input entry; the input gradient is what the gradient-sign attacks
consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATE_ORDER = "ifgo"
EPS_CLAMP = 1e-12  # probability clamp before log in the cross-entropy


def sigmoid(z):
    # tanh form is overflow-free for any z
    return 0.5 * np.tanh(0.5 * z) + 0.5


@dataclass
class LstmParams:
    """All trainable parameters, flat and enumerable via :meth:`arrays`."""

    W: np.ndarray  # (4, hidden, input) gate weights, ifgo order
    U: np.ndarray  # (4, hidden, hidden) recurrent weights
    b: np.ndarray  # (4, hidden) gate biases
    w_out: np.ndarray  # (hidden,) dense head
    b_out: np.ndarray  # (1,)

    @property
    def hidden_dim(self) -> int:
        return self.W.shape[1]

    @property
    def input_dim(self) -> int:
        return self.W.shape[2]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "U": self.U, "b": self.b, "w_out": self.w_out, "b_out": self.b_out}

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays().values())

    def copy(self) -> "LstmParams":
        return LstmParams(*(a.copy() for a in self.arrays().values()))

    def to_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays().values()])

    def from_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for a in self.arrays().values():
            a.ravel()[:] = flat[offset : offset + a.size]
            offset += a.size


def param_count(input_dim: int, hidden_dim: int) -> int:
    """4*(h*(d+h) + h) + h + 1 trainable scalars."""
    return 4 * (hidden_dim * (input_dim + hidden_dim) + hidden_dim) + hidden_dim + 1


def init_params(input_dim: int, hidden_dim: int, seed: int) -> LstmParams:
    """Uniform(-1/sqrt(h), 1/sqrt(h)) weights, zero biases, forget bias 1."""
    rng = np.random.default_rng(seed)
    k = 1.0 / np.sqrt(hidden_dim)
    W = rng.uniform(-k, k, size=(4, hidden_dim, input_dim))
    U = rng.uniform(-k, k, size=(4, hidden_dim, hidden_dim))
    w_out = rng.uniform(-k, k, size=hidden_dim)
    b = np.zeros((4, hidden_dim))
    b[1, :] = 1.0  # forget gate starts open
    return LstmParams(W, U, b, w_out, np.zeros(1))


@dataclass
class ForwardCache:
    gates_i: np.ndarray  # (B, T, h)
    gates_f: np.ndarray
    gates_g: np.ndarray
    gates_o: np.ndarray
    cells: np.ndarray  # c_t
    cells_tanh: np.ndarray
    hiddens: np.ndarray  # h_t
    logits: np.ndarray  # (B,)
    probs: np.ndarray  # (B,)


def _work_matrices(params: LstmParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(d, 4h), (h, 4h), (4h,) gemm-friendly copies of W, U, b."""
    h = params.hidden_dim
    w_x = params.W.transpose(2, 0, 1).reshape(params.input_dim, 4 * h)
    w_h = params.U.transpose(2, 0, 1).reshape(h, 4 * h)
    return w_x, w_h, params.b.reshape(4 * h)


def forward(
    params: LstmParams, X: np.ndarray, return_cache: bool = True
) -> tuple[np.ndarray, ForwardCache | None]:
    """Run the recurrence over a (B, T, d) batch from zero initial state.

    Returns per-sample attack probabilities ``sigmoid(w_out . h_T + b_out)``
    and, unless disabled, the activation cache backward() needs.
    """
    B, T, d = X.shape
    h = params.hidden_dim
    w_x, w_h, b = _work_matrices(params)
    pre = X.reshape(B * T, d) @ w_x
    pre = pre.reshape(B, T, 4 * h)
    if return_cache:
        I = np.empty((B, T, h))
        F = np.empty((B, T, h))
        G = np.empty((B, T, h))
        O = np.empty((B, T, h))
        C = np.empty((B, T, h))
        TC = np.empty((B, T, h))
        H = np.empty((B, T, h))
    h_t = np.zeros((B, h))
    c_t = np.zeros((B, h))
    for t in range(T):
        z = pre[:, t, :] + h_t @ w_h + b
        zs = sigmoid(z)
        i_t = zs[:, :h]
        f_t = zs[:, h : 2 * h]
        g_t = np.tanh(z[:, 2 * h : 3 * h])
        o_t = zs[:, 3 * h :]
        c_t = f_t * c_t + i_t * g_t
        tc_t = np.tanh(c_t)
        h_t = o_t * tc_t
        if return_cache:
            I[:, t] = i_t
            F[:, t] = f_t
            G[:, t] = g_t
            O[:, t] = o_t
            C[:, t] = c_t
            TC[:, t] = tc_t
            H[:, t] = h_t
    logits = h_t @ params.w_out + params.b_out[0]
    probs = sigmoid(logits)
    if not return_cache:
        return probs, None
    return probs, ForwardCache(I, F, G, O, C, TC, H, logits, probs)


def bce_loss(prob: float, label: int) -> float:
    """Binary cross-entropy with the probability clamped away from {0, 1}."""
    p = min(max(prob, EPS_CLAMP), 1.0 - EPS_CLAMP)
    return -(label * np.log(p) + (1 - label) * np.log(1.0 - p))


def bce_loss_batch(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    p = np.clip(probs, EPS_CLAMP, 1.0 - EPS_CLAMP)
    return -(labels * np.log(p) + (1 - labels) * np.log1p(-p))


def backward(
    params: LstmParams,
    cache: ForwardCache,
    X: np.ndarray,
    labels: np.ndarray,
    need_param_grads: bool = True,
) -> tuple[dict[str, np.ndarray] | None, np.ndarray]:
    """BPTT gradients of the summed batch cross-entropy.

    Parameter gradients are summed over the batch (so duplicating a sample
    doubles them); the input gradient is returned per sample as a
    (B, T, d) array since each sample's loss touches only its own window.
    """
    B, T, d = X.shape
    h = params.hidden_dim
    if cache.hiddens.shape != (B, T, h):
        raise ValueError("cache does not match this (model, X) pair")
    w_x, w_h, _ = _work_matrices(params)
    w_h_T = np.ascontiguousarray(w_h.T)
    dlogit = cache.probs - labels  # (B,)
    dh = dlogit[:, None] * params.w_out[None, :]
    dc = np.zeros((B, h))
    DZ = np.empty((B, T, 4 * h))
    for t in range(T - 1, -1, -1):
        i_t = cache.gates_i[:, t]
        f_t = cache.gates_f[:, t]
        g_t = cache.gates_g[:, t]
        o_t = cache.gates_o[:, t]
        tc_t = cache.cells_tanh[:, t]
        do = dh * tc_t
        dc = dc + dh * o_t * (1.0 - tc_t * tc_t)
        c_prev = cache.cells[:, t - 1] if t > 0 else 0.0
        dz = np.empty((B, 4 * h))
        dz[:, :h] = dc * g_t * i_t * (1.0 - i_t)
        dz[:, h : 2 * h] = dc * c_prev * f_t * (1.0 - f_t)
        dz[:, 2 * h : 3 * h] = dc * i_t * (1.0 - g_t * g_t)
        dz[:, 3 * h :] = do * o_t * (1.0 - o_t)
        DZ[:, t] = dz
        dh = dz @ w_h_T
        dc = dc * f_t
    dX = (DZ.reshape(B * T, 4 * h) @ w_x.T).reshape(B, T, d)
    if not need_param_grads:
        return None, dX
    dw_x = X.reshape(B * T, d).T @ DZ.reshape(B * T, 4 * h)
    h_prev = np.zeros((B, T, h))
    h_prev[:, 1:] = cache.hiddens[:, :-1]
    dw_h = h_prev.reshape(B * T, h).T @ DZ.reshape(B * T, 4 * h)
    db = DZ.sum(axis=(0, 1))
    grads = {
        "W": dw_x.reshape(d, 4, h).transpose(1, 2, 0),
        "U": dw_h.reshape(h, 4, h).transpose(1, 2, 0),
        "b": db.reshape(4, h),
        "w_out": cache.hiddens[:, -1].T @ dlogit,
        "b_out": np.array([dlogit.sum()]),
    }
    return grads, dX
