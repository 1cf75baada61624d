"""Small feed-forward networks with hand-written reverse-mode gradients.

Parameters of an :class:`MLP` live in one flat float64 vector; the per-layer
weight and bias arrays are views into it, so optimizers and target-network
updates work on the flat vector directly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ContractError, TrainingError


def _tanh_grad(y):
    return 1.0 - y * y


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(y):
    return (y > 0).astype(float)


def _identity(x):
    return x


def _ones(y):
    return np.ones_like(y)


ACTIVATIONS = {
    "tanh": (np.tanh, _tanh_grad),
    "relu": (_relu, _relu_grad),
    "linear": (_identity, _ones),
}


class MLP:
    """Affine layers with elementwise activations.

    >>> net = MLP([3, 8, 2], rng=np.random.default_rng(0))
    >>> net(np.zeros((5, 3))).shape
    (5, 2)
    """

    def __init__(self, sizes, hidden="tanh", output="linear", rng=None, final_scale=None):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ContractError(f"invalid layer sizes {sizes}")
        acts = [hidden] * (len(sizes) - 2) + [output]
        for a in acts:
            if a not in ACTIVATIONS:
                raise ContractError(f"unknown activation {a!r}")
        self.sizes = sizes
        self.activations = acts
        self.shapes = [(sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]
        self.params = np.zeros(sum(m * n + n for m, n in self.shapes))
        self._bind()
        if rng is not None:
            self.init(rng, final_scale)

    def _bind(self):
        self.weights, self.biases = [], []
        off = 0
        for m, n in self.shapes:
            self.weights.append(self.params[off:off + m * n].reshape(m, n))
            off += m * n
            self.biases.append(self.params[off:off + n])
            off += n

    def init(self, rng: np.random.Generator, final_scale=None):
        """Scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)), last layer optionally ±final_scale."""
        for i, (m, n) in enumerate(self.shapes):
            lim = 1.0 / np.sqrt(m)
            if final_scale is not None and i == len(self.shapes) - 1:
                lim = final_scale
            self.weights[i][...] = rng.uniform(-lim, lim, (m, n))
            self.biases[i][...] = rng.uniform(-lim, lim, n)
        return self

    @classmethod
    def from_layers(cls, layers):
        """Build from explicit ``[(W, b, activation), ...]`` with W of shape (in, out)."""
        sizes = [np.shape(layers[0][0])[0]] + [np.shape(W)[1] for W, _, _ in layers]
        net = cls(sizes)
        net.activations = [a for _, _, a in layers]
        for i, (W, b, _) in enumerate(layers):
            net.weights[i][...] = W
            net.biases[i][...] = b
        return net

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def copy(self) -> "MLP":
        twin = MLP(self.sizes, rng=None)
        twin.activations = list(self.activations)
        twin.params[:] = self.params
        return twin

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.in_dim:
            raise ContractError(f"input has {x.shape[-1]} features, network expects {self.in_dim}")
        return x

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        x = self._check(x)
        for W, b, a in zip(self.weights, self.biases, self.activations):
            x = ACTIVATIONS[a][0](x @ W + b)
        return x

    def forward_cache(self, x):
        """Forward pass that also returns the per-layer values needed by :meth:`backward`."""
        x = self._check(x)
        outs = [x]
        for W, b, a in zip(self.weights, self.biases, self.activations):
            x = ACTIVATIONS[a][0](x @ W + b)
            outs.append(x)
        return x, outs

    def backward(self, cache, grad_out):
        """Gradients of ``sum(grad_out * y)`` w.r.t. the flat parameters and the input.

        Inputs may be a single vector or a batch of rows; batch gradients are summed.
        """
        g = np.asarray(grad_out, dtype=float)
        if g.shape != cache[-1].shape:
            raise ContractError(f"upstream gradient shape {g.shape} != output shape {cache[-1].shape}")
        grad = np.empty_like(self.params)
        ends = np.cumsum([m * n + n for m, n in self.shapes])
        for i in range(len(self.shapes) - 1, -1, -1):
            m, n = self.shapes[i]
            y, x = cache[i + 1], cache[i]
            dz = g * ACTIVATIONS[self.activations[i]][1](y)
            x2 = x.reshape(-1, m)
            dz2 = dz.reshape(-1, n)
            start = ends[i] - (m * n + n)
            grad[start:start + m * n] = (x2.T @ dz2).ravel()
            grad[start + m * n:ends[i]] = dz2.sum(axis=0)
            g = dz @ self.weights[i].T
        return grad, g


def check_finite(values, what: str, **context) -> None:
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        bad = np.flatnonzero(~np.isfinite(arr.ravel()))
        raise TrainingError(f"non-finite {what}", {"what": what, "n_bad": int(bad.size),
                                                   "first_bad_index": int(bad[0]), **context})


class Adam:
    """Adaptive-moment first-order optimizer over a flat parameter vector."""

    def __init__(self, n_params: int, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, name="params") -> None:
        if grad.shape != params.shape or params.shape != self.m.shape:
            raise ContractError("gradient/parameter/optimizer shapes differ")
        check_finite(grad, "gradient", name=name, step=self.t)
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        params -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def state_arrays(self) -> dict:
        return {"m": self.m, "v": self.v, "t": np.array([self.t], dtype=float)}

    def load_state(self, arrays: dict) -> None:
        self.m[:] = arrays["m"]
        self.v[:] = arrays["v"]
        self.t = int(arrays["t"][0])


class DiminishingSGD:
    """Plain gradient descent with step size beta_t = beta0 / (1 + kappa * t).

    ``kappa = 0`` gives a constant rate. For ``kappa > 0`` the rate is
    monotone non-increasing with limit zero.
    """

    def __init__(self, beta0=1e-3, kappa=1e-3):
        if beta0 < 0 or kappa < 0:
            raise ContractError("beta0 and kappa must be non-negative")
        self.beta0 = float(beta0)
        self.kappa = float(kappa)
        self.t = 0

    def rate(self, t=None) -> float:
        t = self.t if t is None else t
        return self.beta0 / (1.0 + self.kappa * t)

    def step(self, params: np.ndarray, grad: np.ndarray, name="params") -> None:
        if grad.shape != params.shape:
            raise ContractError("gradient/parameter shapes differ")
        check_finite(grad, "gradient", name=name, step=self.t)
        params -= self.rate() * grad
        self.t += 1

    def state_arrays(self) -> dict:
        return {"t": np.array([self.t], dtype=float)}

    def load_state(self, arrays: dict) -> None:
        self.t = int(arrays["t"][0])


def soft_update(target: MLP, online: MLP, tau: float) -> MLP:
    """target <- tau * online + (1 - tau) * target, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ContractError(f"tau must lie in [0, 1], got {tau}")
    if target.params.shape != online.params.shape:
        raise ContractError("target and online networks have different shapes")
    if tau == 1.0:
        target.params[:] = online.params
    elif tau > 0.0:
        target.params *= 1.0 - tau
        target.params += tau * online.params
    return target


_MAGIC = b"LBMARLCK"
_VERSION = 1


def save_checkpoint(path, arrays: dict, meta: dict | None = None) -> None:
    """Write named float64 arrays plus JSON metadata; byte-identical for identical inputs."""
    names = sorted(arrays)
    entries, blobs, off = [], [], 0
    for name in names:
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": off})
        blobs.append(a.tobytes())
        off += a.nbytes
    header = json.dumps({"version": _VERSION, "meta": meta or {}, "arrays": entries},
                        sort_keys=True, separators=(",", ":")).encode()
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQ", _VERSION, len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(arrays, meta)``."""
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ContractError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack("<IQ", raw[8:20])
    if version != _VERSION:
        raise ContractError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[20:20 + hlen])
    body = memoryview(raw)[20 + hlen:]
    arrays = {}
    for e in header["arrays"]:
        count = int(np.prod(e["shape"], dtype=np.int64))
        arrays[e["name"]] = np.frombuffer(body, dtype="<f8", count=count,
                                          offset=e["offset"]).reshape(e["shape"]).copy()
    return arrays, header["meta"]
