"""Single-layer LSTM with a sigmoid read-out, trained by exact BPTT.

All parameters live in one contiguous float64 buffer; the named tensors
(``W_xi`` ... ``b_y``) are views into it.  That keeps the optimizer, the
finite-difference oracle, checksums and checkpoints trivial, while the
numba kernels below receive the stacked views they need.

Gate order everywhere is input, forget, candidate, output (i, f, g, o).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from lstm_formal.encoding import input_indices, target_matrix
from lstm_formal.languages import Sample

GATES = "ifgo"
CHECKPOINT_MAGIC = b"LSTMCKPT 1\n"


class NonFiniteError(FloatingPointError):
    """Raised when a loss or activation stops being finite during training."""


class CheckpointError(ValueError):
    pass


def _layout(d: int, H: int) -> list[tuple[str, tuple[int, ...]]]:
    names = [(f"W_x{g}", (H, d)) for g in GATES]
    names += [(f"W_h{g}", (H, H)) for g in GATES]
    names += [(f"b_{g}", (H,)) for g in GATES]
    names += [("W_y", (d + 1, H)), ("b_y", (d + 1,))]
    return names


def parameter_count(d: int, H: int) -> int:
    return 4 * H * (d + H + 1) + (d + 1) * (H + 1)


@dataclass(eq=False)
class LstmParameters:
    """Weights of the network, or a shape-congruent gradient."""

    d: int
    H: int
    flat: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.flat = np.ascontiguousarray(self.flat, dtype=np.float64)
        expected = parameter_count(self.d, self.H)
        if self.flat.shape != (expected,):
            raise ValueError(f"expected {expected} parameters for d={self.d}, H={self.H}, got {self.flat.shape}")
        d, H = self.d, self.H
        off = 0

        def take(size, shape):
            nonlocal off
            view = self.flat[off : off + size].reshape(shape)
            off += size
            return view

        self.Wx = take(4 * H * d, (4, H, d))
        self.Wh = take(4 * H * H, (4, H, H))
        self.b = take(4 * H, (4, H))
        self.Wy = take((d + 1) * H, (d + 1, H))
        self.by = take(d + 1, (d + 1,))

    @classmethod
    def zeros(cls, d: int, H: int) -> "LstmParameters":
        return cls(d, H, np.zeros(parameter_count(d, H)))

    @property
    def output_dim(self) -> int:
        return self.d + 1

    def tensors(self) -> dict[str, np.ndarray]:
        """Named views in canonical (serialization) order."""
        out = {}
        for gi, g in enumerate(GATES):
            out[f"W_x{g}"] = self.Wx[gi]
        for gi, g in enumerate(GATES):
            out[f"W_h{g}"] = self.Wh[gi]
        for gi, g in enumerate(GATES):
            out[f"b_{g}"] = self.b[gi]
        out["W_y"] = self.Wy
        out["b_y"] = self.by
        return out

    def copy(self) -> "LstmParameters":
        return LstmParameters(self.d, self.H, self.flat.copy())

    def checksum(self) -> str:
        return hashlib.sha256(self.flat.tobytes()).hexdigest()


Gradients = LstmParameters


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray


def init_parameters(d: int, H: int, seed: int) -> LstmParameters:
    if d < 2 or H < 1:
        raise ValueError(f"need d >= 2 and H >= 1, got d={d}, H={H}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(H)
    return LstmParameters(d, H, rng.uniform(-bound, bound, parameter_count(d, H)))


def init_trial_parameters(d: int, H: int, base_seed: int, trial_seed: int, recurrent_only: bool = False) -> LstmParameters:
    """Weights for one trial.

    With ``recurrent_only`` every tensor comes from ``base_seed`` except the
    recurrent matrices ``W_h*``, which are drawn from ``trial_seed``.
    """
    p = init_parameters(d, H, trial_seed)
    if recurrent_only:
        base = init_parameters(d, H, base_seed)
        base.Wh[...] = p.Wh
        return base
    return p


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def step(p: LstmParameters, state: LstmState, x: np.ndarray) -> tuple[LstmState, np.ndarray]:
    """One timestep on a dense input vector; the readable reference for the kernels."""
    h, c = state.h, state.c
    z = p.Wx @ x + p.Wh @ h + p.b
    i, f, o = _sigmoid(z[0]), _sigmoid(z[1]), _sigmoid(z[3])
    g = np.tanh(z[2])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    y = _sigmoid(p.Wy @ h_new + p.by)
    return LstmState(h_new, c_new), y


def zero_state(H: int) -> LstmState:
    return LstmState(np.zeros(H), np.zeros(H))


@njit(cache=True)
def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


@njit(cache=True)
def _forward_kernel(Wx, Wh, b, Wy, by, xs, Y, hs, cs, ys):
    """Fills hs/cs/ys (T rows each) from a zero state; returns the summed loss."""
    H = Wh.shape[1]
    D = Wy.shape[0]
    T = xs.shape[0]
    h = np.zeros(H)
    c = np.zeros(H)
    z = np.zeros((4, H))
    loss = 0.0
    for t in range(T):
        x = xs[t]
        for gi in range(4):
            for u in range(H):
                acc = Wx[gi, u, x] + b[gi, u]
                for v in range(H):
                    acc += Wh[gi, u, v] * h[v]
                z[gi, u] = acc
        for u in range(H):
            c[u] = _sig(z[1, u]) * c[u] + _sig(z[0, u]) * math.tanh(z[2, u])
            h[u] = _sig(z[3, u]) * math.tanh(c[u])
            hs[t, u] = h[u]
            cs[t, u] = c[u]
        sq = 0.0
        for j in range(D):
            acc = by[j]
            for u in range(H):
                acc += Wy[j, u] * h[u]
            y = _sig(acc)
            ys[t, j] = y
            diff = y - Y[t, j]
            sq += diff * diff
        loss += sq / D
    return loss


@njit(cache=True)
def _backward_kernel(Wx, Wh, b, Wy, by, xs, Y, gWx, gWh, gb, gWy, gby):
    """Accumulates the exact gradient of the summed loss into the g* arrays."""
    H = Wh.shape[1]
    D = Wy.shape[0]
    T = xs.shape[0]
    hs = np.zeros((T + 1, H))
    cs = np.zeros((T + 1, H))
    acts = np.zeros((T, 4, H))
    ys = np.zeros((T, D))
    loss = 0.0
    for t in range(T):
        x = xs[t]
        for gi in range(4):
            for u in range(H):
                acc = Wx[gi, u, x] + b[gi, u]
                for v in range(H):
                    acc += Wh[gi, u, v] * hs[t, v]
                if gi == 2:
                    acts[t, gi, u] = math.tanh(acc)
                else:
                    acts[t, gi, u] = _sig(acc)
        for u in range(H):
            cs[t + 1, u] = acts[t, 1, u] * cs[t, u] + acts[t, 0, u] * acts[t, 2, u]
            hs[t + 1, u] = acts[t, 3, u] * math.tanh(cs[t + 1, u])
        sq = 0.0
        for j in range(D):
            acc = by[j]
            for u in range(H):
                acc += Wy[j, u] * hs[t + 1, u]
            y = _sig(acc)
            ys[t, j] = y
            diff = y - Y[t, j]
            sq += diff * diff
        loss += sq / D

    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    dh = np.zeros(H)
    dz = np.zeros((4, H))
    for t in range(T - 1, -1, -1):
        for u in range(H):
            dh[u] = dh_next[u]
        for j in range(D):
            y = ys[t, j]
            da = 2.0 * (y - Y[t, j]) / D * y * (1.0 - y)
            gby[j] += da
            for u in range(H):
                gWy[j, u] += da * hs[t + 1, u]
                dh[u] += Wy[j, u] * da
        for u in range(H):
            i = acts[t, 0, u]
            f = acts[t, 1, u]
            g = acts[t, 2, u]
            o = acts[t, 3, u]
            tc = math.tanh(cs[t + 1, u])
            dc = dh[u] * o * (1.0 - tc * tc) + dc_next[u]
            dz[0, u] = dc * g * i * (1.0 - i)
            dz[1, u] = dc * cs[t, u] * f * (1.0 - f)
            dz[2, u] = dc * i * (1.0 - g * g)
            dz[3, u] = dh[u] * tc * o * (1.0 - o)
            dc_next[u] = dc * f
        x = xs[t]
        for v in range(H):
            dh_next[v] = 0.0
        for gi in range(4):
            for u in range(H):
                d = dz[gi, u]
                gWx[gi, u, x] += d
                gb[gi, u] += d
                for v in range(H):
                    gWh[gi, u, v] += d * hs[t, v]
                    dh_next[v] += Wh[gi, u, v] * d
    return loss


def _sample_arrays(sample: Sample) -> tuple[np.ndarray, np.ndarray]:
    return input_indices(sample), target_matrix(sample)


def run_sequence(p: LstmParameters, sample: Sample) -> tuple[np.ndarray, list[LstmState], float]:
    """Outputs (T x d+1), per-step states and summed per-character MSE, from a zero state."""
    xs, Y = _sample_arrays(sample)
    T = len(xs)
    hs, cs, ys = np.zeros((T, p.H)), np.zeros((T, p.H)), np.zeros((T, p.output_dim))
    if T == 0:
        return ys, [], 0.0
    loss = _forward_kernel(p.Wx, p.Wh, p.b, p.Wy, p.by, xs, Y, hs, cs, ys)
    return ys, [LstmState(hs[t], cs[t]) for t in range(T)], float(loss)


def sequence_loss(p: LstmParameters, xs: np.ndarray, Y: np.ndarray) -> float:
    T = len(xs)
    if T == 0:
        return 0.0
    scratch_h, scratch_y = np.empty((T, p.H)), np.empty((T, p.output_dim))
    return float(_forward_kernel(p.Wx, p.Wh, p.b, p.Wy, p.by, xs, Y, scratch_h, scratch_h.copy(), scratch_y))


def backward_arrays(p: LstmParameters, xs: np.ndarray, Y: np.ndarray, out: Gradients | None = None) -> tuple[Gradients, float]:
    grad = out if out is not None else Gradients.zeros(p.d, p.H)
    grad.flat[:] = 0.0
    if len(xs) == 0:
        return grad, 0.0
    loss = _backward_kernel(p.Wx, p.Wh, p.b, p.Wy, p.by, xs, Y, grad.Wx, grad.Wh, grad.b, grad.Wy, grad.by)
    return grad, float(loss)


def backward(p: LstmParameters, sample: Sample) -> tuple[Gradients, float]:
    xs, Y = _sample_arrays(sample)
    return backward_arrays(p, xs, Y)


def finite_difference_grad(p: LstmParameters, sample: Sample, epsilon: float = 1e-5) -> Gradients:
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    xs, Y = _sample_arrays(sample)
    work = p.copy()
    grad = Gradients.zeros(p.d, p.H)
    for k in range(len(work.flat)):
        orig = work.flat[k]
        work.flat[k] = orig + epsilon
        up = sequence_loss(work, xs, Y)
        work.flat[k] = orig - epsilon
        down = sequence_loss(work, xs, Y)
        work.flat[k] = orig
        grad.flat[k] = (up - down) / (2 * epsilon)
    return grad


def max_relative_error(a: Gradients, b: Gradients) -> float:
    """Largest per-tensor relative error ||a-b|| / max(||a||, ||b||).

    Measured tensor-wise rather than element-wise: central differences carry
    an absolute noise floor of roughly eps_machine * loss / epsilon, which
    swamps the relative error of individual near-zero entries.
    """
    worst = 0.0
    tb = b.tensors()
    for name, ta in a.tensors().items():
        denom = max(np.linalg.norm(ta), np.linalg.norm(tb[name]), 1e-12)
        worst = max(worst, float(np.linalg.norm(ta - tb[name]) / denom))
    return worst


@dataclass
class OptimizerState:
    rule: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.rule not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.rule!r}; expected adam or sgd")


def apply_update(p: LstmParameters, g: Gradients, opt: OptimizerState) -> None:
    """Update ``p`` and ``opt`` in place."""
    if g.flat.shape != p.flat.shape:
        raise ValueError("gradient and parameter shapes differ")
    opt.step += 1
    if opt.rule == "sgd":
        p.flat -= opt.lr * g.flat
        return
    if opt.m is None:
        opt.m = np.zeros_like(p.flat)
        opt.v = np.zeros_like(p.flat)
    opt.m *= opt.beta1
    opt.m += (1 - opt.beta1) * g.flat
    opt.v *= opt.beta2
    opt.v += (1 - opt.beta2) * g.flat * g.flat
    m_hat = opt.m / (1 - opt.beta1**opt.step)
    v_hat = opt.v / (1 - opt.beta2**opt.step)
    p.flat -= opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)


def save_checkpoint(path: str | Path, p: LstmParameters, meta: dict | None = None) -> None:
    """Write a header line of JSON followed by the raw little-endian float64 buffer."""
    header = {
        "d": p.d,
        "hidden": p.H,
        "output_dim": p.output_dim,
        "dtype": "<f8",
        "order": "row-major",
        "tensors": [{"name": name, "shape": list(shape)} for name, shape in _layout(p.d, p.H)],
        "meta": meta or {},
    }
    payload = CHECKPOINT_MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + p.flat.astype("<f8").tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> tuple[LstmParameters, dict]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from None
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    head_end = raw.find(b"\n", len(CHECKPOINT_MAGIC))
    if head_end < 0:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[len(CHECKPOINT_MAGIC) : head_end])
        d, H = int(header["d"]), int(header["hidden"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: malformed header ({exc})") from None
    if header.get("dtype") != "<f8" or header.get("output_dim") != d + 1:
        raise CheckpointError(f"{path}: unsupported dtype or inconsistent dimensions")
    shapes = [(t["name"], tuple(t["shape"])) for t in header.get("tensors", [])]
    if shapes != _layout(d, H):
        raise CheckpointError(f"{path}: tensor layout does not match d={d}, H={H}")
    body = raw[head_end + 1 :]
    if len(body) != 8 * parameter_count(d, H):
        raise CheckpointError(f"{path}: expected {8 * parameter_count(d, H)} bytes of weights, found {len(body)}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return LstmParameters(d, H, flat), header.get("meta", {})
