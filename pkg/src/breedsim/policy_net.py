"""Permutation-invariant scoring network with exact analytic gradients.

Each plant's weighted genome (m, 2) is processed independently by a shared
two-stage 1-D convolutional feature extractor (valid convolutions, tanh
activations). Channel order carries no meaning, so the extractor output is
averaged over both channel orders, making every downstream quantity
invariant to swapping the chromosome copies. The 64 extracted features are
concatenated with a 16-feature embedding of the episode completion fraction
(separate embeddings for the action and value paths) and fed through small
MLP heads: a scalar score per plant, and a scalar value per plant whose
population mean is the state value. Scoring plants with shared weights and
averaging the value head makes scores equivariant, and the value invariant,
under any permutation of the population.

Everything is float64 NumPy. The backward pass is written out analytically
layer by layer and is validated against central finite differences by
:func:`gradient_check`. Exploration noise is a diagonal Gaussian over the
scores with a single learned state-independent log standard deviation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError
from .rng import RngStream

CHECKPOINT_MAGIC = b"BSIMCKP1"

PARAM_ORDER = (
    "conv1_w", "conv1_b",
    "conv2_w", "conv2_b",
    "dense_w", "dense_b",
    "act_embed_w", "act_embed_b",
    "val_embed_w", "val_embed_b",
    "act_hidden_w", "act_hidden_b",
    "act_out_w", "act_out_b",
    "val_hidden_w", "val_hidden_b",
    "val_out_w", "val_out_b",
    "log_std",
)


def _conv_out_len(length: int, kernel: int, stride: int) -> int:
    return (length - kernel) // stride + 1


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyperparameters; sizes derive from the marker count."""

    markers: int = 1000
    in_channels: int = 2
    conv1_kernels: int = 64
    conv1_len: int = 32
    conv1_stride: int = 8
    conv2_kernels: int = 16
    conv2_len: int = 8
    conv2_stride: int = 2
    feature_dim: int = 64
    gen_embed_dim: int = 16
    head_hidden: int = 32

    def __post_init__(self):
        if self.markers < 1:
            raise ConfigError("marker count must be positive")
        if self.conv1_out_len < 1 or self.conv2_out_len < 1:
            raise ConfigError(
                f"marker count {self.markers} is too small for the convolution stack"
            )
        if self.markers == 1000:
            # Reference geometry: 1000 -> 122 -> 58 -> 928 flattened.
            assert self.conv1_out_len == 122
            assert self.conv2_out_len == 58
            assert self.flat_dim == 928

    @property
    def conv1_out_len(self) -> int:
        return _conv_out_len(self.markers, self.conv1_len, self.conv1_stride)

    @property
    def conv2_out_len(self) -> int:
        return _conv_out_len(self.conv1_out_len, self.conv2_len, self.conv2_stride)

    @property
    def flat_dim(self) -> int:
        return self.conv2_out_len * self.conv2_kernels

    @property
    def head_in_dim(self) -> int:
        return self.feature_dim + self.gen_embed_dim


@dataclass
class PolicyParams:
    """All learnable tensors plus the architecture they belong to."""

    config: NetConfig
    tensors: dict[str, np.ndarray]

    @property
    def log_std(self) -> float:
        return float(self.tensors["log_std"])

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def n_parameters(self) -> int:
        return sum(v.size for v in self.tensors.values())


def _orthogonal(shape: tuple[int, int], gain: float, gen: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    a = gen.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_params(config: NetConfig, stream: RngStream) -> PolicyParams:
    """Orthogonal weight init (gain 1; 0.01 on the final action layer), zero biases."""
    c = config
    shapes = {
        "conv1_w": (c.conv1_kernels, c.in_channels, c.conv1_len),
        "conv2_w": (c.conv2_kernels, c.conv1_kernels, c.conv2_len),
        "dense_w": (c.feature_dim, c.flat_dim),
        "act_embed_w": (c.gen_embed_dim,),
        "val_embed_w": (c.gen_embed_dim,),
        "act_hidden_w": (c.head_hidden, c.head_in_dim),
        "act_out_w": (c.head_hidden,),
        "val_hidden_w": (c.head_hidden, c.head_in_dim),
        "val_out_w": (c.head_hidden,),
    }
    gains = {"act_out_w": 0.01}
    tensors: dict[str, np.ndarray] = {}
    for i, name in enumerate(PARAM_ORDER):
        if name == "log_std":
            tensors[name] = np.zeros(())
        elif name.endswith("_b"):
            weight_shape = shapes[name[:-2] + "_w"]
            bias_len = weight_shape[0] if name not in ("act_out_b", "val_out_b") else ()
            tensors[name] = np.zeros(bias_len)
        else:
            shape = shapes[name]
            gen = stream.child(i).generator()
            flat2d = (shape[0], int(np.prod(shape[1:]))) if len(shape) > 1 else (shape[0], 1)
            w = _orthogonal(flat2d, gains.get(name, 1.0), gen)
            # C order everywhere so a checkpoint reload reproduces forward
            # passes bitwise (layout changes perturb BLAS accumulation).
            tensors[name] = np.ascontiguousarray(w.reshape(shape))
    return PolicyParams(config=config, tensors=tensors)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def _buffer(workspace, name: str, shape: tuple) -> np.ndarray:
    """Fetch a reusable float64 scratch array, or allocate fresh.

    The training loop passes a workspace dict so the large intermediates are
    allocated once per shape instead of once per minibatch; everything else
    gets fresh arrays and stays reentrant.
    """
    if workspace is None:
        return np.empty(shape)
    buf = workspace.get(name)
    if buf is None or buf.shape != shape:
        buf = np.empty(shape)
        workspace[name] = buf
    return buf


def _im2col(x: np.ndarray, kernel: int, stride: int, out: np.ndarray) -> np.ndarray:
    """(B, L, C) -> (B, L_out, C * kernel) patches, channel-major per patch."""
    windows = sliding_window_view(x, kernel, axis=1)[:, ::stride]  # (B, L_out, C, K)
    np.copyto(out.reshape(windows.shape), windows)
    return out


_ROW_BLOCK = 256


def _stable_matmul(a: np.ndarray, b: np.ndarray, out: np.ndarray) -> np.ndarray:
    """``a @ b`` computed in fixed-shape row blocks (tail zero-padded).

    Every row goes through a GEMM call of identical shape, and BLAS row
    results do not depend on a row's position or neighbors within a fixed
    shape, so each plant's forward numbers are bitwise independent of how
    many plants are batched together.
    """
    m = a.shape[0]
    full = (m // _ROW_BLOCK) * _ROW_BLOCK
    for start in range(0, full, _ROW_BLOCK):
        np.matmul(a[start : start + _ROW_BLOCK], b, out=out[start : start + _ROW_BLOCK])
    if full < m:
        pad = np.zeros((_ROW_BLOCK, a.shape[1]))
        pad[: m - full] = a[full:]
        out[full:] = (pad @ b)[: m - full]
    return out


def _swapped_conv1(t: dict, c: NetConfig) -> np.ndarray:
    """Conv1 weights with the two input channels exchanged, flattened.

    Convolving a channel-swapped input with the original kernels equals
    convolving the original input with channel-swapped kernels, so one
    im2col of the input serves both channel orders.
    """
    return np.ascontiguousarray(t["conv1_w"][:, ::-1, :].reshape(c.conv1_kernels, -1))


def _forward_plants(params: PolicyParams, x: np.ndarray, g: np.ndarray,
                    need_cache: bool = False, workspace: dict | None = None):
    """Run the network on a batch of plant rows.

    Args:
        x: (P, m, 2) float64 weighted-genome slabs.
        g: (P,) float64 completion fractions, one per plant row.

    Returns:
        (scores (P,), plant_values (P,), cache or None). Rows [0, P) of the
        cached convolution activations hold the original channel order and
        rows [P, 2P) the swapped order.
    """
    c = params.config
    t = params.tensors
    if x.ndim != 3 or x.shape[1] != c.markers or x.shape[2] != c.in_channels:
        raise ConfigError(
            f"expected plant input of shape (P, {c.markers}, {c.in_channels}), got {x.shape}"
        )
    p = x.shape[0]
    l1, l2 = c.conv1_out_len, c.conv2_out_len
    k1out, k2out = c.conv1_kernels, c.conv2_kernels

    w1 = t["conv1_w"].reshape(k1out, -1)
    w1s = _swapped_conv1(t, c)
    cols1 = _im2col(
        np.asarray(x, dtype=np.float64), c.conv1_len, c.conv1_stride,
        _buffer(workspace, "cols1", (p, l1, c.in_channels * c.conv1_len)),
    )
    cols1_2d = cols1.reshape(p * l1, -1)
    a1 = _buffer(workspace, "a1", (2 * p, l1, k1out))
    a1_2d = a1.reshape(2 * p * l1, k1out)
    _stable_matmul(cols1_2d, w1.T, a1_2d[: p * l1])
    _stable_matmul(cols1_2d, w1s.T, a1_2d[p * l1 :])
    a1 += t["conv1_b"]
    np.tanh(a1, out=a1)

    w2 = t["conv2_w"].reshape(k2out, -1)
    cols2 = _im2col(
        a1, c.conv2_len, c.conv2_stride,
        _buffer(workspace, "cols2", (2 * p, l2, k1out * c.conv2_len)),
    )
    a2 = _buffer(workspace, "a2", (2 * p, l2, k2out))
    _stable_matmul(cols2.reshape(2 * p * l2, -1), w2.T, a2.reshape(2 * p * l2, k2out))
    a2 += t["conv2_b"]
    np.tanh(a2, out=a2)

    flat = a2.reshape(2 * p, c.flat_dim)
    feat_both = _buffer(workspace, "featb", (2 * p, c.feature_dim))
    _stable_matmul(flat, t["dense_w"].T, feat_both)
    feat_both += t["dense_b"]
    np.tanh(feat_both, out=feat_both)
    features = 0.5 * (feat_both[:p] + feat_both[p:])

    emb_a = np.tanh(g[:, None] * t["act_embed_w"][None, :] + t["act_embed_b"])
    emb_v = np.tanh(g[:, None] * t["val_embed_w"][None, :] + t["val_embed_b"])
    head_a_in = np.concatenate([features, emb_a], axis=1)
    head_v_in = np.concatenate([features, emb_v], axis=1)

    hid_a = np.empty((p, c.head_hidden))
    hid_v = np.empty((p, c.head_hidden))
    _stable_matmul(head_a_in, t["act_hidden_w"].T, hid_a)
    hid_a += t["act_hidden_b"]
    np.tanh(hid_a, out=hid_a)
    _stable_matmul(head_v_in, t["val_hidden_w"].T, hid_v)
    hid_v += t["val_hidden_b"]
    np.tanh(hid_v, out=hid_v)
    # einsum keeps each row's reduction order fixed regardless of batch
    # position, which makes the scores exactly permutation-equivariant.
    scores = np.einsum("ij,j->i", hid_a, t["act_out_w"]) + t["act_out_b"]
    plant_values = np.einsum("ij,j->i", hid_v, t["val_out_w"]) + t["val_out_b"]

    cache = None
    if need_cache:
        cache = {
            "x_shape": x.shape, "g": g,
            "cols1": cols1, "a1": a1, "cols2": cols2, "a2": a2,
            "flat": flat, "feat_both": feat_both,
            "emb_a": emb_a, "emb_v": emb_v,
            "head_a_in": head_a_in, "head_v_in": head_v_in,
            "hid_a": hid_a, "hid_v": hid_v,
        }
    return scores, plant_values, cache


def _backward_plants(
    params: PolicyParams,
    cache: dict,
    d_scores: np.ndarray,
    d_plant_values: np.ndarray,
    need_input_grad: bool = False,
    workspace: dict | None = None,
):
    """Analytic gradients for every tensor except ``log_std``.

    ``d_scores`` and ``d_plant_values`` are the loss gradients w.r.t. the
    per-plant outputs of :func:`_forward_plants`.
    """
    c = params.config
    t = params.tensors
    g = cache["g"]
    p = cache["x_shape"][0]
    l1, l2 = c.conv1_out_len, c.conv2_out_len
    k1out = c.conv1_kernels
    grads: dict[str, np.ndarray] = {}

    def head_backward(prefix, hid, head_in, d_out):
        grads[f"{prefix}_out_w"] = hid.T @ d_out
        grads[f"{prefix}_out_b"] = np.asarray(d_out.sum())
        d_hid = np.outer(d_out, t[f"{prefix}_out_w"])
        dz = d_hid * (1.0 - hid * hid)
        grads[f"{prefix}_hidden_w"] = dz.T @ head_in
        grads[f"{prefix}_hidden_b"] = dz.sum(axis=0)
        return dz @ t[f"{prefix}_hidden_w"]

    d_in_a = head_backward("act", cache["hid_a"], cache["head_a_in"], d_scores)
    d_in_v = head_backward("val", cache["hid_v"], cache["head_v_in"], d_plant_values)

    nf = c.feature_dim
    d_features = d_in_a[:, :nf] + d_in_v[:, :nf]

    for prefix, d_emb, emb in (("act", d_in_a[:, nf:], cache["emb_a"]),
                               ("val", d_in_v[:, nf:], cache["emb_v"])):
        dz = d_emb * (1.0 - emb * emb)
        grads[f"{prefix}_embed_w"] = (dz * g[:, None]).sum(axis=0)
        grads[f"{prefix}_embed_b"] = dz.sum(axis=0)

    # Undo the channel-order averaging, then walk back down the extractor.
    d_feat_both = 0.5 * np.concatenate([d_features, d_features], axis=0)
    dz_dense = d_feat_both * (1.0 - cache["feat_both"] ** 2)
    grads["dense_w"] = dz_dense.T @ cache["flat"]
    grads["dense_b"] = dz_dense.sum(axis=0)
    d_flat = dz_dense @ t["dense_w"]

    a2 = cache["a2"]
    dz2 = d_flat.reshape(a2.shape)
    dz2 *= 1.0 - a2 * a2
    w2 = t["conv2_w"].reshape(c.conv2_kernels, -1)
    dz2_rows = dz2.reshape(-1, c.conv2_kernels)
    grads["conv2_w"] = (dz2_rows.T @ cache["cols2"].reshape(dz2_rows.shape[0], -1)).reshape(
        t["conv2_w"].shape
    )
    grads["conv2_b"] = dz2_rows.sum(axis=0)
    d_cols2 = _buffer(workspace, "b_dcols2", (2 * p, l2, k1out * c.conv2_len))
    np.matmul(dz2_rows, w2, out=d_cols2.reshape(2 * p * l2, -1))

    a1 = cache["a1"]
    dz1 = _buffer(workspace, "b_dz1", a1.shape)
    dz1[:] = 0.0
    k2, s2 = c.conv2_len, c.conv2_stride
    for pos in range(l2):
        patch = d_cols2[:, pos].reshape(-1, k1out, k2)
        dz1[:, pos * s2 : pos * s2 + k2, :] += patch.transpose(0, 2, 1)
    tmp = _buffer(workspace, "b_tanh1", a1.shape)
    np.multiply(a1, a1, out=tmp)
    np.subtract(1.0, tmp, out=tmp)
    dz1 *= tmp

    # Rows [0, P) carry the original channel order, rows [P, 2P) the swapped
    # order; the swapped half contributes through channel-exchanged kernels.
    cols1_2d = cache["cols1"].reshape(p * l1, -1)
    dz1_first = dz1[:p].reshape(p * l1, k1out)
    dz1_second = dz1[p:].reshape(p * l1, k1out)
    dw1 = (dz1_first.T @ cols1_2d).reshape(t["conv1_w"].shape)
    dw1s = (dz1_second.T @ cols1_2d).reshape(t["conv1_w"].shape)
    grads["conv1_w"] = dw1 + dw1s[:, ::-1, :]
    grads["conv1_b"] = dz1.reshape(-1, k1out).sum(axis=0)

    d_input = None
    if need_input_grad:
        w1 = t["conv1_w"].reshape(k1out, -1)
        w1s = _swapped_conv1(t, c)
        d_cols1 = dz1_first @ w1 + dz1_second @ w1s
        d_cols1 = d_cols1.reshape(p, l1, -1)
        d_input = np.zeros((p, c.markers, c.in_channels))
        k1, s1 = c.conv1_len, c.conv1_stride
        for pos in range(l1):
            patch = d_cols1[:, pos].reshape(-1, c.in_channels, k1)
            d_input[:, pos * s1 : pos * s1 + k1, :] += patch.transpose(0, 2, 1)

    grads["log_std"] = np.zeros(())
    return grads, d_input


# ---------------------------------------------------------------------------
# Public forward surface
# ---------------------------------------------------------------------------


def extract_features(plant_obs: np.ndarray, params: PolicyParams) -> np.ndarray:
    """Channel-order-invariant 64-feature embedding of one plant."""
    c = params.config
    x = np.asarray(plant_obs, dtype=np.float64)
    if x.shape != (c.markers, c.in_channels):
        raise ConfigError(
            f"expected a plant of shape ({c.markers}, {c.in_channels}), got {x.shape}"
        )
    _, _, cache = _forward_plants(params, x[None], np.zeros(1), need_cache=True)
    feat_both = cache["feat_both"]
    return 0.5 * (feat_both[0] + feat_both[1])


def plant_value_mean(plant_values: np.ndarray) -> float:
    """Mean of the per-plant value head.

    Uses exact (correctly rounded) summation, so the state value is bitwise
    invariant under any permutation of the plants.
    """
    return math.fsum(plant_values) / plant_values.shape[0]


def score_and_value(pop_obs: np.ndarray, gen_fraction: float, params: PolicyParams):
    """Score every plant and value the state.

    Args:
        pop_obs: (n, m, 2) weighted-genome tensor.
        gen_fraction: completion fraction of the episode, in [0, 1].

    Returns:
        (scores (n,), value float): per-plant scores and the mean of the
        per-plant value head.
    """
    if not (0.0 <= gen_fraction <= 1.0):
        raise ConfigError(f"generation fraction must lie in [0, 1], got {gen_fraction}")
    x = np.asarray(pop_obs, dtype=np.float64)
    g = np.full(x.shape[0], float(gen_fraction))
    scores, plant_values, _ = _forward_plants(params, x, g)
    return scores, plant_value_mean(plant_values)


def batch_score_value(obs: np.ndarray, gen_fractions: np.ndarray, params: PolicyParams,
                      workspace: dict | None = None):
    """Vectorized :func:`score_and_value` over a batch of populations.

    Args:
        obs: (B, n, m, 2) weighted-genome tensors.
        gen_fractions: (B,) completion fractions.

    Returns:
        (scores (B, n), values (B,)).
    """
    obs = np.asarray(obs, dtype=np.float64)
    b, n = obs.shape[0], obs.shape[1]
    g = np.repeat(np.asarray(gen_fractions, dtype=np.float64), n)
    scores, plant_values, _ = _forward_plants(
        params, obs.reshape(b * n, *obs.shape[2:]), g, workspace=workspace
    )
    per_plant = plant_values.reshape(b, n)
    values = np.array([plant_value_mean(row) for row in per_plant])
    return scores.reshape(b, n), values


# ---------------------------------------------------------------------------
# Gaussian action distribution
# ---------------------------------------------------------------------------

_LOG_2PI = math.log(2.0 * math.pi)


def sample_action(scores: np.ndarray, log_std: float, gen: np.random.Generator) -> np.ndarray:
    """Draw an action from N(scores, exp(log_std)^2 I)."""
    return scores + math.exp(log_std) * gen.standard_normal(scores.shape[0])


def gaussian_logp(action: np.ndarray, scores: np.ndarray, log_std: float) -> float:
    """Exact diagonal-Gaussian log density of ``action`` around ``scores``."""
    n = scores.shape[0]
    z = (action - scores) / math.exp(log_std)
    return float(-0.5 * (z @ z) - n * log_std - 0.5 * n * _LOG_2PI)


def gaussian_entropy(n: int, log_std: float) -> float:
    """Entropy of the n-dimensional action distribution."""
    return n * (log_std + 0.5 * (1.0 + _LOG_2PI))


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def gradient_check(
    params: PolicyParams,
    pop_obs: np.ndarray,
    gen_fraction: float = 0.5,
    eps: float = 1e-5,
    seed: int = 0,
    names: Iterable[str] | None = None,
) -> float:
    """Compare analytic gradients against central finite differences.

    The probe loss mixes all three output channels with fixed random
    coefficients: a projection of the scores, the state value, and the
    Gaussian log density of a fixed action (which exercises ``log_std``).
    Returns the maximum relative error over every checked parameter entry.

    The error denominator is floored at 1e-3: entries whose gradients are
    smaller than that are judged on absolute difference, because central
    differences at any step size carry ~1e-10 absolute noise in float64 and
    no implementation could certify a tighter relative bound there.
    """
    x = np.asarray(pop_obs, dtype=np.float64)
    n = x.shape[0]
    gen = RngStream(seed).child(97).generator()
    c_scores = gen.standard_normal(n)
    c_value = float(gen.standard_normal())
    c_logp = float(gen.standard_normal())
    action = gen.standard_normal(n)
    g = np.full(n, float(gen_fraction))

    def loss_of(p: PolicyParams) -> float:
        scores, plant_values, _ = _forward_plants(p, x, g)
        value = plant_value_mean(plant_values)
        lp = gaussian_logp(action, scores, p.log_std)
        return float(c_scores @ scores + c_value * value + c_logp * lp)

    scores, plant_values, cache = _forward_plants(params, x, g, need_cache=True)
    sigma2 = math.exp(2.0 * params.log_std)
    d_scores = c_scores + c_logp * (action - scores) / sigma2
    d_plant_values = np.full(n, c_value / n)
    grads, _ = _backward_plants(params, cache, d_scores, d_plant_values)
    z2 = float(((action - scores) ** 2).sum() / sigma2)
    grads["log_std"] = np.asarray(c_logp * (z2 - n))

    work = params.copy()
    max_rel = 0.0
    check_names = tuple(names) if names is not None else PARAM_ORDER
    for name in check_names:
        tensor = work.tensors[name]
        flat = tensor.reshape(-1)
        gflat = np.asarray(grads[name]).reshape(-1)
        for idx in range(flat.shape[0]):
            original = flat[idx]
            flat[idx] = original + eps
            hi = loss_of(work)
            flat[idx] = original - eps
            lo = loss_of(work)
            flat[idx] = original
            numeric = (hi - lo) / (2.0 * eps)
            analytic = gflat[idx]
            denom = max(abs(analytic), abs(numeric), 1e-3)
            max_rel = max(max_rel, abs(analytic - numeric) / denom)
    return max_rel


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------


def save_checkpoint(path, params: PolicyParams) -> None:
    """Serialize parameters to the versioned binary tensor container."""
    entries = []
    payload = bytearray()
    for name in PARAM_ORDER:
        # tobytes() emits C order; asarray keeps 0-d shapes intact.
        arr = np.asarray(params.tensors[name], dtype="<f8")
        entries.append(
            {
                "name": name,
                "dtype": "<f8",
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": arr.nbytes,
            }
        )
        payload += arr.tobytes()
    header = json.dumps(
        {"format_version": 1, "config": asdict(params.config), "tensors": entries},
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        fh.write(bytes(payload))


def load_checkpoint(path) -> PolicyParams:
    """Read back a checkpoint; bitwise inverse of :func:`save_checkpoint`."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ConfigError(f"{path}: not a policy checkpoint (bad magic {magic!r})")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len).decode())
        if header.get("format_version") != 1:
            raise ConfigError(f"unsupported checkpoint version {header.get('format_version')}")
        payload = fh.read()
    config = NetConfig(**header["config"])
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        raw = payload[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=entry["dtype"]).reshape(entry["shape"]).copy()
        tensors[entry["name"]] = arr.astype(np.float64, copy=False)
    missing = set(PARAM_ORDER) - set(tensors)
    if missing:
        raise ConfigError(f"checkpoint is missing tensors: {sorted(missing)}")
    return PolicyParams(config=config, tensors=tensors)
