"""Small pre-norm Transformer over context tokens, with exact gradients.

Everything runs in float64 numpy. The batched path (used for training and
for lock-step evaluation) pads sequences to a common length and masks the
padding out of attention; padded rows never influence the CLS output.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .embed import D_MODEL, ContextToken, EncoderParams, build_sequence
from .env import FEATURE_DIMS, EpisodeRecord, Modality, SchemaError

CHECKPOINT_VERSION = 1
LN_EPS = 1e-5
GELU_C = math.sqrt(2.0 / math.pi)

# slot kinds for the batched representation
PAD, CLS, GPS, IMAGE, LIDAR, MISS_IMAGE, MISS_LIDAR = range(7)
_KIND_MODALITY = {GPS: Modality.GPS, IMAGE: Modality.IMAGE, LIDAR: Modality.LIDAR}
MAX_FEAT = max(FEATURE_DIMS.values())


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = D_MODEL
    n_heads: int = 2
    n_blocks: int = 2
    d_ff: int = 64
    num_beams: int = 32
    max_len: int = 8

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 20
    mask_prob: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.mask_prob <= 1.0:
            raise ValueError("mask_prob must be in [0, 1]")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size <= 0 or self.epochs < 0:
            raise ValueError("batch_size must be positive and epochs nonnegative")


def _param_shapes(cfg: ModelConfig) -> dict:
    d, h, nb = cfg.d_model, cfg.d_ff, cfg.num_beams
    shapes = {}
    for m in Modality:
        shapes[f"enc.{m.value}.W"] = (d, FEATURE_DIMS[m])
        shapes[f"enc.{m.value}.b"] = (d,)
    shapes["tok.missing_image"] = (d,)
    shapes["tok.missing_lidar"] = (d,)
    shapes["tok.cls"] = (d,)
    shapes["pos"] = (cfg.max_len, d)
    for i in range(cfg.n_blocks):
        p = f"blk{i}."
        shapes.update({
            p + "ln1.g": (d,), p + "ln1.b": (d,),
            p + "Wq": (d, d), p + "Wk": (d, d), p + "Wv": (d, d), p + "Wo": (d, d), p + "bo": (d,),
            p + "ln2.g": (d,), p + "ln2.b": (d,),
            p + "W1": (d, h), p + "b1": (h,), p + "W2": (h, d), p + "b2": (d,),
        })
    shapes["lnf.g"] = (d,)
    shapes["lnf.b"] = (d,)
    shapes["head.W"] = (d, nb)
    shapes["head.b"] = (nb,)
    return shapes


@dataclass
class ModelParams:
    """Named float64 arrays plus fixed input-standardisation constants."""

    config: ModelConfig
    arrays: dict
    norm: dict = field(default_factory=dict)  # modality value -> (shift, scale)

    def __post_init__(self):
        self.check()
        for m in Modality:
            self.norm.setdefault(m.value, (np.zeros(FEATURE_DIMS[m]), np.ones(FEATURE_DIMS[m])))

    def check(self) -> None:
        shapes = _param_shapes(self.config)
        missing = sorted(set(shapes) - set(self.arrays))
        extra = sorted(set(self.arrays) - set(shapes))
        if missing or extra:
            raise SchemaError(f"parameter names differ: missing {missing}, unexpected {extra}")
        for name, shape in shapes.items():
            arr = self.arrays[name]
            if arr.shape != shape:
                raise SchemaError(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise SchemaError(f"{name} contains non-finite values")

    @property
    def encoder(self) -> EncoderParams:
        a = self.arrays
        return EncoderParams(
            weights={m: a[f"enc.{m.value}.W"] for m in Modality},
            biases={m: a[f"enc.{m.value}.b"] for m in Modality},
            missing_image=a["tok.missing_image"],
            missing_lidar=a["tok.missing_lidar"],
            cls=a["tok.cls"],
            shift={m: self.norm[m.value][0] for m in Modality},
            scale={m: self.norm[m.value][1] for m in Modality},
        )

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()},
                           {k: (s.copy(), c.copy()) for k, (s, c) in self.norm.items()})


def init_params(cfg: ModelConfig | None = None, seed: int = 0) -> ModelParams:
    """Gaussian init scaled by 1/sqrt(fan_in); layer-norm gains 1, biases 0."""
    cfg = cfg or ModelConfig()
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in _param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            arrays[name] = np.ones(shape)
        elif len(shape) == 1 and not name.startswith("tok."):
            arrays[name] = np.zeros(shape)
        else:
            # matrices are stored (out, in) for encoders and (in, out) elsewhere
            fan_in = shape[1] if name.startswith("enc.") else shape[0] if len(shape) == 2 else shape[0]
            if name == "pos" or name.startswith("tok."):
                fan_in = cfg.d_model
            arrays[name] = rng.standard_normal(shape) / math.sqrt(fan_in)
    return ModelParams(cfg, arrays)


def zero_params(cfg: ModelConfig | None = None) -> ModelParams:
    cfg = cfg or ModelConfig()
    return ModelParams(cfg, {k: np.zeros(s) for k, s in _param_shapes(cfg).items()})


# ---------------------------------------------------------------------------
# primitives


def _ln_fwd(x, g, b):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xh = xc * inv
    return xh * g + b, (xh, inv)


def _ln_bwd(dy, g, cache):
    xh, inv = cache
    dxh = dy * g
    dx = inv * (dxh - dxh.mean(-1, keepdims=True) - xh * (dxh * xh).mean(-1, keepdims=True))
    red = tuple(range(dy.ndim - 1))
    return dx, (dy * xh).sum(red), dy.sum(red)


def _gelu(u):
    t = np.tanh(GELU_C * (u + 0.044715 * (u * u * u)))
    return 0.5 * u * (1.0 + t), t


def _gelu_grad(u, t):
    return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3 * 0.044715 * u * u)


def _outer_sum(a, b):
    """Sum over batch and position of the outer products a^T b."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# core network over pre-embedded tokens


def _core_forward(x0, valid, params: ModelParams, keep_cache=False):
    cfg = params.config
    a = params.arrays
    B, L, d = x0.shape
    H = cfg.n_heads
    dh = d // H
    neg = np.where(valid, 0.0, -np.inf)[:, None, None, :]
    x = x0
    caches = []
    for i in range(cfg.n_blocks):
        p = f"blk{i}."
        h1, ln1 = _ln_fwd(x, a[p + "ln1.g"], a[p + "ln1.b"])
        q = (h1 @ a[p + "Wq"]).reshape(B, L, H, dh).transpose(0, 2, 1, 3)
        k = (h1 @ a[p + "Wk"]).reshape(B, L, H, dh).transpose(0, 2, 1, 3)
        v = (h1 @ a[p + "Wv"]).reshape(B, L, H, dh).transpose(0, 2, 1, 3)
        s = q @ k.transpose(0, 1, 3, 2) / math.sqrt(dh) + neg
        pr = softmax(s)
        o = (pr @ v).transpose(0, 2, 1, 3).reshape(B, L, d)
        hres = x + o @ a[p + "Wo"] + a[p + "bo"]
        h2, ln2 = _ln_fwd(hres, a[p + "ln2.g"], a[p + "ln2.b"])
        u = h2 @ a[p + "W1"] + a[p + "b1"]
        z, t = _gelu(u)
        xn = hres + z @ a[p + "W2"] + a[p + "b2"]
        if keep_cache:
            caches.append((x, h1, ln1, q, k, v, pr, o, h2, ln2, u, z, t))
        x = xn
    cls_out, lnf = _ln_fwd(x[:, 0, :], a["lnf.g"], a["lnf.b"])
    logits = cls_out @ a["head.W"] + a["head.b"]
    return logits, (caches, cls_out, lnf, x.shape)


def _core_backward(dlogits, cache, params: ModelParams):
    cfg = params.config
    a = params.arrays
    caches, cls_out, lnf, (B, L, d) = cache
    H = cfg.n_heads
    dh = d // H
    g = {}
    g["head.W"] = cls_out.T @ dlogits
    g["head.b"] = dlogits.sum(0)
    dcls, g["lnf.g"], g["lnf.b"] = _ln_bwd(dlogits @ a["head.W"].T, a["lnf.g"], lnf)
    dx = np.zeros((B, L, d))
    dx[:, 0, :] = dcls
    for i in reversed(range(cfg.n_blocks)):
        p = f"blk{i}."
        x, h1, ln1, q, k, v, pr, o, h2, ln2, u, z, t = caches[i]
        # feed-forward branch
        g[p + "W2"] = _outer_sum(z, dx)
        g[p + "b2"] = dx.sum((0, 1))
        du = (dx @ a[p + "W2"].T) * _gelu_grad(u, t)
        g[p + "W1"] = _outer_sum(h2, du)
        g[p + "b1"] = du.sum((0, 1))
        dhres, g[p + "ln2.g"], g[p + "ln2.b"] = _ln_bwd(du @ a[p + "W1"].T, a[p + "ln2.g"], ln2)
        dhres = dhres + dx
        # attention branch
        g[p + "Wo"] = _outer_sum(o, dhres)
        g[p + "bo"] = dhres.sum((0, 1))
        do = (dhres @ a[p + "Wo"].T).reshape(B, L, H, dh).transpose(0, 2, 1, 3)
        dpr = do @ v.transpose(0, 1, 3, 2)
        dv = pr.transpose(0, 1, 3, 2) @ do
        ds = pr * (dpr - (dpr * pr).sum(-1, keepdims=True)) / math.sqrt(dh)
        dq = ds @ k
        dk = ds.transpose(0, 1, 3, 2) @ q
        dqf = dq.transpose(0, 2, 1, 3).reshape(B, L, d)
        dkf = dk.transpose(0, 2, 1, 3).reshape(B, L, d)
        dvf = dv.transpose(0, 2, 1, 3).reshape(B, L, d)
        g[p + "Wq"] = _outer_sum(h1, dqf)
        g[p + "Wk"] = _outer_sum(h1, dkf)
        g[p + "Wv"] = _outer_sum(h1, dvf)
        dh1 = dqf @ a[p + "Wq"].T + dkf @ a[p + "Wk"].T + dvf @ a[p + "Wv"].T
        dx_ln, g[p + "ln1.g"], g[p + "ln1.b"] = _ln_bwd(dh1, a[p + "ln1.g"], ln1)
        dx = dhres + dx_ln
    return dx, g


# ---------------------------------------------------------------------------
# batched slot representation


@dataclass
class SlotBatch:
    """Raw inputs for a batch: slot kinds ``(B, L)`` and padded features ``(B, L, 6)``."""

    kinds: np.ndarray
    feats: np.ndarray

    @property
    def valid(self):
        return self.kinds != PAD


def _embed_batch(batch: SlotBatch, params: ModelParams):
    a = params.arrays
    B, L = batch.kinds.shape
    x0 = np.zeros((B, L, params.config.d_model))
    acts = {}
    for kind, m in _KIND_MODALITY.items():
        idx = batch.kinds == kind
        if not idx.any():
            continue
        shift, scale = params.norm[m.value]
        zin = (batch.feats[idx][:, :FEATURE_DIMS[m]] - shift) / scale
        act = np.tanh(zin @ a[f"enc.{m.value}.W"].T + a[f"enc.{m.value}.b"])
        x0[idx] = act
        acts[kind] = (idx, zin, act)
    for kind, name in ((CLS, "tok.cls"), (MISS_IMAGE, "tok.missing_image"),
                       (MISS_LIDAR, "tok.missing_lidar")):
        x0[batch.kinds == kind] = a[name]
    x0 = x0 + a["pos"][:L]
    return x0, acts


def _embed_backward(dx0, batch: SlotBatch, acts, params: ModelParams, g):
    L = batch.kinds.shape[1]
    g["pos"] = np.zeros_like(params.arrays["pos"])
    g["pos"][:L] = dx0.sum(0)
    for kind, m in _KIND_MODALITY.items():
        W = f"enc.{m.value}.W"
        if kind not in acts:
            g[W] = np.zeros_like(params.arrays[W])
            g[f"enc.{m.value}.b"] = np.zeros(params.config.d_model)
            continue
        idx, zin, act = acts[kind]
        dpre = dx0[idx] * (1.0 - act * act)
        g[W] = dpre.T @ zin
        g[f"enc.{m.value}.b"] = dpre.sum(0)
    for kind, name in ((CLS, "tok.cls"), (MISS_IMAGE, "tok.missing_image"),
                       (MISS_LIDAR, "tok.missing_lidar")):
        g[name] = dx0[batch.kinds == kind].sum(0)


def batch_logits(batch: SlotBatch, params: ModelParams) -> np.ndarray:
    x0, _ = _embed_batch(batch, params)
    logits, _ = _core_forward(x0, batch.valid, params)
    return logits


def loss_and_grad(batch: SlotBatch, labels, params: ModelParams):
    """Mean cross-entropy of the true beam and its exact gradient for every array."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("batch must be nonempty")
    x0, acts = _embed_batch(batch, params)
    logits, cache = _core_forward(x0, batch.valid, params, keep_cache=True)
    z = logits - logits.max(-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(-1, keepdims=True))
    n = len(labels)
    loss = -logp[np.arange(n), labels].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    dx0, grads = _core_backward(dlogits, cache, params)
    _embed_backward(dx0, batch, acts, params, grads)
    return float(loss), grads


def loss_only(batch: SlotBatch, labels, params: ModelParams) -> float:
    logits = batch_logits(batch, params)
    z = logits - logits.max(-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(-1, keepdims=True))
    return float(-logp[np.arange(len(labels)), np.asarray(labels)].mean())


# ---------------------------------------------------------------------------
# single-sequence inference


def forward(sequence, params: ModelParams) -> np.ndarray:
    """Beam logits for one token sequence (CLS first)."""
    seq = list(sequence)
    cfg = params.config
    if not 4 <= len(seq) <= cfg.max_len:
        raise SchemaError(f"sequence length must be in [4, {cfg.max_len}], got {len(seq)}")
    emb = np.stack([np.asarray(t.embedding, dtype=float) for t in seq])
    if emb.shape[1] != cfg.d_model:
        raise SchemaError(f"token dim {emb.shape[1]} does not match d_model {cfg.d_model}")
    x0 = (emb + params.arrays["pos"][: len(seq)])[None]
    logits, _ = _core_forward(x0, np.ones((1, len(seq)), dtype=bool), params)
    return logits[0]


def softmax_topk(logits, k: int) -> list[int]:
    """Indices of the ``k`` most probable beams, ties to the lower index."""
    logits = np.asarray(logits, dtype=float)
    if not 1 <= k <= logits.shape[-1]:
        raise ValueError(f"k must be in [1, {logits.shape[-1]}], got {k}")
    probs = softmax(logits)
    assert abs(probs.sum() - 1.0) < 1e-6
    return [int(i) for i in np.argsort(-probs, kind="stable")[:k]]


def topk_batch(logits, k: int) -> np.ndarray:
    return np.argsort(-softmax(logits), axis=-1, kind="stable")[:, :k]


def predict_topk(gps, image, lidar, history, params: ModelParams, k: int = 3) -> list[int]:
    seq = build_sequence(gps, image, lidar, history, params.encoder,
                         max_history=params.config.max_len - 4)
    return softmax_topk(forward(seq, params), k)


# ---------------------------------------------------------------------------
# training


@dataclass
class _Samples:
    cur: dict       # Modality -> (N, dim)
    prev: dict      # Modality -> (N, dim)
    has_prev: np.ndarray
    label: np.ndarray

    def __len__(self):
        return len(self.label)


def _collect_samples(dataset) -> _Samples:
    cur = {m: [] for m in Modality}
    prev = {m: [] for m in Modality}
    has_prev, label = [], []
    for rec in dataset:
        T = len(rec)
        if T < 2:
            continue
        cols = {Modality.GPS: rec.gps, Modality.IMAGE: rec.image, Modality.LIDAR: rec.lidar}
        for m, col in cols.items():
            cur[m].append(col[:-1])
            prev[m].append(np.vstack([col[:1], col[:-2]]))
        hp = np.ones(T - 1, dtype=bool)
        hp[0] = False
        has_prev.append(hp)
        label.append(rec.beam[1:])
    if not label:
        raise ValueError("dataset has no step with a next-step label")
    return _Samples({m: np.vstack(v) for m, v in cur.items()},
                    {m: np.vstack(v) for m, v in prev.items()},
                    np.concatenate(has_prev), np.concatenate(label))


def assemble(cur, keep_img, keep_lid, prev=None, has_prev=None, pkeep_img=None,
             pkeep_lid=None) -> SlotBatch:
    """Lay out slots as [CLS, GPS, IMAGE|missing, LIDAR|missing, history...].

    History holds the previous step's acquired tokens in acquisition order
    (GPS, then IMAGE and LIDAR when they were acquired).
    """
    B = len(keep_img)
    if has_prev is None:
        has_prev = np.zeros(B, dtype=bool)
    n_hist = has_prev * (1 + pkeep_img.astype(int) + pkeep_lid.astype(int)) \
        if has_prev.any() else np.zeros(B, dtype=int)
    L = 4 + int(n_hist.max(initial=0))
    kinds = np.zeros((B, L), dtype=np.int64)
    feats = np.zeros((B, L, MAX_FEAT))
    rows = np.arange(B)
    kinds[:, 0] = CLS
    kinds[:, 1] = GPS
    feats[:, 1, :2] = cur[Modality.GPS]
    kinds[:, 2] = np.where(keep_img, IMAGE, MISS_IMAGE)
    feats[keep_img, 2, :4] = cur[Modality.IMAGE][keep_img]
    kinds[:, 3] = np.where(keep_lid, LIDAR, MISS_LIDAR)
    feats[keep_lid, 3, :6] = cur[Modality.LIDAR][keep_lid]
    if L > 4:
        hp = has_prev
        kinds[hp, 4] = GPS
        feats[hp, 4, :2] = prev[Modality.GPS][hp]
        pi = hp & pkeep_img
        if pi.any():  # column 5 may not exist when every history is GPS alone
            kinds[pi, 5] = IMAGE
            feats[pi, 5, :4] = prev[Modality.IMAGE][pi]
        pl = hp & pkeep_lid
        slot = 5 + pi.astype(int)
        kinds[rows[pl], slot[pl]] = LIDAR
        feats[rows[pl], slot[pl], :6] = prev[Modality.LIDAR][pl]
    return SlotBatch(kinds, feats)


def fit_norm(dataset) -> dict:
    """Per-feature mean/std over a dataset, used to standardise encoder inputs."""
    cols = {Modality.GPS: "gps", Modality.IMAGE: "image", Modality.LIDAR: "lidar"}
    norm = {}
    for m, name in cols.items():
        data = np.vstack([getattr(r, name) for r in dataset])
        std = data.std(0)
        norm[m.value] = (data.mean(0), np.where(std > 1e-6, std, 1.0))
    return norm


class Adam:
    def __init__(self, params: ModelParams, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.t = 0

    def step(self, params: ModelParams, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for name in sorted(params.arrays):
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            params.arrays[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train_model(dataset, cfg: TrainConfig | None = None, model_cfg: ModelConfig | None = None,
                log=None):
    """Fit the predictor with random modality masking.

    Each contextual modality (in the current step and, independently, in
    the previous step that feeds the history slots) is dropped with
    probability ``cfg.mask_prob``. The target is the best beam one step
    ahead. Returns ``(params, loss_curve)`` with one mean loss per epoch.
    """
    cfg = cfg or TrainConfig()
    dataset = list(dataset)
    if not dataset:
        raise ValueError("dataset is empty")
    samples = _collect_samples(dataset)
    params = init_params(model_cfg, seed=cfg.seed)
    params.norm.update(fit_norm(dataset))
    if samples.label.max() >= params.config.num_beams:
        raise SchemaError("dataset beam index exceeds the model's codebook size")
    opt = Adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    rng = np.random.default_rng([cfg.seed, 1])
    n = len(samples)
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            keep = rng.random((len(idx), 4)) >= cfg.mask_prob
            batch = assemble({m: samples.cur[m][idx] for m in Modality}, keep[:, 0], keep[:, 1],
                             {m: samples.prev[m][idx] for m in Modality}, samples.has_prev[idx],
                             keep[:, 2], keep[:, 3])
            loss, grads = loss_and_grad(batch, samples.label[idx], params)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch starting {start} (lr={cfg.lr})")
            opt.step(params, grads)
            total += loss * len(idx)
        curve.append(total / n)
        if log is not None:
            log(f"epoch {epoch}: loss {curve[-1]:.4f}")
    params.check()
    return params, curve


# ---------------------------------------------------------------------------
# checkpoint container


def save_checkpoint(params: ModelParams, path, extra: dict | None = None) -> None:
    doc = {
        "format": "ctxbeam-checkpoint",
        "version": CHECKPOINT_VERSION,
        "config": asdict(params.config),
        "extra": extra or {},
        "norm": {k: [s.tolist(), c.tolist()] for k, (s, c) in sorted(params.norm.items())},
        "arrays": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                   for k, v in sorted(params.arrays.items())},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path) -> ModelParams:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not a checkpoint ({exc.msg})") from None
    if doc.get("format") != "ctxbeam-checkpoint" or doc.get("version") != CHECKPOINT_VERSION:
        raise SchemaError(f"{path}: unsupported checkpoint format/version")
    cfg = ModelConfig(**doc["config"])
    arrays = {}
    for name, entry in doc["arrays"].items():
        data = np.asarray(entry["data"], dtype=float)
        shape = tuple(entry["shape"])
        if data.size != math.prod(shape):
            raise SchemaError(f"{name}: {data.size} values do not fill shape {shape}")
        arrays[name] = data.reshape(shape)
    norm = {}
    for m in Modality:
        shift, scale = doc["norm"][m.value]
        shift, scale = np.asarray(shift, dtype=float), np.asarray(scale, dtype=float)
        if shift.shape != (FEATURE_DIMS[m],) or scale.shape != (FEATURE_DIMS[m],):
            raise SchemaError(f"norm for {m.value} has the wrong dimension")
        norm[m.value] = (shift, scale)
    return ModelParams(cfg, arrays, norm)
