"""Context tokens and the per-modality encoders that produce them."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .env import CONTEXT_MODALITIES, FEATURE_DIMS, Modality, Observation, SchemaError

D_MODEL = 32


class Tag(str, Enum):
    GPS = "GPS"
    IMAGE = "IMAGE"
    LIDAR = "LIDAR"
    CLS = "CLS"
    MISSING_IMAGE = "MISSING_IMAGE"
    MISSING_LIDAR = "MISSING_LIDAR"


class TTLClass(str, Enum):
    STATIC = "STATIC"
    SLOW = "SLOW"
    FAST = "FAST"


MISSING_TAG = {Modality.IMAGE: Tag.MISSING_IMAGE, Modality.LIDAR: Tag.MISSING_LIDAR}


@dataclass(frozen=True, eq=False)
class ContextToken:
    embedding: np.ndarray
    tag: Tag
    timestamp: float = 0.0
    ttl_class: TTLClass = TTLClass.FAST
    importance: float = 1.0

    def __post_init__(self):
        if self.importance < 0:
            raise ValueError("importance must be nonnegative")
        object.__setattr__(self, "tag", Tag(self.tag))
        object.__setattr__(self, "ttl_class", TTLClass(self.ttl_class))

    def __eq__(self, other):
        if not isinstance(other, ContextToken):
            return NotImplemented
        return (self.tag == other.tag and self.timestamp == other.timestamp
                and self.ttl_class == other.ttl_class and self.importance == other.importance
                and np.array_equal(self.embedding, other.embedding))

    __hash__ = object.__hash__


@dataclass
class EncoderParams:
    """Affine+tanh encoder per modality, plus the learnable special tokens.

    Arrays are shared with the owning model, so optimizer updates made
    through either object are visible through both.
    """

    weights: dict  # Modality -> (d_model, feature_dim)
    biases: dict   # Modality -> (d_model,)
    missing_image: np.ndarray
    missing_lidar: np.ndarray
    cls: np.ndarray
    # fixed input standardisation, features -> (features - shift) / scale
    shift: dict | None = None
    scale: dict | None = None

    def __post_init__(self):
        if self.shift is None:
            self.shift = {m: np.zeros(FEATURE_DIMS[m]) for m in Modality}
        if self.scale is None:
            self.scale = {m: np.ones(FEATURE_DIMS[m]) for m in Modality}

    @property
    def d_model(self) -> int:
        return self.cls.shape[0]

    def check(self) -> None:
        d = self.d_model
        for m in Modality:
            W, b = self.weights[m], self.biases[m]
            if W.shape != (d, FEATURE_DIMS[m]) or b.shape != (d,):
                raise SchemaError(f"{m.value} encoder has shapes {W.shape}, {b.shape}")
        for name in ("missing_image", "missing_lidar"):
            if getattr(self, name).shape != (d,):
                raise SchemaError(f"{name} must have shape ({d},)")

    @classmethod
    def zeros(cls, d_model: int = D_MODEL) -> "EncoderParams":
        return cls(
            weights={m: np.zeros((d_model, FEATURE_DIMS[m])) for m in Modality},
            biases={m: np.zeros(d_model) for m in Modality},
            missing_image=np.zeros(d_model),
            missing_lidar=np.zeros(d_model),
            cls=np.zeros(d_model),
        )


def encode(obs: Observation, params: EncoderParams, *, importance: float = 1.0) -> ContextToken:
    m = Modality(obs.modality)
    W, b = params.weights[m], params.biases[m]
    f = np.asarray(obs.features, dtype=float)
    if f.shape != (W.shape[1],):
        raise SchemaError(f"{m.value} encoder expects dim {W.shape[1]}, got shape {f.shape}")
    z = (f - params.shift[m]) / params.scale[m]
    return ContextToken(np.tanh(W @ z + b), Tag(m.value), float(obs.timestamp),
                        TTLClass.FAST, importance)


def missing_token(modality, params: EncoderParams, timestamp: float = 0.0) -> ContextToken:
    m = Modality(modality)
    if m not in CONTEXT_MODALITIES:
        raise ValueError(f"{m.value} is task data and is always acquired; it has no missing token")
    vec = params.missing_image if m is Modality.IMAGE else params.missing_lidar
    return ContextToken(vec, MISSING_TAG[m], timestamp, TTLClass.FAST)


def cls_token(params: EncoderParams, timestamp: float = 0.0) -> ContextToken:
    return ContextToken(params.cls, Tag.CLS, timestamp, TTLClass.FAST)


def build_sequence(gps: Observation, image: Observation | None, lidar: Observation | None,
                   history, params: EncoderParams, *, max_history: int = 4) -> list[ContextToken]:
    """Order tokens as CLS, GPS, IMAGE-or-missing, LIDAR-or-missing, then history.

    An absent modality never reaches its encoder, so its raw features
    cannot leak into the sequence.
    """
    history = list(history)
    if len(history) > max_history:
        raise ValueError(f"history has {len(history)} tokens, budget is {max_history}")
    if Modality(gps.modality) is not Modality.GPS:
        raise SchemaError("first observation must be GPS")
    t = float(gps.timestamp)
    seq = [cls_token(params, t), encode(gps, params)]
    for m, obs in ((Modality.IMAGE, image), (Modality.LIDAR, lidar)):
        if obs is None:
            seq.append(missing_token(m, params, t))
        else:
            if Modality(obs.modality) is not m:
                raise SchemaError(f"expected a {m.value} observation, got {obs.modality}")
            seq.append(encode(obs, params))
    return seq + history
