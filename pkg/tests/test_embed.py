import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxbeam.embed import (ContextToken, EncoderParams, Tag, build_sequence, encode,
                           missing_token)
from ctxbeam.env import FEATURE_DIMS, Modality, Observation, SchemaError
from ctxbeam.net import init_params


def obs(m, rng=None, t=0.0):
    f = np.zeros(FEATURE_DIMS[m]) if rng is None else rng.standard_normal(FEATURE_DIMS[m]) * 10
    return Observation(m, f, t)


def random_params(seed=0):
    return init_params(seed=seed).encoder


def test_zero_encoder_gives_zero_embedding():
    p = EncoderParams.zeros()
    tok = encode(obs(Modality.LIDAR, np.random.default_rng(0)), p)
    assert np.array_equal(tok.embedding, np.zeros(32))
    assert tok.tag is Tag.LIDAR


def test_bias_only_encoder_gives_tanh_of_bias():
    p = EncoderParams.zeros()
    v = np.linspace(-3, 3, 32)
    p.biases[Modality.GPS] = v
    tok = encode(obs(Modality.GPS, np.random.default_rng(1)), p)
    assert np.array_equal(tok.embedding, np.tanh(v))


def test_embeddings_stay_in_open_interval():
    rng = np.random.default_rng(2)
    p = random_params(3)
    for _ in range(1000):
        m = list(Modality)[rng.integers(3)]
        # unit-scale inputs; large ones saturate tanh to exactly 1.0 in float64
        o = Observation(m, rng.standard_normal(FEATURE_DIMS[m]), 0.0)
        e = encode(o, p).embedding
        assert np.all(np.abs(e) < 1.0)


def test_encode_rejects_wrong_dimension():
    p = random_params()
    bad = Observation.__new__(Observation)
    object.__setattr__(bad, "modality", Modality.IMAGE)
    object.__setattr__(bad, "features", np.zeros(3))
    object.__setattr__(bad, "timestamp", 0.0)
    with pytest.raises(SchemaError, match="IMAGE"):
        encode(bad, p)


def test_missing_tokens():
    p = random_params()
    img = missing_token(Modality.IMAGE, p)
    assert img.tag is Tag.MISSING_IMAGE and img.embedding is p.missing_image
    lid = missing_token(Modality.LIDAR, p)
    assert lid.tag is Tag.MISSING_LIDAR and lid.embedding is p.missing_lidar
    with pytest.raises(ValueError):
        missing_token(Modality.GPS, p)


def test_sequence_lengths_and_slots():
    p = random_params()
    rng = np.random.default_rng(0)
    seq = build_sequence(obs(Modality.GPS, rng), None, None, [], p)
    assert [t.tag for t in seq] == [Tag.CLS, Tag.GPS, Tag.MISSING_IMAGE, Tag.MISSING_LIDAR]
    hist = [encode(obs(Modality.GPS, rng), p), encode(obs(Modality.IMAGE, rng), p)]
    seq = build_sequence(obs(Modality.GPS, rng), obs(Modality.IMAGE, rng),
                         obs(Modality.LIDAR, rng), hist, p)
    assert len(seq) == 6
    assert [t.tag for t in seq[:4]] == [Tag.CLS, Tag.GPS, Tag.IMAGE, Tag.LIDAR]
    assert seq[4:] == hist


def test_history_over_budget_rejected():
    p = random_params()
    hist = [encode(obs(Modality.GPS), p)] * 5
    with pytest.raises(ValueError):
        build_sequence(obs(Modality.GPS), None, None, hist, p, max_history=4)


def test_wrong_slot_modality_rejected():
    p = random_params()
    with pytest.raises(SchemaError):
        build_sequence(obs(Modality.GPS), obs(Modality.LIDAR), None, [], p)


def test_cls_always_first():
    rng = np.random.default_rng(5)
    p = random_params(1)
    for _ in range(1000):
        img = obs(Modality.IMAGE, rng) if rng.random() < 0.5 else None
        lid = obs(Modality.LIDAR, rng) if rng.random() < 0.5 else None
        hist = [encode(obs(Modality.GPS, rng), p) for _ in range(rng.integers(0, 5))]
        seq = build_sequence(obs(Modality.GPS, rng), img, lid, hist, p)
        assert seq[0].tag is Tag.CLS
        assert sum(t.tag is Tag.CLS for t in seq) == 1


@settings(max_examples=100)
@given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4),
       st.lists(st.floats(-1e6, 1e6), min_size=6, max_size=6))
def test_absent_modality_features_never_matter(image_feats, lidar_feats):
    # the only way raw features could leak is through the encoder, which an absent slot skips
    p = random_params(2)
    gps = Observation(Modality.GPS, np.array([3.0, 20.0]), 1.0)
    lid = Observation(Modality.LIDAR, np.asarray(lidar_feats), 1.0)
    a = build_sequence(gps, None, lid, [], p)
    b = build_sequence(gps, None, Observation(Modality.LIDAR, np.zeros(6), 1.0), [], p)
    assert a[:3] == b[:3]
    img = Observation(Modality.IMAGE, np.asarray(image_feats), 1.0)
    c = build_sequence(gps, img, None, [], p)
    d = build_sequence(gps, Observation(Modality.IMAGE, np.ones(4), 1.0), None, [], p)
    assert c[3] == d[3] and c[3].tag is Tag.MISSING_LIDAR


def test_encode_is_deterministic():
    p = random_params()
    o = obs(Modality.LIDAR, np.random.default_rng(9))
    assert encode(o, p) == encode(o, p)


def test_negative_importance_rejected():
    with pytest.raises(ValueError):
        ContextToken(np.zeros(4), Tag.GPS, importance=-0.1)
