"""Normalization, CLAHE, Otsu, and morphology building blocks."""

import numpy as np
import pytest

from gecm.errors import EmptyImageError
from gecm.imageops import clahe, normalize, otsu_threshold, to_uint8

from oracles import otsu_exhaustive


def test_normalize_constant_image_is_zero():
    img = 3.7 * np.ones((16, 16))
    out = normalize(img)
    assert np.all(out == 0.0)


def test_normalize_unit_span_identity():
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, size=(32, 32))
    img.flat[0] = 0.0
    img.flat[1] = 1.0
    out = normalize(img)
    assert np.max(np.abs(out - img)) < 1e-7


def test_normalize_log_branch():
    img = np.array([[0.0, np.e - 1.0]])
    logged = np.log1p(img)
    assert logged.max() == pytest.approx(1.0, abs=1e-15)
    out = normalize(img, high_dynamic_range=True)
    assert out.min() == 0.0
    assert out.max() == pytest.approx(1.0, abs=1e-7)


def test_normalize_empty_image_raises():
    with pytest.raises(EmptyImageError):
        normalize(np.zeros((0, 0)))


def test_normalize_output_range():
    rng = np.random.default_rng(1)
    img = rng.uniform(-50, 150, size=(40, 40))
    out = normalize(img)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_otsu_matches_exhaustive_search():
    rng = np.random.default_rng(2)
    for trial in range(30):
        # bimodal-ish random images plus a few pathological ones
        if trial < 25:
            a = rng.normal(0.25, 0.08, size=400)
            b = rng.normal(0.75, 0.08, size=int(rng.integers(20, 400)))
            img = np.clip(np.concatenate([a, b]), 0, 1).reshape(1, -1)
        else:
            img = rng.uniform(0, 1, size=(17, 13))
        assert otsu_threshold(img) == otsu_exhaustive(img), f"trial={trial}"


def test_otsu_bimodal_separates_modes():
    img = np.concatenate([np.full(500, 0.2), np.full(500, 0.8)]).reshape(20, 50)
    t = otsu_threshold(img)
    fg = to_uint8(img) > t
    assert fg.sum() == 500


def test_clahe_preserves_range_and_shape():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 1, size=(64, 48))
    out = clahe(img)
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_clahe_stretches_local_contrast():
    rng = np.random.default_rng(8)
    img = np.clip(0.4 + 0.03 * rng.standard_normal((64, 64)), 0, 1)
    out = clahe(img, tiles=8, clip=4.0)
    assert out.std() > 2.0 * img.std()


def test_clahe_constant_image_stays_constant():
    out = clahe(np.full((32, 32), 0.5))
    assert np.all(out == out.flat[0])


def test_clahe_deterministic():
    rng = np.random.default_rng(4)
    img = rng.uniform(0, 1, size=(50, 70))
    assert np.array_equal(clahe(img), clahe(img))
