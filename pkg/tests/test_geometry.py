import math

import numpy as np
import pytest

from detcal.errors import GeometryError
from detcal.geometry import Box, CornerBox, flip_horizontal, from_corners, iou, to_corners

from conftest import dyadic


def grid_iou(a, b, n=1024):
    """Independent IoU oracle: count n-grid cell centers inside each box."""

    def count(lo, hi):
        i_lo = math.ceil(lo * n - 0.5)
        i_hi = math.floor(hi * n - 0.5)
        return max(0, i_hi - i_lo + 1)

    ac, bc = to_corners(a), to_corners(b)
    cells_a = count(ac.x_min, ac.x_max) * count(ac.y_min, ac.y_max)
    cells_b = count(bc.x_min, bc.x_max) * count(bc.y_min, bc.y_max)
    inter = count(max(ac.x_min, bc.x_min), min(ac.x_max, bc.x_max)) * count(
        max(ac.y_min, bc.y_min), min(ac.y_max, bc.y_max)
    )
    union = cells_a + cells_b - inter
    return inter / union if union else 0.0


def random_box(rng, denom=None):
    if denom:
        w = dyadic(rng, 0.05, 0.5, denom)
        h = dyadic(rng, 0.05, 0.5, denom)
        return Box(dyadic(rng, 0.0, 1.0, denom), dyadic(rng, 0.0, 1.0, denom), w, h)
    return Box(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5))


def random_pair(rng, denom=None):
    a = random_box(rng, denom)
    # bias half the pairs toward overlap so nontrivial IoUs are exercised
    if rng.random() < 0.5:
        cx = min(max(a.cx + rng.uniform(-0.2, 0.2), 0.0), 1.0)
        cy = min(max(a.cy + rng.uniform(-0.2, 0.2), 0.0), 1.0)
        b = Box(cx, cy, rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5))
    else:
        b = random_box(rng, denom)
    return a, b


class TestCorners:
    def test_basic(self):
        c = to_corners(Box(0.5, 0.5, 0.4, 0.2))
        assert (c.x_min, c.x_max) == pytest.approx((0.3, 0.7))
        assert (c.y_min, c.y_max) == pytest.approx((0.4, 0.6))

    def test_full_frame(self):
        assert to_corners(Box(0.5, 0.5, 1.0, 1.0)) == CornerBox(0.0, 0.0, 1.0, 1.0)

    def test_round_trip_dyadic_exact(self, rng):
        for _ in range(1000):
            b = random_box(rng, denom=1024)
            assert from_corners(to_corners(b)) == b

    def test_round_trip_float(self, rng):
        for _ in range(1000):
            b = random_box(rng)
            r = from_corners(to_corners(b))
            assert r.cx == pytest.approx(b.cx, abs=1e-15)
            assert r.w == pytest.approx(b.w, rel=1e-12)

    def test_inverted_corners_rejected(self):
        with pytest.raises(GeometryError):
            CornerBox(0.5, 0.0, 0.4, 1.0)


class TestIou:
    def test_identity(self):
        b = Box(0.4, 0.6, 0.3, 0.2)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(Box(0.2, 0.5, 0.2, 0.2), Box(0.8, 0.5, 0.2, 0.2)) == 0.0

    def test_touching_edges_zero(self):
        # shared edge contributes no area
        assert iou(Box(0.3, 0.5, 0.2, 0.2), Box(0.5, 0.5, 0.2, 0.2)) == 0.0

    def test_analytic_third(self):
        a = Box(0.5, 0.5, 0.4, 0.4)
        b = Box(0.7, 0.5, 0.4, 0.4)
        assert iou(a, b) == pytest.approx(1 / 3, abs=1e-12)
        assert abs(grid_iou(a, b) - 1 / 3) <= 4 / 1024

    def test_symmetry(self, rng):
        for _ in range(10_000):
            a, b = random_pair(rng)
            assert iou(a, b) == iou(b, a)

    def test_bounds_and_identity_condition(self, rng):
        for _ in range(2000):
            a, b = random_pair(rng)
            v = iou(a, b)
            assert 0.0 <= v <= 1.0
            if v == 1.0:
                assert to_corners(a) == to_corners(b)

    def test_zero_area_rejected(self):
        with pytest.raises(GeometryError):
            Box(0.5, 0.5, 0.0, 0.2)
        with pytest.raises(GeometryError):
            Box(0.5, 0.5, 0.2, 0.0)

    def test_grid_oracle_against_boolean_mask(self, rng):
        # sanity-check the O(1) lattice counter against a literal pixel mask
        n = 128
        ys, xs = np.mgrid[0:n, 0:n]
        cx_pix = (xs + 0.5) / n
        cy_pix = (ys + 0.5) / n
        for _ in range(20):
            a = Box(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4))
            b = Box(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4))

            def mask(box):
                c = to_corners(box)
                return (cx_pix >= c.x_min) & (cx_pix <= c.x_max) & (cy_pix >= c.y_min) & (cy_pix <= c.y_max)

            ma, mb = mask(a), mask(b)
            union = (ma | mb).sum()
            brute = (ma & mb).sum() / union if union else 0.0
            assert grid_iou(a, b, n) == pytest.approx(brute, abs=1e-12)


class TestFlip:
    def test_examples(self):
        assert flip_horizontal(Box(0.3, 0.5, 0.2, 0.2)).cx == 0.7
        assert flip_horizontal(Box(0.5, 0.5, 0.2, 0.2)).cx == 0.5

    def test_involution_on_pixel_grid(self, rng):
        # exact involution holds for coordinates on a power-of-two pixel grid
        for _ in range(2000):
            b = random_box(rng, denom=1024)
            f = flip_horizontal(b)
            assert flip_horizontal(f) == b
            assert (f.cy, f.w, f.h) == (b.cy, b.w, b.h)

    def test_preserves_other_fields(self, rng):
        for _ in range(200):
            b = random_box(rng)
            f = flip_horizontal(b)
            assert (f.cy, f.w, f.h) == (b.cy, b.w, b.h)
