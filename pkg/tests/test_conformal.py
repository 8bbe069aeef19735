import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from artifact.conformal import (
    RectangleSpec,
    agm,
    elliptic_k,
    jacobi_sn,
    marked_points_halfplane,
    rect_modulus,
    rectangle_ratio,
    sn_by_landen_step,
    sn_cn_dn,
)
from artifact.errors import ConditioningError, PreconditionError, ValidationError
from artifact.partition import cross_ratio

moduli = st.floats(0.0, 0.999)


def test_elliptic_k_at_zero_is_exact():
    assert elliptic_k(0.0) == math.pi / 2


def test_elliptic_k_lemniscatic_value():
    # Gamma(1/4)^2 / (4 sqrt(pi)) is an independent closed form
    oracle = math.gamma(0.25) ** 2 / (4 * math.sqrt(math.pi))
    assert elliptic_k(1 / math.sqrt(2)) == pytest.approx(oracle, abs=1e-12)
    assert elliptic_k(1 / math.sqrt(2)) == pytest.approx(1.854074677, abs=1e-9)


@given(moduli)
def test_elliptic_k_against_scipy(k):
    assert elliptic_k(k) == pytest.approx(special.ellipk(k * k), rel=1e-12)


def test_elliptic_k_monotone_and_domain():
    values = [elliptic_k(k) for k in np.linspace(0, 0.99, 50)]
    assert np.all(np.diff(values) > 0)
    with pytest.raises(PreconditionError):
        elliptic_k(1.0)
    with pytest.raises(PreconditionError):
        agm(-1.0, 1.0)


@given(moduli, st.floats(-4, 4))
def test_sn_against_scipy(k, u):
    sn, cn, dn = sn_cn_dn(u, k)
    ref = special.ellipj(u, k * k)
    assert sn == pytest.approx(ref[0], abs=1e-12)
    assert cn == pytest.approx(ref[1], abs=1e-12)
    assert dn == pytest.approx(ref[2], abs=1e-12)


@given(moduli)
def test_sn_special_values(k):
    assert jacobi_sn(0.0, k) == 0.0
    assert jacobi_sn(elliptic_k(k), k) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.01, 0.99), st.floats(-3, 3))
def test_landen_step_consistency(k, u):
    assert sn_by_landen_step(u, k) == pytest.approx(jacobi_sn(u, k), abs=1e-12)


@given(st.floats(0.05, 20.0), st.floats(0.1, 50.0))
def test_rect_modulus_round_trip(width, aspect):
    # below aspect 0.1 the modulus is within 1e-12 of 1 and loses digits
    height = aspect * width
    k = rect_modulus(width, height)
    assert rectangle_ratio(k) == pytest.approx(height / width, rel=1e-10)


def test_rect_modulus_rejects_unrepresentable_modulus():
    with pytest.raises(ConditioningError):
        rect_modulus(100.0, 1.0)


def test_square_corners_map_to_standard_points():
    k = rect_modulus(2.0, 1.0)
    images = marked_points_halfplane(RectangleSpec.corners(2.0, 1.0))
    assert np.allclose(images, [-1 / k, -1.0, 1.0, 1 / k], rtol=1e-12)


def test_square_corner_cross_ratio_and_relabeling():
    square = RectangleSpec.corners(1.0, 1.0)
    assert cross_ratio(*marked_points_halfplane(square)) == pytest.approx(0.5, abs=1e-12)
    wide = RectangleSpec.corners(3.0, 1.0)
    chi = cross_ratio(*marked_points_halfplane(wide))
    shifted = RectangleSpec(3.0, 1.0, (1.0, 4.0, 5.0, 0.0))
    assert cross_ratio(*marked_points_halfplane(shifted)) == pytest.approx(1 - chi, abs=1e-12)


def test_cross_ratio_monotone_in_aspect_ratio():
    widths = [0.25, 0.5, 1.0, 2.0, 4.0]
    chis = [cross_ratio(*marked_points_halfplane(RectangleSpec.corners(w, 1.0))) for w in widths]
    assert np.all(np.diff(chis) < 0)


def test_boundary_images_increase_and_move_little():
    rect = RectangleSpec(1.3, 1.0, (0.1, 1.2, 2.0, 3.5, 4.4))
    images = marked_points_halfplane(rect)
    assert np.all(np.diff(images) > 0)
    nudged = RectangleSpec(1.3, 1.0, (0.1, 1.2 + 1e-7, 2.0, 3.5, 4.4))
    assert np.max(np.abs(marked_points_halfplane(nudged) - images)) < 1e-4


def test_rectangle_validation():
    with pytest.raises(ValidationError):
        RectangleSpec(0.0, 1.0, ())
    with pytest.raises(ValidationError):
        RectangleSpec(1.0, 1.0, (0.0, 5.0))
    with pytest.raises(ValidationError):
        RectangleSpec(1.0, 1.0, (2.0, 1.0, 3.0))
    assert RectangleSpec(2.0, 1.0, ()).boundary_point(1.5) == complex(0.5, 0.0)
