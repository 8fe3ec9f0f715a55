"""Vacuum AdS3 causal structure, ridge length and mutual information."""

import numpy as np
import pytest

from nlqclab import geometry as geo
from nlqclab.errors import EmptyDiamond, EmptyRegion, NotOnQuadric


def delayed(tau):
    return geo.preset_config("delayed", tau)


# ---------------------------------------------------------------------------
# causal classification
# ---------------------------------------------------------------------------

def test_light_focuses_at_center_after_quarter_period():
    p = geo.BoundaryPoint(0, 0)
    assert geo.bulk_causal(p, geo.BulkPoint(np.pi / 2, 0, 0)) == "null"
    assert geo.bulk_causal(p, geo.BulkPoint(np.pi / 2 - 0.1, 0, 0)) == "spacelike"
    assert geo.bulk_causal(p, geo.BulkPoint(np.pi / 2 + 0.1, 0, 0)) == "timelike-future"


def test_near_boundary_lightspeed():
    p = geo.BoundaryPoint(0, 0)
    x = geo.BulkPoint(np.pi / 4, 7.0, np.pi / 4 + 0.05)
    assert geo.bulk_causal(p, x) == "spacelike"
    y = geo.BulkPoint(np.pi / 4 + 0.1, 7.0, np.pi / 4 - 0.05)
    assert geo.bulk_causal(p, y) == "timelike-future"


def test_past_classification():
    p = geo.BoundaryPoint(0, 0)
    assert geo.bulk_causal(p, geo.BulkPoint(-np.pi / 2 - 0.1, 0, 0)) == "past"


def test_quadric_validation():
    with pytest.raises(NotOnQuadric):
        geo.BulkPoint.from_embedding([1.0, 1.0, 0.0, 0.0])
    x = geo.BulkPoint(0.3, 0.7, 1.1)
    again = geo.BulkPoint.from_embedding(x.embedding(), t_hint=0.3)
    assert abs(again.t - x.t) < 1e-9 and abs(again.rho - x.rho) < 1e-9


# ---------------------------------------------------------------------------
# scattering region
# ---------------------------------------------------------------------------

def test_delayed_outputs_have_a_scattering_region():
    rep = geo.scattering_region_nonempty(delayed(0.2))
    assert rep.nonempty
    # the maximized minimum slack balances inputs against outputs at the
    # center of the region, giving sin(tau / 2)
    assert abs(rep.margin - np.sin(0.1)) < 1e-6


def test_early_outputs_have_no_region():
    cfg = geo.ScatteringConfig(
        geo.BoundaryPoint(0, 0), geo.BoundaryPoint(0, np.pi),
        geo.BoundaryPoint(np.pi - 0.2, np.pi / 2),
        geo.BoundaryPoint(np.pi - 0.2, -np.pi / 2),
    )
    rep = geo.scattering_region_nonempty(cfg)
    assert not rep.nonempty
    assert rep.margin < -1e-3


def test_marginal_region_is_a_single_point():
    rep = geo.scattering_region_nonempty(geo.preset_config("marginal"))
    assert rep.nonempty
    assert abs(rep.margin) < 1e-6


# ---------------------------------------------------------------------------
# ridge
# ---------------------------------------------------------------------------

def test_marginal_ridge_has_zero_length():
    assert geo.ridge_curve(geo.preset_config("marginal"), 512).length < 1e-6


@pytest.mark.parametrize("tau", [0.05, 0.1, 0.2, 0.4])
def test_ridge_length_matches_analytic_form(tau):
    # closed form for the symmetric preset: 2 * arctanh(sin tau)
    length = geo.ridge_curve(delayed(tau), 4096).length
    assert abs(length - 2 * np.arctanh(np.sin(tau))) < 1e-5


def test_ridge_monotone_in_delay():
    lengths = [geo.ridge_curve(delayed(t), 2048).length for t in (0.05, 0.1, 0.2, 0.4)]
    assert all(b > a for a, b in zip(lengths, lengths[1:]))


def test_ridge_reflection_symmetry():
    cfg = delayed(0.2)
    a = geo.ridge_curve(cfg, 2048).length
    b = geo.ridge_curve(cfg.reflected(), 2048).length
    assert abs(a - b) < 1e-9


def test_ridge_resolution_cauchy():
    l1 = geo.ridge_curve(delayed(0.2), 2048).length
    l2 = geo.ridge_curve(delayed(0.2), 4096).length
    assert abs(l1 - l2) / l2 < 1e-5


def test_empty_region_raises():
    cfg = geo.ScatteringConfig(
        geo.BoundaryPoint(0, 0), geo.BoundaryPoint(0, np.pi),
        geo.BoundaryPoint(np.pi - 0.3, np.pi / 2),
        geo.BoundaryPoint(np.pi - 0.3, -np.pi / 2),
    )
    with pytest.raises(EmptyRegion):
        geo.ridge_curve(cfg)


# ---------------------------------------------------------------------------
# decision regions
# ---------------------------------------------------------------------------

def test_marginal_decision_interval():
    d0, d1 = geo.decision_regions(geo.preset_config("marginal"))
    assert abs(d0.corner_left.t - np.pi / 4) < 1e-9
    assert abs(geo._wrap_signed(d0.corner_left.theta - (-np.pi / 4))) < 1e-9
    assert abs(geo._wrap_signed(d0.corner_right.theta - np.pi / 4)) < 1e-9
    assert abs(geo._wrap_signed(d1.bottom.theta - np.pi)) < 1e-9


def test_delayed_intervals_widen_but_stay_disjoint():
    d0m, _ = geo.decision_regions(geo.preset_config("marginal"))
    d0d, d1d = geo.decision_regions(delayed(0.2))
    assert d0d.base_width > d0m.base_width
    gap = geo._circle_dist(d0d.corner_right.theta, d1d.corner_left.theta)
    assert gap > 1e-3


def test_degenerate_diamond_flagged():
    # output on the input's boundary lightcone collapses the diamond
    cfg = geo.ScatteringConfig(
        geo.BoundaryPoint(0, 0), geo.BoundaryPoint(0, np.pi),
        geo.BoundaryPoint(np.pi / 2, np.pi / 2),
        geo.BoundaryPoint(np.pi / 2, -np.pi / 2),
    )
    with pytest.raises(EmptyDiamond):
        geo.decision_regions(cfg)


# ---------------------------------------------------------------------------
# mutual information and the connected wedge identity
# ---------------------------------------------------------------------------

def test_marginal_mutual_information_vanishes():
    assert abs(geo.mutual_information(geo.preset_config("marginal"))) < 1e-9


def test_delayed_mutual_information_positive():
    assert geo.mutual_information(delayed(0.2)) > 0.1


@pytest.mark.parametrize("cutoff", [1e-3, 1e-4, 1e-5])
def test_cutoff_independence(cutoff):
    base = geo.mutual_information(delayed(0.2), cutoff=1e-4)
    assert abs(geo.mutual_information(delayed(0.2), cutoff=cutoff) - base) < 1e-9


def test_marginal_report_is_all_zero():
    rep = geo.verify_connected_wedge(geo.preset_config("marginal"), 512)
    assert rep.region_nonempty
    assert rep.ridge_length < 1e-6
    assert rep.mutual_information < 1e-9
    assert rep.saturation_residual < 1e-6


@pytest.mark.parametrize("tau", [0.1, 0.2])
def test_vacuum_saturation(tau):
    rep = geo.verify_connected_wedge(delayed(tau), 4096)
    assert rep.saturation_residual < 1e-3


def test_translation_invariance():
    a = geo.verify_connected_wedge(delayed(0.2), 2048)
    b = geo.verify_connected_wedge(delayed(0.2).translated(0.41), 2048)
    assert abs(a.ridge_length - b.ridge_length) < 1e-9
    assert abs(a.mutual_information - b.mutual_information) < 1e-9


def grid_configs():
    out = []
    for tau in (0.05, 0.1, 0.2, 0.3, 0.4):
        out.append(delayed(tau))
    for tau in (0.1, 0.2, 0.3):
        for da in (-0.08, 0.06):
            out.append(geo.ScatteringConfig(
                geo.BoundaryPoint(0, 0),
                geo.BoundaryPoint(0.02, np.pi + 0.1),
                geo.BoundaryPoint(np.pi + tau, np.pi / 2 + da),
                geo.BoundaryPoint(np.pi + tau + 0.05, -np.pi / 2),
            ))
    for tau in (0.15, 0.25, 0.35):
        for dc in (0.05, 0.15, 0.25):
            out.append(geo.ScatteringConfig(
                geo.BoundaryPoint(0, dc),
                geo.BoundaryPoint(0, np.pi - dc),
                geo.BoundaryPoint(np.pi + tau, np.pi / 2),
                geo.BoundaryPoint(np.pi + tau, -np.pi / 2 + dc),
            ))
    return out


def test_inequality_on_config_grid():
    configs = grid_configs()
    assert len(configs) >= 20
    for cfg in configs:
        rep = geo.verify_connected_wedge(cfg, 2048)
        assert rep.region_nonempty
        assert rep.inequality_margin >= -1e-3
