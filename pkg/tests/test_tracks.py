"""Tests for the built-in circuits and their geometry queries."""

import math

import numpy as np
import pytest

from racing.errors import InvalidTrackError
from racing.models import Track, TrackSegment
from racing.tracks import (
    BUILTIN_TRACKS,
    SHARP,
    TrackGeometry,
    get_track,
    track_centerline,
    truth_reference,
)


QUARTER = math.pi / 2.0


class TestBuiltinTracks:
    """Test the shipped circuits."""

    @pytest.mark.parametrize("name", sorted(BUILTIN_TRACKS))
    def test_tracks_close(self, name):
        """Test that every built-in track closes in position and heading."""
        geometry = TrackGeometry(get_track(name))
        assert geometry.length > 0.0
        assert np.hypot(*(geometry.poses[-1, 1:] - geometry.poses[0, 1:])) < 1e-6

    def test_track_a_length(self):
        """Test the lap length of the first circuit."""
        geometry = TrackGeometry(get_track("trackA-analogue"))
        expected = 2.0 * (3.0 + QUARTER / SHARP + 1.2 + QUARTER / 2.0)
        assert geometry.length == pytest.approx(expected)

    def test_unknown_track(self):
        """Test that an unknown name lists the available tracks."""
        with pytest.raises(InvalidTrackError, match="trackA-analogue"):
            get_track("monza")


class TestTrackGeometry:
    """Test curvature, pose and projection queries."""

    def setup_method(self):
        self.geometry = TrackGeometry(get_track("trackA-analogue"))

    def test_piecewise_curvature(self):
        """Test curvature on straights and arcs, periodic over the lap."""
        kappa = self.geometry.curvature(np.array([1.0, 3.1, 1.0 + self.geometry.length]))
        np.testing.assert_allclose(kappa, [0.0, SHARP, 0.0])

    def test_pose_after_first_corner(self):
        """Test the exact pose at the end of the first arc."""
        pose = self.geometry.pose(3.0 + QUARTER / SHARP)
        assert pose.alpha == pytest.approx(QUARTER)
        assert pose.x == pytest.approx(3.0 + 1.0 / SHARP)
        assert pose.y == pytest.approx(1.0 / SHARP)

    def test_locate_on_straight(self):
        """Test projection of a point left of the first straight."""
        location = self.geometry.locate(1.0, 0.1)
        assert location.s == pytest.approx(1.0)
        assert location.eta == pytest.approx(0.1)
        assert location.alpha == pytest.approx(0.0)

    def test_locate_on_arc(self):
        """Test projection of a point inside a circle."""
        circle = TrackGeometry(get_track("circle"))
        location = circle.locate(1.4, 1.5)
        assert location.s == pytest.approx(1.5 * QUARTER)
        assert location.eta == pytest.approx(0.1)
        assert location.alpha == pytest.approx(QUARTER)

    def test_frenet_coordinates(self):
        """Test the heading error of a car on the circle, wrapped across pi."""
        circle = TrackGeometry(get_track("circle"))
        coord = circle.locate(1.4, 1.5).frenet(QUARTER + 0.2)
        assert coord.s == pytest.approx(1.5 * QUARTER)
        assert coord.eta == pytest.approx(0.1)
        assert coord.phi == pytest.approx(0.2)
        assert circle.locate(1.4, 1.5).frenet(QUARTER - 2.0 * math.pi - 0.1).phi == pytest.approx(-0.1)

    def test_open_heading_rejected(self):
        """Test that a track whose heading does not close is invalid."""
        with pytest.raises(InvalidTrackError, match="heading"):
            TrackGeometry(Track(name="line", segments=[TrackSegment(length=2.0)]))

    def test_open_position_rejected(self):
        """Test that a full turn with an extra straight does not close."""
        track = Track(name="lollipop", segments=[
            TrackSegment(length=1.0), TrackSegment(length=2.0 * math.pi, curvature=1.0),
        ])
        with pytest.raises(InvalidTrackError, match="gap"):
            TrackGeometry(track)

    def test_curvature_model_window(self):
        """Test the sigmoid approximation of a window around the first corner."""
        model = self.geometry.curvature_model(2.9, 4.5, 60.0)
        assert model.kappa0 == pytest.approx(0.0)
        assert [s.a for s in model.sigmoids] == pytest.approx([SHARP, -SHARP])
        assert [s.b for s in model.sigmoids] == pytest.approx([0.1, 0.1 + QUARTER / SHARP])
        assert all(s.c == 60.0 for s in model.sigmoids)


class TestCenterlines:
    """Test the sampled ground-truth curves."""

    def test_track_centerline_closes(self):
        """Test the closed polyline and its per-point curvature."""
        track = get_track("trackA-analogue")
        line, kappa = track_centerline(track, 0.05)
        assert len(kappa) == len(line)
        np.testing.assert_allclose(line.points[0], line.points[-1], atol=1e-6)
        assert line.cum_arc[-1] == pytest.approx(TrackGeometry(track).length)
        assert set(np.round(kappa, 6)) == {0.0, SHARP, 2.0}

    def test_centerline_spacing_validated(self):
        """Test that a nonpositive spacing is rejected."""
        with pytest.raises(ValueError):
            track_centerline(get_track("circle"), 0.0)

    def test_truth_reference_window(self):
        """Test a ground-truth window with a local arc origin."""
        geometry = TrackGeometry(get_track("trackA-analogue"))
        reference = truth_reference(geometry, 1.0, 2.0, 0.01, 60.0)
        assert reference.s_origin == pytest.approx(1.0)
        assert reference.length == pytest.approx(1.0)
        np.testing.assert_allclose(reference.points[0], [1.0, 0.0], atol=1e-12)
        assert reference.model.sigmoids == []
