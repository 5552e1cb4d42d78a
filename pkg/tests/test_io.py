import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scobul.events import EventFileError, EventStream, read_events, write_events
from scobul.persist import (
    RunManifest,
    SchemaError,
    input_hash,
    read_history,
    read_intervals,
    read_json,
    read_trajectory,
    write_history,
    write_intervals,
    write_json,
    write_trajectory,
)
from scobul.siggen import GroundTruthLog


@st.composite
def streams(draw):
    n_ch = draw(st.integers(1, 12))
    dur = draw(st.integers(1, 40))
    start = draw(st.integers(0, 1000))
    raster = draw(st.lists(st.lists(st.booleans(), min_size=n_ch, max_size=n_ch), min_size=dur, max_size=dur))
    return EventStream.from_raster(np.array(raster, dtype=bool), start)


class TestEventStream:
    def test_from_events_sorts(self):
        s = EventStream.from_events([2, 0, 2, 1], [1, 3, 0, 2], 4, 3)
        assert s.indptr.tolist() == [0, 1, 2, 4]
        assert s.channels.tolist() == [3, 2, 0, 1]
        assert list(s) == [{3}, {2}, {0, 1}]

    def test_range_checks(self):
        with pytest.raises(ValueError):
            EventStream.from_events([5], [0], 2, 5)
        with pytest.raises(ValueError):
            EventStream.from_events([0], [2], 2, 5)

    def test_window_and_concat(self, rng):
        s = EventStream.from_raster(rng.random((50, 6)) < 0.3, start=10)
        parts = [s.window(10, 23), s.window(23, 23), s.window(23, 60)]
        assert EventStream.concat(parts) == s
        assert s.window(30, 31).channels.tolist() == s.at(30).tolist()
        with pytest.raises(ValueError):
            s.window(5, 20)

    def test_concat_rejects_gaps(self, rng):
        s = EventStream.from_raster(rng.random((20, 3)) < 0.5)
        with pytest.raises(ValueError):
            EventStream.concat([s.window(0, 5), s.window(6, 20)])

    def test_rate(self):
        s = EventStream.from_raster(np.ones((1000, 2), bool))
        assert s.mean_rate_hz() == 1000.0


class TestEventFiles:
    @settings(max_examples=40)
    @given(streams())
    def test_roundtrip_is_byte_stable(self, tmp_path_factory, s):
        d = tmp_path_factory.mktemp("ev")
        write_events(s, d / "a.csv")
        back = read_events(d / "a.csv")
        assert back == s
        write_events(back, d / "b.csv")
        assert (d / "a.csv").read_bytes() == (d / "b.csv").read_bytes()

    def test_empty_stream(self, tmp_path):
        s = EventStream.from_raster(np.zeros((7, 3), bool))
        write_events(s, tmp_path / "e.csv")
        assert read_events(tmp_path / "e.csv") == s

    def test_schema_mismatch(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("# scobul-events v9\n# channels=1 duration=1\nt,source\n")
        with pytest.raises(EventFileError, match="schema mismatch"):
            read_events(p)

    def test_not_an_event_file(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("t,source\n0,1\n")
        with pytest.raises(EventFileError):
            read_events(p)


class TestTables:
    def test_trajectory_roundtrip(self, tmp_path, rng):
        traj = rng.random((100, 4)) * [10, 10, 0.1, 0.1]
        write_trajectory(tmp_path / "t.csv", traj)
        assert np.array_equal(read_trajectory(tmp_path / "t.csv"), traj)

    def test_intervals_roundtrip(self, tmp_path):
        truth = GroundTruthLog([np.array([[3, 10], [40, 55]]), np.zeros((0, 2), np.int64), np.array([[7, 9]])])
        write_intervals(tmp_path / "i.csv", truth)
        back = read_intervals(tmp_path / "i.csv")
        assert len(back.intervals) == 3
        assert all(np.array_equal(a, b) for a, b in zip(back.intervals, truth.intervals))

    def test_history_roundtrip(self, tmp_path):
        hist = [(0, 0.5, 0.7, 0.9, 0.5, 0), (1, 0.4, 0.6, 2.0, 0.4, 3)]
        write_history(tmp_path / "h.csv", hist, "stdp", compat="abc")
        meta, rows = read_history(tmp_path / "h.csv")
        assert meta == {"arm": "stdp", "compat": "abc", "generations": "2"}
        assert rows.tolist() == [list(map(float, h)) for h in hist]

    def test_wrong_kind(self, tmp_path):
        write_trajectory(tmp_path / "t.csv", np.zeros((2, 4)))
        with pytest.raises(SchemaError, match="not a history"):
            read_history(tmp_path / "t.csv")


class TestJson:
    def test_manifest_roundtrip(self, tmp_path):
        m = RunManifest("experiment", {"a": {"b": 1}}, {"root": 3}, "ff", arm="scobul")
        m.write(tmp_path / "m.json")
        assert RunManifest.read(tmp_path / "m.json") == m

    def test_schema_checked(self, tmp_path):
        write_json(tmp_path / "x.json", {"schema": 999, "kind": "manifest"})
        with pytest.raises(SchemaError, match="schema"):
            read_json(tmp_path / "x.json")

    def test_kind_checked(self, tmp_path):
        RunManifest("signal", {}, {}, "0").write(tmp_path / "m.json")
        with pytest.raises(SchemaError, match="genome"):
            read_json(tmp_path / "m.json", "genome")

    def test_numpy_values_serialise(self, tmp_path):
        write_json(tmp_path / "n.json", {"schema": 1, "x": np.float64(0.25), "v": np.arange(3)})
        assert (tmp_path / "n.json").read_text().count("0.25") == 1

    def test_input_hash_tracks_files(self, tmp_path):
        f = tmp_path / "f"
        f.write_text("a")
        h1 = input_hash({"k": 1}, f)
        assert h1 == input_hash({"k": 1}, f)
        f.write_text("b")
        assert input_hash({"k": 1}, f) != h1
        assert input_hash({"k": 2}) != input_hash({"k": 1})
