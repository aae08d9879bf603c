import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from junctionlab.exceptions import ParseError
from junctionlab.io import (
    Report,
    RunConfig,
    atomic_write_text,
    file_digest,
    load_trace_csv,
    write_csv,
    write_trace_csv,
)
from junctionlab.tunneling import SampledTrace

MALFORMED = Path(__file__).parent / "fixtures" / "malformed"


def kind_of(path):
    return path.name.split("_", 1)[0]


class TestLoad:
    def test_iv_with_temperature(self, tmp_path):
        p = tmp_path / "iv.csv"
        p.write_text("voltage_mV,current_nA,temperature_K\n-1,-100,1.3\n0,0,1.3\n1,100,1.3\n")
        tr = load_trace_csv(p, "iv")
        assert (tr.x_unit, tr.y_unit) == ("mV", "nA")
        assert tr.temperature == 1.3
        np.testing.assert_array_equal(tr.y, [-100, 0, 100])

    def test_decay_sorted_with_warning(self, tmp_path):
        p = tmp_path / "decay.csv"
        p.write_text("delay_us,population\n2,0.5\n0,1.0\n1,0.7\n3,0.3\n")
        with pytest.warns(UserWarning, match="sorted"):
            tr = load_trace_csv(p, "decay")
        np.testing.assert_array_equal(tr.x, [0, 1, 2, 3])
        np.testing.assert_array_equal(tr.y, [1.0, 0.7, 0.5, 0.3])

    def test_prober(self, tmp_path):
        p = tmp_path / "prober.csv"
        p.write_text("die_x,die_y,d_nm,resistance_ohm\n0,1,500,6500.5\n2,3,5000,44.1\n")
        pts = load_trace_csv(p, "prober")
        assert [(q.die_x, q.die_y, q.d, q.R) for q in pts] == [(0, 1, 500.0, 6500.5),
                                                               (2, 3, 5000.0, 44.1)]

    def test_trend_with_chips(self, tmp_path):
        p = tmp_path / "trend.csv"
        p.write_text("d_nm,frequency_GHz,chip\n500,4.5,A\n600,5.0,B\n700,5.5,A\n")
        d, f, chips = load_trace_csv(p, "trend")
        assert chips == ["A", "B", "A"]

    def test_blank_lines_ignored(self, tmp_path):
        p = tmp_path / "iv.csv"
        p.write_text("voltage_mV,current_nA\n0,0\n\n1,1\n2,2\n")
        assert len(load_trace_csv(p, "iv")) == 3

    @pytest.mark.parametrize("path", sorted(MALFORMED.glob("*.csv")), ids=lambda p: p.stem)
    def test_malformed_corpus_rejected_with_line(self, path):
        with pytest.raises(ParseError) as info:
            load_trace_csv(path, kind_of(path))
        assert info.value.line is not None
        assert f"{path}:{info.value.line}:" in str(info.value)

    def test_error_line_numbers(self):
        with pytest.raises(ParseError) as info:
            load_trace_csv(MALFORMED / "iv_nonmonotone.csv", "iv")
        assert info.value.line == 4
        with pytest.raises(ParseError, match="unit mismatch"):
            load_trace_csv(MALFORMED / "iv_unit_mismatch.csv", "iv")

    def test_missing_file_and_kind(self, tmp_path):
        with pytest.raises(ParseError):
            load_trace_csv(tmp_path / "nope.csv", "iv")
        with pytest.raises(ParseError):
            load_trace_csv(MALFORMED / "iv_nan.csv", "spectrum")


floats = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestRoundTrip:
    @given(xs=st.lists(floats, min_size=3, max_size=40, unique=True), data=st.data())
    def test_trace_round_trip_is_exact(self, xs, data, tmp_path_factory):
        x = np.sort(np.array(xs))
        y = np.array(data.draw(st.lists(floats, min_size=x.size, max_size=x.size)))
        path = tmp_path_factory.mktemp("rt") / "iv.csv"
        tr = SampledTrace(x, y, temperature=0.04)
        write_trace_csv(path, tr, "iv")
        back = load_trace_csv(path, "iv")
        np.testing.assert_array_equal(back.x, x)
        np.testing.assert_array_equal(back.y, y)
        assert back.temperature == 0.04

    def test_write_csv_uses_repr(self, tmp_path):
        p = tmp_path / "a.csv"
        write_csv(p, ("a", "b"), [(0.1, 1 / 3)])
        assert p.read_text().splitlines()[1] == f"0.1,{1 / 3!r}"


class TestReport:
    def test_deterministic_and_sorted(self):
        r1 = Report("x", {"b": 1, "a": np.float64(2.0)}, {"v": np.array([1.0, np.inf])})
        r2 = Report("x", {"a": 2.0, "b": 1}, {"v": [1.0, float("inf")]})
        assert r1.to_json() == r2.to_json()
        doc = json.loads(r1.to_json())
        assert doc["results"]["v"] == [1.0, "inf"]
        assert list(doc) == sorted(doc)
        assert "tool_version" in doc

    def test_atomic_write_leaves_no_temporaries(self, tmp_path):
        atomic_write_text(tmp_path / "sub" / "r.json", "{}")
        assert [p.name for p in (tmp_path / "sub").iterdir()] == ["r.json"]

    def test_digest_is_content_based(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        a.write_text("same")
        b.write_text("same")
        assert file_digest([a]) == file_digest([b])
        b.write_text("other")
        assert file_digest([a]) != file_digest([b])


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig.load(None, env={})
        assert cfg.n_max == 15 and cfg.constants["e"] == pytest.approx(1.602176634e-19)

    def test_file_and_environment(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"n_max": 11, "grid_resolution": 5}))
        assert RunConfig.load(str(p), env={}).n_max == 11
        assert RunConfig.load(None, env={"JUNCTIONLAB_CONFIG": str(p)}).grid_resolution == 5

    @pytest.mark.parametrize(
        "text",
        [
            "{not json",
            '["list"]',
            '{"unknown_key": 1}',
            '{"n_max": 0}',
            '{"constants": {"e": 1.7e-19}}',
            '{"constants": {"hbar": 1e-34}}',
            '{"constants": {"h": -1}}',
        ],
    )
    def test_rejected(self, tmp_path, text):
        p = tmp_path / "cfg.json"
        p.write_text(text)
        with pytest.raises(ParseError):
            RunConfig.load(str(p), env={})

    def test_restating_codata_is_allowed(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text('{"constants": {"e": 1.602176634e-19}}')
        assert RunConfig.load(str(p), env={}).constants["e"] == 1.602176634e-19
