import csv
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvwpe.detector import (
    FixedThreshold,
    analyze_region,
    localize_region,
    summarize_generation,
)
from pvwpe.profiler import WpeProfile
from pvwpe.report import (
    HIST_EDGES,
    HIST_HEADER,
    N_BINS,
    RegionReport,
    build_report,
    histogram,
    read_histogram_csv,
    write_histogram_csv,
)
from pvwpe.series import GenerationSeries
from pvwpe.wpe import ContractError

GOLDEN = Path(__file__).parent / "golden" / "region_all.json"

T0 = np.datetime64("2020-01-01T00:00:00")
STEP = np.timedelta64(300, "s")


def prof(values, site):
    return WpeProfile(site, T0, STEP, 1, 10, np.asarray(values, dtype=float))


def small_region():
    base = np.linspace(0.4, 0.6, 30)
    ps = [prof(base + 0.001 * i, f"s{i}") for i in range(5)]
    gen = [GenerationSeries(f"s{i}", "5000", T0, np.full(50, 0.2 + 0.01 * i)) for i in range(5)]
    return analyze_region("r", ps, FixedThreshold(0.8)), gen


def fixture_report(fleet, profiles):
    a = analyze_region("all", profiles, FixedThreshold(0.8))
    return build_report(a, localize_region(a), summarize_generation(fleet))


def assert_json_close(got, want, path="$"):
    if isinstance(want, float):
        assert got == pytest.approx(want, rel=1e-12, abs=1e-14), path
    elif isinstance(want, dict):
        assert list(got) == list(want), path
        for k in want:
            assert_json_close(got[k], want[k], f"{path}.{k}")
    elif isinstance(want, list):
        assert len(got) == len(want), path
        for i, (g, w) in enumerate(zip(got, want)):
            assert_json_close(g, w, f"{path}[{i}]")
    else:
        assert got == want, path


class TestHistogram:
    def test_edges(self):
        assert len(HIST_EDGES) == N_BINS + 1
        assert HIST_EDGES[0] == -1.0 and HIST_EDGES[-1] == 1.0
        assert HIST_EDGES[1] == -0.95 and HIST_EDGES[38] == 0.9

    def test_two_bins(self):
        counts = histogram([0.95, 0.93, 0.91, 0.60])
        assert sum(counts) == 4
        assert [k for k, n in enumerate(counts) if n] == [31, 38]
        assert counts[38] == 3

    def test_right_closed(self):
        counts = histogram([-1.0, 0.0, 0.05, 1.0])
        assert counts[0] == 1
        assert counts[19] == 1  # (-0.05, 0]
        assert counts[20] == 1  # (0, 0.05]
        assert counts[39] == 1

    def test_skips_undefined(self):
        assert sum(histogram([0.5, None, 0.2])) == 2

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.one_of(st.none(), st.floats(-1, 1)), max_size=60))
    def test_counts_sum(self, corrs):
        counts = histogram(corrs)
        assert len(counts) == N_BINS
        assert sum(counts) == sum(c is not None for c in corrs)
        for c in corrs:
            if c is not None and c > -1:
                k = next(i for i in range(N_BINS) if HIST_EDGES[i] < c <= HIST_EDGES[i + 1])
                assert counts[k] >= 1


class TestBuildReport:
    def test_all_normal(self):
        a, gen = small_region()
        rep = build_report(a, localize_region(a), summarize_generation(gen))
        assert rep.anomalous == []
        assert all(r.verdict == "normal" for r in rep.sites)
        assert json.loads(rep.to_json())["anomalous"] == []

    def test_sorted_ascending(self, fleet, profiles):
        rep = fixture_report(fleet, profiles)
        corrs = [r.correlation for r in rep.sites]
        assert corrs == sorted(corrs)
        assert rep.n_sites == 23

    def test_site_mismatch(self):
        a, gen = small_region()
        with pytest.raises(ContractError, match="s4"):
            build_report(a, localize_region(a), summarize_generation(gen[:4]))
        locs = localize_region(a)
        del locs["s0"]
        with pytest.raises(ContractError, match="s0"):
            build_report(a, locs, summarize_generation(gen))

    def test_json_round_trip(self, fleet, profiles):
        rep = fixture_report(fleet, profiles)
        text = rep.to_json()
        assert RegionReport.from_json(text) == rep
        assert text.endswith("}\n")
        assert "NaN" not in text

    def test_golden(self, fleet, profiles):
        got = json.loads(fixture_report(fleet, profiles).to_json())
        assert_json_close(got, json.loads(GOLDEN.read_text()))

    def test_fixture_localization(self, fleet, profiles, fixture_spec):
        rep = fixture_report(fleet, profiles)
        by_id = {r.site_id: r for r in rep.sites}
        for f in fixture_spec.faults:
            loc = by_id[f.site_id].localization
            assert loc.n_windows > 0 and loc.periods
            assert loc.direction in {"above_mean", "below_mean", "mixed"}


class TestHistogramCsv:
    def test_round_trip(self, tmp_path, fleet, profiles):
        rep = fixture_report(fleet, profiles)
        a, gen = small_region()
        other = build_report(a, localize_region(a), summarize_generation(gen))
        path = tmp_path / "correlation_hist.csv"
        write_histogram_csv([rep, other], path)
        rows = list(csv.reader(path.open()))
        assert tuple(rows[0]) == HIST_HEADER
        assert len(rows) == 1 + 2 * N_BINS
        assert rows[1] == ["all", "-1.0", "-0.95", "0"]
        back = read_histogram_csv(path)
        assert back == {"all": rep.hist_counts, "r": other.hist_counts}

    def test_bad_header(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("a,b,c,d\n")
        with pytest.raises(ContractError):
            read_histogram_csv(path)
