from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dephase_hom.errors import DomainError, ParseError
from dephase_hom.histogram import (CoincidenceHistogram, PeakShape, cluster_overlap_map,
                                   enumerate_coincidence_pattern, expected_counts,
                                   format_histogram, parse_histogram, peak_name,
                                   read_histogram, synthesize_histogram, write_histogram)
from dephase_hom.model import BeamsplitterParams

CENTRAL = ["A2'", "A1'", "A0", "A1", "A2"]
SIDE = ["B2'", "B1'", "B0", "B1", "B2"]


def test_peak_names():
    assert peak_name(0, 0) == "A0"
    assert peak_name(1, -2) == "B2'"
    assert peak_name(-2, 1) == "-C1"


def test_central_ratios_exact():
    p0 = enumerate_coincidence_pattern(2.0, 12.5, 3, 0.0)
    p1 = enumerate_coincidence_pattern(2.0, 12.5, 3, 1.0)
    assert p0.exact_ratios(CENTRAL) == [1, 2, 2, 2, 1]
    assert p1.exact_ratios(CENTRAL) == [1, 2, 0, 2, 1]
    assert all(isinstance(w, Fraction) for w in p0.exact_ratios(CENTRAL))


@pytest.mark.parametrize("v", [0.0, 0.3, 0.53, 1.0])
@pytest.mark.parametrize("names", [SIDE, ["-" + n for n in SIDE]])
def test_side_cluster_binomial(v, names):
    p = enumerate_coincidence_pattern(2.0, 12.5, 3, v)
    assert p.exact_ratios(names) == [comb(4, k) for k in range(5)]


def test_single_pulse_layout():
    p = enumerate_coincidence_pattern(12.5, 12.5, 3, 0.53)
    a0 = p.find("A0").exact_weight
    side = p.find("B0").exact_weight
    far = p.find("C0").exact_weight
    assert side == Fraction(3, 16) and far == Fraction(4, 16)
    assert a0 == Fraction(2, 16) * (1 - Fraction(0.53))


@settings(max_examples=100, deadline=None)
@given(v=st.floats(0, 1), dt=st.sampled_from([1.0, 2.0, 3.0, 4.0, 8.0, 12.5]))
def test_total_weight_linear_in_v(v, dt):
    p0 = enumerate_coincidence_pattern(dt, 12.5, 3, 0.0)
    pv = enumerate_coincidence_pattern(dt, 12.5, 3, v)
    total0 = sum(e.exact_weight for e in p0.entries)
    totalv = sum(e.exact_weight for e in pv.entries)
    assert totalv == total0 - Fraction(v) * pv.zero_weight_distinguishable


@settings(max_examples=60, deadline=None)
@given(v=st.floats(0, 1), dt=st.sampled_from([2.0, 3.0, 4.0, 8.0, 12.5]))
def test_pattern_reflection_symmetric(v, dt):
    p = enumerate_coincidence_pattern(dt, 12.5, 3, v)
    table = {e.exact_delay: e.exact_weight for e in p.entries}
    for d, w in table.items():
        assert table[-d] == w


def test_unbalanced_pattern_is_asymmetric():
    # detector A sees T^2 / R^2 arm weights, detector B sees TR / RT
    p = enumerate_coincidence_pattern(2.0, 12.5, 3, 0.0, BeamsplitterParams.from_refl(0.25))
    table = {e.exact_delay: e.exact_weight for e in p.entries}
    assert any(table[d] != table[-d] for d in table)


def test_enumeration_errors():
    with pytest.raises(DomainError):
        enumerate_coincidence_pattern(2.0, 12.5, 0, 0.5)
    with pytest.raises(DomainError):
        enumerate_coincidence_pattern(2.0, 12.5, 3, 1.5)


def test_overlap_map_examples():
    assert cluster_overlap_map(2.0, 12.5).regime == "A1"
    m4 = cluster_overlap_map(4.0, 12.5)
    assert m4.regime == "A2"
    assert set(m4.overlaps["A1"]) == {"B2'"} and set(m4.overlaps["A1'"]) == {"-B2"}
    m8 = cluster_overlap_map(8.0, 12.5)
    assert m8.regime == "A2"
    assert set(m8.overlaps["A1"]) == {"C2'"} and set(m8.overlaps["A1'"]) == {"-C2"}
    assert cluster_overlap_map(12.5, 12.5).regime == "A3"
    assert cluster_overlap_map(6.0, 12.5).regime == "unsupported"


def test_pattern_file_lists_overlaps():
    d = enumerate_coincidence_pattern(4.0, 12.5, 3, 0.5).to_dict()
    assert "B2'" in d["overlaps"]["overlaps"]["A1"]


# --------------------------------------------------------------------------
# synthesis
# --------------------------------------------------------------------------

PAT = enumerate_coincidence_pattern(4.0, 12.5, 5, 0.6)
LOR = PeakShape.lorentzian(1.6)


def test_noiseless_sums_to_total():
    h = synthesize_histogram(PAT, LOR, 1e6, noise=None)
    assert h.counts.sum() == pytest.approx(1e6, rel=1e-9)
    assert h.meta["noise"] == "none"


def test_noiseless_areas_equal_expected():
    # narrow exponential peaks, every peak inside the range
    shape = PeakShape("two_sided_exponential", 0.01, 0.0)
    h = synthesize_histogram(PAT, shape, 1e6, noise=None, t_range=(-80.0, 80.0),
                             bin_width=0.125)
    assert "peaks_outside_range" not in h.meta
    for name in ("A0", "A1", "B2'", "-C1"):
        e = PAT.find(name)
        window = np.abs(h.centers - e.delay) < 0.25
        expected = 1e6 * e.weight / PAT.weights.sum()
        assert h.counts[window].sum() == pytest.approx(expected, rel=1e-9)


def test_expected_histogram_reflection_symmetric():
    for shape in (LOR, PeakShape.emission(0.85)):
        mean = expected_counts(PAT, shape, 1e5, 0.125, (-37.5, 37.5))
        np.testing.assert_allclose(mean, mean[::-1], rtol=1e-10, atol=1e-12)


def test_single_count():
    one = enumerate_coincidence_pattern(12.5, 12.5, 1, 0.0)
    h = synthesize_histogram(one, LOR, 1, seed=3, noise="multinomial")
    assert h.counts.sum() == 1 and h.counts.max() == 1
    with pytest.raises(DomainError):
        synthesize_histogram(one, LOR, 0)


def test_poisson_mean_and_variance():
    mean = expected_counts(PAT, LOR, 2e4, 0.512, (-37.5, 37.5))
    draws = np.array([synthesize_histogram(PAT, LOR, 2e4, bin_width=0.512, seed=s).counts
                      for s in range(1000)])
    busy = mean > 20
    z_mean = (draws.mean(0) - mean)[busy] / np.sqrt(mean[busy] / 1000)
    assert np.abs(z_mean).max() < 5
    rel_var = draws.var(0, ddof=1)[busy] / mean[busy]
    assert np.abs(rel_var - 1).max() < 0.25  # sampling spread of a 1000-draw variance


def test_seeded_synthesis_deterministic():
    a = synthesize_histogram(PAT, LOR, 1e5, seed=7)
    b = synthesize_histogram(PAT, LOR, 1e5, seed=7)
    np.testing.assert_array_equal(a.counts, b.counts)


def test_clipped_peaks_recorded():
    h = synthesize_histogram(PAT, LOR, 1e5, seed=0)
    assert h.meta["peaks_outside_range"] > 0


def test_voigt_shape_normalised():
    m = synthesize_histogram(PAT, PeakShape("lorentzian", 1.0, 0.35), 1e5, noise=None,
                             t_range=(-37.5, 37.5))
    assert np.all(m.counts >= 0) and m.counts.sum() == pytest.approx(1e5)


# --------------------------------------------------------------------------
# file format
# --------------------------------------------------------------------------

def test_round_trip_integer(tmp_path):
    h = synthesize_histogram(PAT, LOR, 1e5, seed=1)
    path = tmp_path / "h.csv"
    write_histogram(path, h)
    g = read_histogram(path)
    np.testing.assert_array_equal(g.counts, h.counts)
    assert g.bin_width == h.bin_width and g.t_min == h.t_min
    assert g.meta == h.meta
    assert format_histogram(g) == path.read_text()


def test_round_trip_float():
    h = synthesize_histogram(PAT, LOR, 1e5, noise=None)
    g = parse_histogram(format_histogram(h))
    np.testing.assert_array_equal(g.counts, h.counts)


def test_truncated_file_reports_line(tmp_path):
    h = synthesize_histogram(PAT, LOR, 1e4, seed=1)
    text = format_histogram(h).splitlines()
    path = tmp_path / "cut.csv"
    path.write_text("\n".join(text[:40]) + "\n")
    with pytest.raises(ParseError) as info:
        read_histogram(path)
    assert info.value.line == 41
    assert "cut.csv:41:" in str(info.value)


def test_bad_rows_report_line():
    good = format_histogram(CoincidenceHistogram(0.5, 0.0, np.array([1, 2, 3])))
    bad = good.replace("\n0.75,2\n", "\n0.75,two\n")
    with pytest.raises(ParseError) as info:
        parse_histogram(bad)
    assert info.value.line == good.splitlines().index("0.75,2") + 1
