import csv
import io
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from nltk.translate.bleu_score import sentence_bleu

from textshape.corpus import EmbeddingTable, tokenize
from textshape.errors import ConfigError, EmptyInput, ZeroTarget
from textshape.evaluate import (
    achieved_delta,
    bleu,
    build_report,
    delta_histogram,
    percent_error,
    sig9,
)
from textshape.generate import GenerationResult
from textshape.neighborhood import TrainingPair
from textshape.shape import AttributeScorer

TARGETS = [("speed", 0.125), ("speed", 0.5), ("speed", 2.0), ("speed", 4.0),
           ("volume", 0.125), ("volume", 0.5), ("volume", 2.0),
           ("circuitousness", 0.125), ("circuitousness", 0.5), ("circuitousness", 1.0)]

# achieved-delta rows and their published "% Err" column
PUBLISHED = {
    "cev_lm": ([0.118, 0.450, 1.755, 3.547, 0.114, 0.451, 1.863, 0.064, 0.431, 0.781], 14.91),
    "n_only": ([0.111, 0.457, 1.760, 3.621, 0.111, 0.443, 1.752, 0.072, 0.423, 0.790], 15.51),
    "mucoco": ([0.169, 0.871, 1.293, 3.610, 0.142, 0.558, 2.310, 0.068, 0.058, 0.054], 42.38),
    "gpt3": ([-0.091, 0.023, 0.200, 0.294, 0.019, 0.150, 1.769, 0.011, 0.009, 0.021], 90.44),
    "ssd_lm": ([0.412, 0.335, 1.094, 1.059, 0.369, 0.283, 0.671, 0.075, 0.078, 0.109], 90.00),
}


def result(attr, target, achieved, output="a b", original=None, rid=0):
    return GenerationResult(rid, tokenize(output), None, achieved, target, 0.0, attr,
                            None if original is None else tokenize(original))


def add_one_reference(p_n, **_):
    """Zero clipped-match precisions 0/l become 1/(l + 1); others untouched."""
    return [p if p.numerator else Fraction(1, p.denominator + 1) for p in p_n]


class TestPercentError:
    def test_table_cell(self):
        assert percent_error(0.450, 0.5) == pytest.approx(10.0)

    def test_exact(self):
        assert percent_error(2.0, 2.0) == 0.0

    def test_zero_target(self):
        with pytest.raises(ZeroTarget):
            percent_error(0.1, 0.0)

    @given(st.floats(-100, 100), st.floats(0.01, 100), st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3))
    def test_scale_invariant(self, a, t, c):
        assert percent_error(c * a, c * t) == pytest.approx(percent_error(a, t), rel=1e-9, abs=1e-9)


class TestBleu:
    def test_identical(self):
        x = tokenize("the food was really great today")
        assert bleu(x, x) == pytest.approx(1.0)

    def test_no_overlap_unsmoothed(self):
        assert bleu(tokenize("a b c d"), tokenize("e f g h"), smoothing="none") == 0.0

    def test_bad_args(self):
        with pytest.raises(ConfigError):
            bleu(tokenize("a"), tokenize("a"), max_n=0)
        with pytest.raises(ConfigError):
            bleu(tokenize("a"), tokenize("a"), smoothing="laplace")

    PAIRS = [
        ("the cat sat on the mat today", "the cat is on the mat"),
        ("a quick brown fox jumps over the lazy dog", "the quick brown fox jumped over a lazy dog"),
        ("it was fine again", "the food was fine and the staff was kind"),
        ("x y z w", "x q z w"),
        ("great food great staff great prices", "great food and friendly staff"),
    ]

    @pytest.mark.parametrize("cand,ref", PAIRS)
    def test_against_nltk_add_one(self, cand, ref):
        c, r = tokenize(cand), tokenize(ref)
        want = sentence_bleu([list(r.tokens)], list(c.tokens), smoothing_function=add_one_reference)
        assert bleu(c, r) == pytest.approx(want, abs=1e-6)

    def test_short_candidate(self):
        # p1 = 2/3, p2 = 0/2 -> 1/3, p3 = 0/1 -> 1/2, no 4-grams -> 0/0 -> 1/1
        assert bleu(tokenize("x y z"), tokenize("x q z")) == pytest.approx((1 / 9) ** 0.25, rel=1e-12)

    def test_identical_short(self):
        x = tokenize("hello there")
        assert bleu(x, x) == 1.0

    @pytest.mark.parametrize("max_n", [1, 2])
    @pytest.mark.parametrize("cand,ref", PAIRS[:2])
    def test_against_nltk_unsmoothed(self, cand, ref, max_n):
        c, r = tokenize(cand), tokenize(ref)
        want = sentence_bleu([list(r.tokens)], list(c.tokens), weights=[1 / max_n] * max_n)
        assert bleu(c, r, max_n=max_n, smoothing="none") == pytest.approx(want, abs=1e-6)

    @given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=12),
           st.lists(st.sampled_from("abcdef"), min_size=1, max_size=12))
    @settings(max_examples=80)
    def test_unit_interval(self, a, b):
        v = bleu(tokenize(" ".join(a)), tokenize(" ".join(b)))
        assert 0.0 <= v <= 1.0


class TestHistogram:
    def test_single_center_bin(self):
        h = delta_histogram([-0.1, 0.0, 0.1], 0.5)
        assert h.counts.tolist() == [3]
        assert h.bin_edges.tolist() == [-0.25, 0.25]

    def test_symmetric_under_pairing(self):
        rng = np.random.default_rng(0)
        d = rng.normal(size=500)
        pairs = [TrainingPair(i, i + 1, 0.1, float(x)) for i, x in enumerate(d)]
        pairs += [TrainingPair(i + 1, i, 0.1, float(-x)) for i, x in enumerate(d)]
        h = delta_histogram(pairs, 0.05)
        assert h.total == 1000
        np.testing.assert_array_equal(h.counts, h.counts[::-1])
        np.testing.assert_array_equal(h.bin_edges, -h.bin_edges[::-1])

    def test_boundary_goes_outward(self):
        h = delta_histogram([0.25, -0.25], 0.5)
        assert h.counts.tolist() == [1, 0, 1]

    @given(st.lists(st.floats(-20, 20), min_size=1, max_size=200), st.floats(0.01, 3.0))
    @settings(max_examples=60)
    def test_partition(self, deltas, w):
        h = delta_histogram(deltas, w)
        assert h.total == len(deltas)
        assert len(h.counts) == len(h.bin_edges) - 1
        assert np.all(np.diff(h.bin_edges) > 0)
        for x in deltas:
            i = int(np.searchsorted(h.bin_edges, x, side="right")) - 1
            assert 0 <= i < len(h.counts)

    def test_accepts_dicts(self):
        h = delta_histogram([{"delta": 0.0}, {"delta": 1.0}], 1.0)
        assert h.counts.tolist() == [0, 1, 1]

    def test_empty(self):
        with pytest.raises(EmptyInput):
            delta_histogram([], 0.1)

    def test_bad_width(self):
        with pytest.raises(ConfigError):
            delta_histogram([0.0], 0.0)

    def test_csv(self):
        text = delta_histogram([0.0, 0.1, -1 / 3], 0.1).to_csv()
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["bin_lo", "bin_hi", "count"]
        assert sum(int(r[2]) for r in rows[1:]) == 3
        assert rows[1][0] == "-0.35"


class TestReport:
    @pytest.mark.parametrize("name", sorted(PUBLISHED))
    def test_published_rows(self, name):
        achieved, published = PUBLISHED[name]
        rep = build_report([result(a, t, x) for (a, t), x in zip(TARGETS, achieved)])
        assert rep.overall_percent_error == pytest.approx(published, abs=0.05)
        assert rep.counts == {"results": 10, "groups": 10}

    def test_exact_targets(self):
        rep = build_report([result("speed", 0.5, 0.5, rid=i) for i in range(4)])
        assert rep.per_target[0]["percent_error"] == 0.0
        assert rep.overall_percent_error == 0.0

    def test_mean_of_groups(self):
        rep = build_report([result("speed", 1.0, 1.1), result("volume", 1.0, 0.8)])
        assert rep.overall_percent_error == pytest.approx(15.0)

    def test_group_mean_before_error(self):
        # errors of the mean, not mean of errors: (0.5 + 1.5) / 2 hits the target exactly
        rep = build_report([result("speed", 1.0, 0.5), result("speed", 1.0, 1.5)])
        assert rep.overall_percent_error == 0.0

    def test_bleu_against_originals(self):
        rep = build_report([result("speed", 1.0, 1.0, "a b c d", "a b c d"),
                            result("speed", 1.0, 1.0, "w x y z", "a b c d")])
        assert rep.per_target[0]["bleu"] == pytest.approx(0.5 * (1.0 + bleu(tokenize("w x y z"), tokenize("a b c d"))))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        res = [result(TARGETS[i % 10][0], TARGETS[i % 10][1], float(rng.normal()), rid=i) for i in range(60)]
        base = build_report(res).dumps()
        for _ in range(5):
            perm = [res[i] for i in rng.permutation(len(res))]
            assert build_report(perm).dumps() == base

    def test_json_nine_digits(self):
        rep = build_report([result("speed", 3.0, 1.0)], config={"seed": 1})
        data = json.loads(rep.dumps())
        assert data["overall_percent_error"] == sig9(200 / 3)
        assert data["config"] == {"seed": 1}

    def test_empty(self):
        with pytest.raises(EmptyInput):
            build_report([])


def test_achieved_delta_direct():
    table = EmbeddingTable.from_dict({"a": [0.0, 0.0], "b": [3.0, 4.0], "c": [0.0, 8.0]})
    sc = AttributeScorer("speed", window_size=1, stride=1)
    x, y = tokenize("a b"), tokenize("a b c")
    # speed(y) = (5 + 5) / 2, speed(x) = 5
    assert achieved_delta(x, y, sc, table) == 0.0
    assert achieved_delta(x, x, sc, table) == 0.0
    z = tokenize("a c b")
    # (8 + 5) / 2 - 5
    assert achieved_delta(x, z, sc, table) == pytest.approx(1.5)
    assert math.isfinite(achieved_delta(z, y, sc, table))
