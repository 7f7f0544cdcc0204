import numpy as np
import pytest

from speclearn.metrics import ErrorTriple, error_triple, rows_to_csv


def direct_formulas(pred, ref):
    """Spreadsheet-style evaluation of the three metrics, written as
    explicit loops over samples, steps, and points."""
    P, R, n = pred.shape
    mae_acc = 0.0
    for p in range(P):
        for r in range(R):
            for i in range(n):
                mae_acc += abs(pred[p, r, i] - ref[p, r, i])
    mae = mae_acc / (P * R * n)

    rel_acc = 0.0
    for p in range(P):
        num = 0.0
        den = 0.0
        for r in range(R):
            for i in range(n):
                num += (pred[p, r, i] - ref[p, r, i]) ** 2
                den += ref[p, r, i] ** 2
        rel_acc += np.sqrt(num / den)
    rel = rel_acc / P

    linf_acc = 0.0
    for p in range(P):
        for r in range(R):
            linf_acc += max(abs(pred[p, r, i] - ref[p, r, i]) for i in range(n))
    linf = linf_acc / (P * R)
    return mae, rel, linf


class TestErrorTriple:
    def test_exact_prediction_gives_zeros(self):
        ref = np.random.default_rng(0).standard_normal((3, 4, 7))
        t = error_triple(ref.copy(), ref)
        assert t.as_tuple() == (0.0, 0.0, 0.0)

    def test_uniform_offset(self):
        ref = np.random.default_rng(1).standard_normal((3, 4, 7))
        t = error_triple(ref + 0.25, ref)
        assert t.mae == pytest.approx(0.25, rel=1e-14)
        assert t.l_inf == pytest.approx(0.25, rel=1e-14)

    def test_hand_computable_case_matches_direct_formulas(self):
        rng = np.random.default_rng(2)
        pred = rng.standard_normal((2, 2, 3))
        ref = rng.standard_normal((2, 2, 3))
        t = error_triple(pred, ref)
        mae, rel, linf = direct_formulas(pred, ref)
        assert t.mae == pytest.approx(mae, rel=1e-14)
        assert t.rel_l2 == pytest.approx(rel, rel=1e-14)
        assert t.l_inf == pytest.approx(linf, rel=1e-14)

    def test_mae_below_mean_of_maxima(self):
        rng = np.random.default_rng(3)
        pred = rng.standard_normal((5, 6, 9))
        ref = rng.standard_normal((5, 6, 9))
        t = error_triple(pred, ref)
        assert t.mae <= t.l_inf

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        pred = rng.standard_normal((6, 3, 5))
        ref = rng.standard_normal((6, 3, 5))
        perm = rng.permutation(6)
        t1 = error_triple(pred, ref)
        t2 = error_triple(pred[perm], ref[perm])
        for a, b in zip(t1.as_tuple(), t2.as_tuple()):
            assert a == pytest.approx(b, abs=1e-14)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(5)
        pred = rng.standard_normal((4, 3, 6))
        ref = rng.standard_normal((4, 3, 6))
        c = 7.5
        t1 = error_triple(pred, ref)
        t2 = error_triple(c * pred, c * ref)
        assert t2.rel_l2 == pytest.approx(t1.rel_l2, rel=1e-12)
        assert t2.mae == pytest.approx(c * t1.mae, rel=1e-12)
        assert t2.l_inf == pytest.approx(c * t1.l_inf, rel=1e-12)

    def test_zero_norm_reference_excluded_with_warning(self):
        rng = np.random.default_rng(6)
        pred = rng.standard_normal((3, 2, 4))
        ref = rng.standard_normal((3, 2, 4))
        ref[1] = 0.0
        with pytest.warns(UserWarning, match="zero-norm"):
            t = error_triple(pred, ref)
        kept = error_triple(pred[[0, 2]], ref[[0, 2]])
        assert t.rel_l2 == pytest.approx(kept.rel_l2, rel=1e-14)

    def test_2d_fields_accepted(self):
        rng = np.random.default_rng(7)
        pred = rng.standard_normal((2, 3, 4, 4))
        ref = rng.standard_normal((2, 3, 4, 4))
        t = error_triple(pred, ref)
        assert t.mae > 0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            error_triple(np.zeros((2, 2, 3)), np.zeros((2, 2, 4)))


class TestCsv:
    def test_column_order_and_precision(self):
        rows = [
            {
                "equation": "diffusion_reaction",
                "random_input": "forcing functions",
                "mae": 1.0 / 3.0,
                "rel_l2": 2.0 / 3.0,
                "l_inf": 0.125,
            }
        ]
        text = rows_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "equation,random_input,mae,rel_l2,l_inf"
        fields = lines[1].split(",")
        assert fields[0] == "diffusion_reaction"
        assert float(fields[2]) == 1.0 / 3.0
        assert float(fields[3]) == 2.0 / 3.0
        assert float(fields[4]) == 0.125
