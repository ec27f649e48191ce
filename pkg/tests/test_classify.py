"""Tests for projection, residuals, and the three set-decision rules."""

import numpy as np
import pytest

import reference
from setlrc.classify import (
    Decision,
    ProbeSet,
    ResidualMatrix,
    classify_set,
    decide,
    decide_ewv,
    decide_mv,
    decide_nn,
    decision_record,
    estimate_parameters,
    project,
    residual,
    residual_matrix,
)
from setlrc.errors import ConfigurationError, InvalidInputError
from setlrc.gallery import GalleryConfig, Regressor, build_gallery


def random_gallery(rng, class_sizes, tau, resolution, precompute=True):
    sets = {
        name: [rng.uniform(0.0, 255.0, tau) for _ in range(n)]
        for name, n in class_sizes.items()
    }
    cfg = GalleryConfig(resolution=resolution, precompute=precompute)
    return build_gallery(sets, cfg)


def rmat(rows, ids=None):
    values = np.asarray(rows, dtype=np.float64)
    if ids is None:
        ids = [f"c{i}" for i in range(values.shape[0])]
    return ResidualMatrix(
        values=values, class_order=tuple(ids), probe_count=values.shape[1]
    )


class TestProbeSet:
    def test_from_vectors_stacks_columns(self):
        rng = np.random.default_rng(1)
        vecs = [rng.uniform(0, 255, 12) for _ in range(4)]
        ps = ProbeSet.from_vectors(vecs, set_id="s1", true_class="ana")
        assert ps.matrix.shape == (12, 4)
        assert ps.n_probes == 4 and ps.tau == 12
        assert np.array_equal(ps.matrix[:, 2], vecs[2])
        assert ps.true_class == "ana"

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            ProbeSet.from_vectors([])

    def test_one_dimensional_matrix_rejected(self):
        with pytest.raises(InvalidInputError):
            ProbeSet(matrix=np.zeros(5))


class TestEstimateParameters:
    def test_exact_membership_gives_unit_parameter(self):
        rng = np.random.default_rng(2)
        g = rng.uniform(1.0, 255.0, 40)
        reg = Regressor("g", g[:, None])
        theta = estimate_parameters(reg, g)
        assert theta.shape == (1,)
        assert theta[0] == pytest.approx(1.0, rel=1e-12)

    def test_orthogonal_probe_gives_zero(self):
        e1 = np.zeros(10)
        e1[0] = 1.0
        e2 = np.zeros(10)
        e2[1] = 1.0
        theta = estimate_parameters(Regressor("e", e1[:, None]), e2)
        assert theta[0] == pytest.approx(0.0, abs=1e-15)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(3)
        m = rng.uniform(0.0, 255.0, size=(12, 3))
        probe = rng.uniform(0.0, 255.0, 12)
        theta = estimate_parameters(Regressor("m", m), probe)
        expected = reference.solve_theta(m, probe)
        assert np.linalg.norm(theta - expected) <= 1e-9 * np.linalg.norm(expected)

    def test_length_mismatch_rejected(self):
        reg = Regressor("m", np.ones((8, 2)))
        with pytest.raises(InvalidInputError):
            estimate_parameters(reg, np.ones(9))


class TestProject:
    def test_zero_parameters_give_zero_vector(self):
        reg = Regressor("m", np.arange(12.0).reshape(6, 2))
        assert np.array_equal(project(reg, np.zeros(2)), np.zeros(6))

    def test_single_column_identity(self):
        g = np.linspace(0.0, 255.0, 9)
        out = project(Regressor("g", g[:, None]), np.array([1.0]))
        assert np.array_equal(out, g)

    def test_projection_is_idempotent(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            m = rng.uniform(0.0, 255.0, size=(30, 4))
            reg = Regressor("m", m)
            probe = rng.uniform(0.0, 255.0, 30)
            once = project(reg, estimate_parameters(reg, probe))
            twice = project(reg, estimate_parameters(reg, once))
            assert np.linalg.norm(twice - once) <= 1e-8 * np.linalg.norm(once)

    def test_parameter_length_checked(self):
        reg = Regressor("m", np.ones((6, 2)))
        with pytest.raises(InvalidInputError):
            project(reg, np.ones(3))


class TestResidual:
    def test_identical_vectors(self):
        v = np.arange(7.0)
        assert residual(v, v) == 0.0

    def test_pythagorean_triple(self):
        rho = np.zeros(6)
        rho[0], rho[1] = 3.0, 4.0
        assert residual(rho, np.zeros(6)) == pytest.approx(5.0)

    def test_matches_summation_oracle(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(0.0, 255.0, 400)
        b = rng.uniform(0.0, 255.0, 400)
        direct = np.sqrt(np.sum((a - b) ** 2))
        assert residual(a, b) == pytest.approx(direct, rel=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            residual(np.ones(3), np.ones(4))


class TestResidualMatrix:
    def test_span_membership_zeroes_own_row(self):
        rng = np.random.default_rng(6)
        g = random_gallery(rng, {"a": 5, "b": 5}, 64, (8, 8))
        member_columns = [g.classes[0].matrix[:, j] for j in range(3)]
        probes = ProbeSet.from_vectors(member_columns)
        R = residual_matrix(g, probes, mode="online")
        assert np.all(R.values[0] <= 1e-8)
        assert np.all(R.values[1] > R.values[0])

    def test_single_class_gallery(self):
        rng = np.random.default_rng(7)
        g = random_gallery(rng, {"only": 4}, 36, (6, 6))
        probes = ProbeSet(rng.uniform(0, 255, size=(36, 5)))
        R = residual_matrix(g, probes, mode="online")
        assert R.values.shape == (1, 5)
        for strategy in ("mv", "nn", "ewv"):
            assert decide(R, strategy).predicted == "only"

    def test_online_and_fast_agree(self):
        rng = np.random.default_rng(8)
        g = random_gallery(rng, {"a": 5, "b": 5, "c": 5}, 64, (8, 8))
        probes = ProbeSet(rng.uniform(0.0, 255.0, size=(64, 7)))
        online = residual_matrix(g, probes, mode="online")
        fast = residual_matrix(g, probes, mode="fast")
        rel = np.abs(online.values - fast.values) / np.maximum(
            np.abs(online.values), 1e-300
        )
        assert rel.max() <= 1e-6

    def test_fast_without_pinv_rejected(self):
        rng = np.random.default_rng(9)
        g = random_gallery(rng, {"a": 3}, 16, (4, 4), precompute=False)
        probes = ProbeSet(rng.uniform(0, 255, size=(16, 2)))
        with pytest.raises(ConfigurationError, match="pseudoinverse"):
            residual_matrix(g, probes, mode="fast")

    def test_resolution_mismatch_rejected(self):
        rng = np.random.default_rng(10)
        g = random_gallery(rng, {"a": 3}, 16, (4, 4))
        probes = ProbeSet(rng.uniform(0, 255, size=(25, 2)))
        with pytest.raises(ConfigurationError, match="resolution"):
            residual_matrix(g, probes, mode="online")

    def test_unknown_mode_rejected(self):
        rng = np.random.default_rng(11)
        g = random_gallery(rng, {"a": 3}, 16, (4, 4))
        probes = ProbeSet(rng.uniform(0, 255, size=(16, 2)))
        with pytest.raises(ConfigurationError, match="mode"):
            residual_matrix(g, probes, mode="batch")

    def test_entries_validated(self):
        with pytest.raises(InvalidInputError):
            rmat([[1.0, -0.5]])
        with pytest.raises(InvalidInputError):
            rmat([[np.inf, 1.0]])


class TestDecideMV:
    def test_unanimous(self):
        d = decide_mv(rmat([[1, 1], [2, 2]], ids=["a", "b"]))
        assert d.predicted == "a"
        assert d.per_class_score == {"a": 2.0, "b": 0.0}
        assert d.per_image_votes == ["a", "a"]
        assert d.tie_broken is False

    def test_vote_tie_broken_by_mean_residual(self):
        d = decide_mv(rmat([[1, 4], [5, 2]], ids=["a", "b"]))
        assert d.predicted == "a"
        assert d.tie_broken is True
        assert d.per_class_score == {"a": 1.0, "b": 1.0}

    def test_full_tie_falls_back_to_lowest_index(self):
        d = decide_mv(rmat([[1, 5], [5, 1]], ids=["a", "b"]))
        assert d.predicted == "a"
        assert d.tie_broken is True

    def test_per_image_tie_votes_lowest_index(self):
        d = decide_mv(rmat([[2.0], [2.0]], ids=["a", "b"]))
        assert d.per_image_votes == ["a"]
        assert d.predicted == "a"

    def test_strategy_label(self):
        assert decide_mv(rmat([[1.0]])).strategy == "MV"


class TestDecideNN:
    def test_global_minimum_wins(self):
        d = decide_nn(rmat([[3, 2], [1, 4]], ids=["a", "b"]))
        assert d.predicted == "b"
        assert d.per_class_score == {"a": 2.0, "b": 1.0}
        assert d.tie_broken is False

    def test_zero_entry_wins(self):
        d = decide_nn(rmat([[5, 7], [6, 0.0], [9, 1]], ids=["a", "b", "c"]))
        assert d.predicted == "b"

    def test_total_tie_falls_back(self):
        d = decide_nn(rmat([[2, 2], [2, 2]], ids=["a", "b"]))
        assert d.predicted == "a"
        assert d.tie_broken is True


class TestDecideEWV:
    def test_hand_evaluated_sums(self):
        d = decide_ewv(rmat([[0, 0], [1, 1]], ids=["a", "b"]), beta=1.0, normalize=False)
        assert d.predicted == "a"
        assert d.per_class_score["a"] == pytest.approx(2.0)
        assert d.per_class_score["b"] == pytest.approx(2.0 * np.exp(-1.0))

    def test_single_class(self):
        d = decide_ewv(rmat([[4.0, 9.0]], ids=["only"]))
        assert d.predicted == "only"

    def test_normalized_scores_scale_invariant(self):
        rng = np.random.default_rng(12)
        base = rng.uniform(0.5, 30.0, size=(4, 6))
        d1 = decide_ewv(rmat(base), beta=2.0, normalize=True)
        d2 = decide_ewv(rmat(base * 37.5), beta=2.0, normalize=True)
        assert d1.predicted == d2.predicted
        for cid in d1.per_class_score:
            assert d1.per_class_score[cid] == pytest.approx(
                d2.per_class_score[cid], rel=1e-12
            )

    def test_all_zero_residuals_handled(self):
        d = decide_ewv(rmat([[0.0, 0.0], [0.0, 0.0]], ids=["a", "b"]))
        assert d.predicted == "a"
        assert d.tie_broken is True

    def test_non_positive_beta_rejected(self):
        with pytest.raises(InvalidInputError):
            decide_ewv(rmat([[1.0]]), beta=0.0)
        with pytest.raises(InvalidInputError):
            decide_ewv(rmat([[1.0]]), beta=-2.0)


class TestDecide:
    def test_case_insensitive_names(self):
        R = rmat([[1, 2], [3, 4]], ids=["a", "b"])
        assert decide(R, "Mv").strategy == "MV"
        assert decide(R, "NN").strategy == "NN"
        assert decide(R, "ewv").strategy == "EWV"

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ConfigurationError, match="strategy"):
            decide(rmat([[1.0]]), "plurality")

    def test_predicted_must_be_scored(self):
        with pytest.raises(InvalidInputError):
            Decision(predicted="ghost", strategy="NN", per_class_score={"a": 1.0})


class TestClassifySet:
    def test_member_probes_recovered_by_all_strategies(self):
        rng = np.random.default_rng(13)
        g = random_gallery(rng, {"a": 5, "b": 5, "c": 5}, 49, (7, 7))
        member = [g.classes[1].matrix[:, j] for j in range(4)]
        probes = ProbeSet.from_vectors(member, set_id="m")
        for strategy in ("mv", "nn", "ewv"):
            assert classify_set(g, probes, strategy=strategy).predicted == "b"

    def test_single_probe_makes_mv_and_nn_agree(self):
        rng = np.random.default_rng(14)
        g = random_gallery(rng, {"a": 4, "b": 4, "c": 4}, 36, (6, 6))
        for t in range(10):
            probes = ProbeSet(rng.uniform(0.0, 255.0, size=(36, 1)))
            mv = classify_set(g, probes, strategy="mv")
            nn = classify_set(g, probes, strategy="nn")
            assert mv.predicted == nn.predicted

    def test_auto_mode_matches_online(self):
        rng = np.random.default_rng(15)
        g = random_gallery(rng, {"a": 4, "b": 4}, 25, (5, 5))
        probes = ProbeSet(rng.uniform(0.0, 255.0, size=(25, 3)))
        auto = classify_set(g, probes, strategy="ewv")
        online = classify_set(g, probes, strategy="ewv", mode="online")
        assert auto.predicted == online.predicted

    def test_permutation_of_probe_order_is_irrelevant(self):
        rng = np.random.default_rng(16)
        g = random_gallery(rng, {"a": 5, "b": 5, "c": 5}, 49, (7, 7))
        matrix = rng.uniform(0.0, 255.0, size=(49, 8))
        shuffled = matrix[:, rng.permutation(8)]
        for strategy in ("mv", "nn", "ewv"):
            d1 = classify_set(g, ProbeSet(matrix), strategy=strategy)
            d2 = classify_set(g, ProbeSet(shuffled), strategy=strategy)
            assert d1.predicted == d2.predicted

    def test_matches_reference_implementation_on_many_sets(self):
        rng = np.random.default_rng(17)
        g = random_gallery(rng, {"a": 4, "b": 4, "c": 4}, 40, (8, 5))
        matrices = [reg.matrix for reg in g.classes]
        ids = g.class_ids
        for t in range(50):
            probes = ProbeSet(rng.uniform(0.0, 255.0, size=(40, 6)))
            R = residual_matrix(g, probes, mode="fast")
            table = reference.residual_table(matrices, probes.matrix)
            np.testing.assert_allclose(R.values, table, rtol=1e-9)
            assert decide(R, "mv").predicted == ids[reference.vote_majority(table)]
            assert decide(R, "nn").predicted == ids[reference.vote_nearest(table)]
            assert (
                decide(R, "ewv", beta=2.0, normalize=True).predicted
                == ids[reference.vote_exponential(table, 2.0, True)]
            )


class TestGeometricInvariants:
    def test_pythagoras_and_norm_bound(self):
        rng = np.random.default_rng(18)
        for _ in range(50):
            m = rng.uniform(0.0, 255.0, size=(50, 5))
            reg = Regressor("m", m)
            rho = rng.uniform(0.0, 255.0, 50)
            rho_hat = project(reg, estimate_parameters(reg, rho))
            r = residual(rho, rho_hat)
            lhs = np.dot(rho, rho)
            rhs = np.dot(rho_hat, rho_hat) + r * r
            assert abs(lhs - rhs) <= 1e-6 * lhs
            assert r <= np.linalg.norm(rho) * (1 + 1e-6)


class TestDecisionRecord:
    def test_line_layout(self):
        d = Decision(
            predicted="ben",
            strategy="NN",
            per_class_score={"ana": 12.5, "ben": 3.25},
            tie_broken=False,
        )
        line = decision_record("set-9", d)
        parts = line.split("\t")
        assert parts[:4] == ["set-9", "ben", "NN", "false"]
        assert parts[4:] == ["ana=12.5", "ben=3.25"]

    def test_scores_round_trip_exactly(self):
        scores = {"a": 1.0 / 3.0, "b": np.pi}
        d = Decision(predicted="a", strategy="EWV", per_class_score=scores, tie_broken=True)
        parts = decision_record("s", d).split("\t")
        assert parts[3] == "true"
        for field, (cid, value) in zip(parts[4:], scores.items()):
            name, text = field.split("=")
            assert name == cid
            assert float(text) == value
