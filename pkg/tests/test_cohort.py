"""Cohort statistics: ingestion of the per-case outcome tables, group
construction, summary statistics, the hypothesis-test battery, the
speech-score regressions, sample-size search, and the reference-table
reproduction report.

Every numeric expectation lives in tests/expected/stats_expected.json and was
frozen from an independent recomputation; scipy serves as a second route for
the test statistics throughout.
"""
import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as sps

from artifact.cohort import (
    CohortFormatError,
    CohortRow,
    Condition,
    GroupTag,
    IDEAL_ANGULAR_DEPTH_DEG,
    ScalarLocation,
    Study,
    brown_forsythe,
    cohort_groups,
    ingest_cohort,
    ks_normality,
    mann_whitney_u,
    metric_values,
    ols_with_ci,
    paired_t,
    pearson,
    power_analysis,
    pullback_row_test,
    reproduce_tables,
    speech_score_correlations,
    summarize,
)
from artifact.geometry import ParameterError

EXPECTED_PATH = Path(__file__).resolve().parent / "expected" / "stats_expected.json"
DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "artifact" / "data"

with EXPECTED_PATH.open() as fh:
    EXPECTED = json.load(fh)

METRIC_ATTR = {"aid": "aid_deg", "mmd": "mmd_mm", "amd": "amd_mm"}

MWU_PAIRS = {
    "clin_before_vs_after_wt": ("clin_before", "clin_after_wt"),
    "clin_before_vs_exp": ("clin_before", "clin_exp"),
    "clin_cont_wt_vs_exp": ("clin_cont_wt", "clin_exp"),
    "pooled_ctrl_wt_vs_exp": ("pooled_ctrl_wt", "pooled_exp"),
    "pooled_ctrl_wt_vs_exp_d": ("pooled_ctrl_wt", "pooled_exp_d"),
    "tb_c1_wt_vs_c2_wt": ("tb_c1_wt", "tb_c2_wt"),
    "tb_exp_vs_c1_wt": ("tb_exp", "tb_c1_wt"),
    "tb_exp_vs_ctrl_wt": ("tb_exp", "tb_ctrl_wt"),
}


@pytest.fixture(scope="module")
def rows():
    return ingest_cohort(DATA_DIR)


@pytest.fixture(scope="module")
def groups(rows):
    return cohort_groups(rows)


def group_metric(groups, key, metric):
    return metric_values(groups[key], METRIC_ATTR[metric])


class TestIngest:
    def test_row_counts(self, rows):
        tb = [r for r in rows if r.study is Study.TEMPORAL_BONE]
        clin = [r for r in rows if r.study is Study.CLINICAL]
        assert len(tb) == 28
        assert len(clin) == 35
        assert len({r.demographics["specimen"] for r in tb}) == 21
        by_tag = {tag: sum(1 for r in tb if r.group_tag is tag) for tag in GroupTag}
        assert by_tag[GroupTag.C1] == 7
        assert by_tag[GroupTag.C2] == 7
        assert by_tag[GroupTag.BEFORE_PULLBACK] == 7
        assert by_tag[GroupTag.EXP] == 7

    def test_three_control_specimens_left_the_scala_tympani(self, rows):
        controls = [
            r
            for r in rows
            if r.study is Study.TEMPORAL_BONE and r.condition is Condition.CONTROL
        ]
        off_course = [r for r in controls if r.scalar is ScalarLocation.ST_SV or r.fold]
        assert len(off_course) == 3
        assert sum(1 for r in off_course if r.fold) == 2

    def test_clinical_condition_split(self, rows):
        clin = [r for r in rows if r.study is Study.CLINICAL]
        assert sum(1 for r in clin if r.condition is Condition.CONTROL) == 28
        assert sum(1 for r in clin if r.condition is Condition.EXPERIMENTAL) == 7

    def test_exactly_17_ears_have_implant_only_scores(self, rows):
        clin = [r for r in rows if r.study is Study.CLINICAL]
        scored = [r for r in clin if r.cnc_implant_only_pct is not None]
        assert len(scored) == 17

    def test_clinical_subgroups_derived_from_surgery_order(self, rows):
        clin = [r for r in rows if r.study is Study.CLINICAL]
        before = [r for r in clin if r.group_tag is GroupTag.CONT_BEFORE]
        after = [r for r in clin if r.group_tag is GroupTag.CONT_AFTER]
        untagged = [r for r in clin if r.group_tag is None]
        assert len(before) == 6
        assert len(after) == 21
        assert [r.case_id for r in untagged] == ["S09-L"]
        assert all(r.group_tag is GroupTag.EXP for r in clin
                   if r.condition is Condition.EXPERIMENTAL)

    def test_blank_cells_become_absent_values(self, rows):
        by_id = {r.case_id: r for r in rows}
        assert by_id["S03-L"].cnc_implant_only_pct is None
        assert by_id["S03-L"].d_mm is None
        assert "dur_hl_yrs" not in by_id["S03-L"].demographics
        assert by_id["S01-L"].demographics["dur_hl_yrs"] == "8"
        assert by_id["TB01"].d_mm is None
        assert by_id["TB08"].d_mm == pytest.approx(-1.20)

    def test_depth_error_only_on_experimental_rows(self, rows):
        for r in rows:
            if r.d_mm is not None:
                assert r.condition is Condition.EXPERIMENTAL

    def test_demographics_pass_through_verbatim(self, rows):
        by_id = {r.case_id: r for r in rows}
        assert by_id["S21-R"].demographics["etiology"] == "NF2"
        assert by_id["S16-L"].demographics["etiology"] == "Otoscler."
        assert by_id["S02-R"].demographics["wear_time_hrs_per_day"] == "12.6"
        assert by_id["S01-L"].demographics["sex"] == "F"

    def test_rows_are_immutable(self, rows):
        with pytest.raises(AttributeError):
            rows[0].aid_deg = 0.0
        with pytest.raises(TypeError):
            rows[0].demographics["etiology"] = "edited"

    def test_direct_construction_validates_invariants(self):
        with pytest.raises(ParameterError):
            CohortRow(
                study=Study.CLINICAL,
                case_id="X1",
                condition=Condition.CONTROL,
                group_tag=None,
                scalar=ScalarLocation.ST,
                fold=False,
                aid_deg=400.0,
                mmd_mm=0.3,
                amd_mm=0.2,
                cnc_implant_only_pct=140.0,
            )

    def test_directory_and_single_file_ingestion_agree(self, rows):
        tb_only = ingest_cohort(DATA_DIR / "temporal_bone.csv")
        clin_only = ingest_cohort(DATA_DIR / "clinical.csv")
        assert [r.case_id for r in tb_only + clin_only] == [r.case_id for r in rows]

    def test_rejects_unknown_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("case_id,unexpected_column\nX1,1\n")
        with pytest.raises(CohortFormatError, match="unexpected_column|header"):
            ingest_cohort(path)

    def test_rejects_bad_numeric_cell_with_location(self, tmp_path):
        header = ("case_id,specimen,condition,group,d_mm,scalar,fold,"
                  "aid_deg,mmd_mm,amd_mm")
        path = tmp_path / "temporal_bone.csv"
        path.write_text(header + "\nTB01,1,Control,C1,,ST,N,not-a-number,0.5,0.5\n")
        with pytest.raises(CohortFormatError, match=r"aid_deg") as err:
            ingest_cohort(path)
        assert "2" in str(err.value)

    def test_rejects_missing_required_metric(self, tmp_path):
        header = ("case_id,specimen,condition,group,d_mm,scalar,fold,"
                  "aid_deg,mmd_mm,amd_mm")
        path = tmp_path / "temporal_bone.csv"
        path.write_text(header + "\nTB01,1,Control,C1,,ST,N,400,,0.5\n")
        with pytest.raises(CohortFormatError, match="mmd_mm"):
            ingest_cohort(path)

    def test_rejects_speech_score_out_of_range(self, tmp_path):
        header = ("case_id,subject,condition,side,dur_hl_yrs,"
                  "wear_time_hrs_per_day,age_at_implantation_yrs,"
                  "age_at_testing_yrs,hearing_configuration,first_ear,"
                  "etiology,sex,d_mm,scalar,aid_deg,mmd_mm,amd_mm,"
                  "cnc_implant_only_pct,cnc_bimodal_pct")
        path = tmp_path / "clinical.csv"
        path.write_text(header + "\nS01-L,1,Cont,L,,,,,Bilat,N,Unknown,F,,ST,"
                        "400,0.2,0.2,140,\n")
        with pytest.raises(CohortFormatError, match="cnc_implant_only_pct"):
            ingest_cohort(path)

    def test_rejects_depth_error_on_control_row(self, tmp_path):
        header = ("case_id,specimen,condition,group,d_mm,scalar,fold,"
                  "aid_deg,mmd_mm,amd_mm")
        path = tmp_path / "temporal_bone.csv"
        path.write_text(header + "\nTB01,1,Control,C1,-0.5,ST,N,400,0.5,0.5\n")
        with pytest.raises(CohortFormatError, match="d_mm"):
            ingest_cohort(path)

    def test_rejects_wrong_cell_count(self, tmp_path):
        header = ("case_id,specimen,condition,group,d_mm,scalar,fold,"
                  "aid_deg,mmd_mm,amd_mm")
        path = tmp_path / "temporal_bone.csv"
        path.write_text(header + "\nTB01,1,Control,C1,,ST,N,400,0.5\n")
        with pytest.raises(CohortFormatError, match="row 2"):
            ingest_cohort(path)


class TestGroups:
    def test_membership_matches_frozen_lists(self, groups):
        for key, expected_ids in EXPECTED["membership"].items():
            assert [r.case_id for r in groups[key]] == expected_ids, key

    def test_pooled_group_sizes(self, groups):
        assert len(groups["pooled_ctrl_wt"]) == 37
        assert len(groups["pooled_exp"]) == 14
        assert len(groups["pooled_exp_d"]) == 11

    def test_pooled_groups_are_unions(self, groups):
        def ids(key):
            return {r.case_id for r in groups[key]}

        assert ids("pooled_ctrl_wt") == ids("tb_c1_wt") | ids("tb_c2_wt") | ids(
            "clin_cont_wt"
        )
        assert ids("pooled_exp") == ids("tb_exp") | ids("clin_exp")
        assert ids("pooled_exp_d") == ids("tb_exp_d") | ids("clin_exp_d")
        assert ids("tb_ctrl_wt") == ids("tb_c1_wt") | ids("tb_c2_wt")

    def test_translocation_exclusion_count_in_clinic(self, groups):
        excluded = {r.case_id for r in groups["clin_cont"]} - {
            r.case_id for r in groups["clin_cont_wt"]
        }
        assert excluded == {"S21-R", "S32-L"}


class TestSummarize:
    def test_position_metric_summaries_match_frozen(self, groups):
        for key, metrics in EXPECTED["groups"].items():
            if key == "cnc":
                continue
            for metric, want in metrics.items():
                got = summarize(groups[key], METRIC_ATTR[metric])
                assert got.n == want["n"], (key, metric)
                assert got.mean == pytest.approx(want["mean"], rel=1e-12)
                assert got.sd_population == pytest.approx(
                    want["sd_population"], rel=1e-12
                )
                assert got.sd_sample == pytest.approx(want["sd_sample"], rel=1e-12)

    def test_speech_score_summaries_match_frozen(self, groups):
        for key, want in EXPECTED["groups"]["cnc"].items():
            group_key, _, condition = key.rpartition("_")
            attr = (
                "cnc_implant_only_pct" if condition == "implant" else "cnc_bimodal_pct"
            )
            got = summarize(groups[group_key], attr)
            assert got.n == want["n"], key
            assert got.mean == pytest.approx(want["mean"], rel=1e-12)
            assert got.sd_population == pytest.approx(want["sd_population"], rel=1e-12)

    def test_population_sd_uses_n_denominator(self, groups):
        values = metric_values(groups["clin_exp"], "cnc_implant_only_pct")
        got = summarize(groups["clin_exp"], "cnc_implant_only_pct")
        assert got.sd_population == pytest.approx(np.std(values, ddof=0), rel=1e-14)
        assert got.sd_sample == pytest.approx(np.std(values, ddof=1), rel=1e-14)

    def test_acceptance_listed_speech_cells(self, groups):
        implant_all = summarize(groups["clin_exp"], "cnc_implant_only_pct")
        assert (round(implant_all.mean, 1), round(implant_all.sd_population, 2),
                implant_all.n) == (70.0, 24.49, 5)
        implant_d = summarize(groups["clin_exp_d"], "cnc_implant_only_pct")
        assert (round(implant_d.mean, 1), round(implant_d.sd_population, 2),
                implant_d.n) == (82.0, 5.48, 4)
        bimodal = summarize(groups["clin_exp"], "cnc_bimodal_pct")
        assert (round(bimodal.mean, 1), round(bimodal.sd_population, 2),
                bimodal.n) == (84.5, 3.84, 4)

    def test_empty_group_raises(self):
        with pytest.raises(ParameterError):
            summarize([], "aid_deg")

    def test_single_row_has_undefined_sample_sd(self, rows):
        got = summarize(rows[:1], "aid_deg")
        assert got.n == 1
        assert got.sd_population == 0.0
        assert math.isnan(got.sd_sample)


def plain_z(u1, n1, n2):
    mu = n1 * n2 / 2.0
    sigma = math.sqrt(n1 * n2 * (n1 + n2 + 1) / 12.0)
    return (u1 - mu) / sigma


class TestMannWhitney:
    def test_plain_normal_variant_matches_frozen(self, groups):
        for comp, (key_a, key_b) in MWU_PAIRS.items():
            for metric, want in EXPECTED["mwu"][comp].items():
                a = group_metric(groups, key_a, metric)
                b = group_metric(groups, key_b, metric)
                got = mann_whitney_u(a, b, method="normal_plain")
                assert got.n1 == want["n1"] and got.n2 == want["n2"]
                assert got.statistic == pytest.approx(want["u1"], abs=1e-9)
                assert got.p_value == pytest.approx(want["p_plain"], rel=1e-12)
                z = plain_z(got.statistic, got.n1, got.n2)
                assert z == pytest.approx(want["z_plain"], rel=1e-12)
                assert got.p_value == pytest.approx(
                    math.erfc(abs(z) / math.sqrt(2)), rel=1e-12
                )

    def test_exact_variant_matches_frozen_and_scipy(self, groups):
        checked = 0
        for comp, (key_a, key_b) in MWU_PAIRS.items():
            for metric, want in EXPECTED["mwu"][comp].items():
                a = group_metric(groups, key_a, metric)
                b = group_metric(groups, key_b, metric)
                if want["p_exact"] is None:
                    with pytest.raises(ParameterError):
                        mann_whitney_u(a, b, method="exact")
                    continue
                got = mann_whitney_u(a, b, method="exact")
                assert got.p_value == pytest.approx(want["p_exact"], rel=1e-10)
                oracle = sps.mannwhitneyu(
                    a, b, alternative="two-sided", method="exact"
                ).pvalue
                assert got.p_value == pytest.approx(oracle, rel=1e-10)
                checked += 1
        assert checked == 3

    def test_corrected_normal_variant_matches_frozen_and_scipy(self, groups):
        for comp, (key_a, key_b) in MWU_PAIRS.items():
            for metric, want in EXPECTED["mwu"][comp].items():
                a = group_metric(groups, key_a, metric)
                b = group_metric(groups, key_b, metric)
                got = mann_whitney_u(a, b, method="normal_corrected")
                assert got.p_value == pytest.approx(want["p_corrected"], rel=1e-12)
                oracle = sps.mannwhitneyu(
                    a, b, alternative="two-sided", method="asymptotic"
                ).pvalue
                assert got.p_value == pytest.approx(oracle, rel=1e-12)

    def test_auto_resolution_rule(self, groups):
        for comp, (key_a, key_b) in MWU_PAIRS.items():
            for metric, want in EXPECTED["mwu"][comp].items():
                a = group_metric(groups, key_a, metric)
                b = group_metric(groups, key_b, metric)
                got = mann_whitney_u(a, b)
                exact_applies = not want["ties"] and want["n1"] * want["n2"] <= 400
                if exact_applies:
                    assert got.method_variant == "exact"
                    assert got.p_value == pytest.approx(want["p_exact"], rel=1e-10)
                else:
                    assert got.method_variant == "normal_corrected"
                    assert got.p_value == pytest.approx(want["p_corrected"], rel=1e-12)

    def test_invariant_under_monotone_transform(self, groups):
        a = group_metric(groups, "tb_exp", "mmd")
        b = group_metric(groups, "tb_c1_wt", "mmd")
        base = mann_whitney_u(a, b, method="normal_plain")
        warped = mann_whitney_u(a**3, b**3, method="normal_plain")
        assert warped.statistic == base.statistic
        assert warped.p_value == base.p_value

    def test_identical_samples_give_p_one(self):
        sample = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
        got = mann_whitney_u(sample, sample, method="normal_plain")
        assert got.p_value == 1.0

    def test_tiny_hand_computed_case(self):
        got = mann_whitney_u(np.array([1.0, 2.0]), np.array([3.0, 4.0]),
                             method="normal_plain")
        assert got.statistic == 0.0
        z = (0.0 - 2.0) / math.sqrt(2 * 2 * 5 / 12.0)
        assert got.p_value == pytest.approx(math.erfc(abs(z) / math.sqrt(2)), rel=1e-12)

    def test_exact_distribution_against_enumeration(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=5)
        b = rng.normal(size=4)
        got = mann_whitney_u(a, b, method="exact")
        from itertools import combinations

        n1, n2 = len(a), len(b)
        ranks = sps.rankdata(np.concatenate([a, b]))
        u_obs = ranks[:n1].sum() - n1 * (n1 + 1) / 2
        u_all = []
        for positions in combinations(range(n1 + n2), n1):
            rank_sum = sum(p + 1 for p in positions)
            u_all.append(rank_sum - n1 * (n1 + 1) / 2)
        u_all = np.array(u_all)
        p_low = np.mean(u_all <= u_obs)
        p_high = np.mean(u_all >= u_obs)
        assert got.p_value == pytest.approx(min(1.0, 2 * min(p_low, p_high)), rel=1e-12)

    def test_empty_sample_raises(self):
        with pytest.raises(ParameterError):
            mann_whitney_u(np.array([]), np.array([1.0]))

    def test_unknown_method_raises(self):
        with pytest.raises(ParameterError):
            mann_whitney_u(np.array([1.0]), np.array([2.0]), method="bogus")


class TestPairedT:
    @pytest.fixture
    def tb_pairs(self, groups):
        before = sorted(
            groups["tb_before"], key=lambda r: int(r.demographics["specimen"])
        )
        after = sorted(groups["tb_exp"], key=lambda r: int(r.demographics["specimen"]))
        assert [b.demographics["specimen"] for b in before] == [
            a.demographics["specimen"] for a in after
        ]
        return before, after

    def test_all_pair_p_values_match_frozen_and_scipy(self, tb_pairs):
        before, after = tb_pairs
        for metric, attr in METRIC_ATTR.items():
            bv = np.array([getattr(r, attr) for r in before])
            av = np.array([getattr(r, attr) for r in after])
            got = paired_t(bv, av)
            want = EXPECTED["paired_t"][metric]
            assert got.p_value == pytest.approx(want["p_all7"], rel=1e-12)
            oracle = sps.ttest_rel(av, bv)
            assert got.statistic == pytest.approx(oracle.statistic, rel=1e-12)
            assert got.p_value == pytest.approx(oracle.pvalue, rel=1e-12)
            assert got.n1 == got.n2 == 7

    def test_depth_checked_subset_matches_frozen(self, tb_pairs):
        before, after = tb_pairs
        keep = [abs(r.d_mm) < 1.5 for r in after]
        for metric, attr in METRIC_ATTR.items():
            bv = np.array([getattr(r, attr) for r, k in zip(before, keep) if k])
            av = np.array([getattr(r, attr) for r, k in zip(after, keep) if k])
            got = paired_t(bv, av)
            assert got.p_value == pytest.approx(
                EXPECTED["paired_t"][metric]["p_excl_deep"], rel=1e-12
            )

    def test_reference_row_builder_matches_frozen(self, rows):
        for metric, attr in METRIC_ATTR.items():
            got = pullback_row_test(rows, attr)
            want = EXPECTED["paired_t"][metric]
            assert got.n1 == got.n2 == want["n_row"]
            assert got.statistic == pytest.approx(want["t_row"], rel=1e-12)
            assert got.p_value == pytest.approx(want["p_row"], rel=1e-12)

    def test_identical_pairs_degenerate(self):
        sample = np.array([1.0, 2.0, 3.0])
        got = paired_t(sample, sample.copy())
        assert got.degenerate
        assert got.p_value == 1.0

    def test_length_mismatch_raises(self):
        with pytest.raises(ParameterError):
            paired_t(np.array([1.0, 2.0]), np.array([1.0, 2.0, 3.0]))

    def test_single_pair_raises(self):
        with pytest.raises(ParameterError):
            paired_t(np.array([1.0]), np.array([2.0]))


class TestBrownForsythe:
    def test_matches_frozen_and_scipy(self, groups):
        for comp, table in EXPECTED["brown_forsythe"].items():
            key_a, key_b = MWU_PAIRS[comp]
            for metric, want in table.items():
                a = group_metric(groups, key_a, metric)
                b = group_metric(groups, key_b, metric)
                got = brown_forsythe(a, b)
                assert got.statistic == pytest.approx(want["statistic"], rel=1e-12)
                assert got.p_value == pytest.approx(want["p"], rel=1e-12)
                stat, p = sps.levene(a, b, center="median")
                assert got.statistic == pytest.approx(stat, rel=1e-12)
                assert got.p_value == pytest.approx(p, rel=1e-12)

    def test_sample_against_itself_gives_p_one(self):
        sample = np.array([1.0, 5.0, 2.0, 8.0])
        got = brown_forsythe(sample, sample.copy())
        assert got.p_value == 1.0

    def test_too_small_raises(self):
        with pytest.raises(ParameterError):
            brown_forsythe(np.array([1.0]), np.array([1.0, 2.0]))


class TestKsNormality:
    def test_statistic_matches_scipy_against_fitted_normal(self):
        rng = np.random.default_rng(11)
        sample = rng.normal(3.0, 2.0, size=60)
        got = ks_normality(sample, seed=0)
        fitted = sps.norm(sample.mean(), sample.std(ddof=1))
        oracle = sps.kstest(sample, fitted.cdf).statistic
        assert got.statistic == pytest.approx(oracle, rel=1e-12)

    def test_normal_draws_rarely_flagged(self):
        # Under a true null about 5 of 100 p-values legitimately land at or
        # below 0.05, so the bound leaves binomial room below 95.
        hits = 0
        for rep in range(100):
            sample = np.random.default_rng(1000 + rep).normal(size=500)
            if ks_normality(sample, seed=rep, simulations=400).p_value > 0.05:
                hits += 1
        assert hits >= 90

    def test_two_cluster_sample_flagged(self):
        rng = np.random.default_rng(5)
        sample = np.concatenate(
            [rng.normal(-3.0, 0.5, size=20), rng.normal(3.0, 0.5, size=20)]
        )
        assert ks_normality(sample, seed=0).p_value < 0.05

    def test_seed_determinism(self):
        sample = np.random.default_rng(2).normal(size=40)
        first = ks_normality(sample, seed=3)
        second = ks_normality(sample, seed=3)
        assert first.p_value == second.p_value
        assert first.statistic == second.statistic

    def test_constant_sample_degenerate(self):
        got = ks_normality(np.full(10, 4.2), seed=0)
        assert got.degenerate

    def test_too_small_raises(self):
        with pytest.raises(ParameterError):
            ks_normality(np.array([1.0, 2.0, 3.0]), seed=0)


@pytest.fixture(scope="module")
def score_xy(rows):
    scored = [r for r in rows if r.cnc_implant_only_pct is not None]
    assert all(r.study is Study.CLINICAL for r in scored)
    y = np.array([r.cnc_implant_only_pct for r in scored])
    xs = {
        "aid_error": np.array(
            [abs(r.aid_deg - IDEAL_ANGULAR_DEPTH_DEG) for r in scored]
        ),
        "mmd": np.array([r.mmd_mm for r in scored]),
        "amd": np.array([r.amd_mm for r in scored]),
    }
    return xs, y


class TestPearson:
    def test_matches_frozen_and_scipy(self, score_xy):
        xs, y = score_xy
        for metric, want in EXPECTED["pearson"].items():
            got = pearson(xs[metric], y)
            assert got.n == want["n"] == 17
            assert got.r == pytest.approx(want["r"], rel=1e-12)
            assert got.p_value == pytest.approx(want["p"], rel=1e-12)
            oracle = sps.pearsonr(xs[metric], y)
            assert got.r == pytest.approx(oracle.statistic, rel=1e-10)
            assert got.p_value == pytest.approx(oracle.pvalue, rel=1e-10)

    def test_invariant_under_positive_affine_rescaling(self, score_xy):
        xs, y = score_xy
        x = xs["mmd"]
        base = pearson(x, y)
        scaled = pearson(2.5 * x + 7.0, 0.3 * y + 1.0)
        assert scaled.r == pytest.approx(base.r, abs=1e-12)
        assert scaled.p_value == pytest.approx(base.p_value, abs=1e-12)

    def test_perfect_line(self):
        x = np.arange(1.0, 9.0)
        got = pearson(x, x)
        assert got.r == pytest.approx(1.0, abs=1e-12)
        assert got.p_value < 1e-10

    def test_zero_variance_raises(self):
        with pytest.raises(ParameterError):
            pearson(np.full(5, 2.0), np.arange(5.0))

    def test_too_small_raises(self):
        with pytest.raises(ParameterError):
            pearson(np.array([1.0, 2.0]), np.array([3.0, 4.0]))


class TestOlsWithCi:
    def test_exact_line_has_zero_width_band(self):
        x = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        fit = ols_with_ci(x, 2.0 * x + 1.0)
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.intercept == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(fit.upper - fit.lower, 0.0, atol=1e-9)

    def test_fit_matches_scipy_linregress(self, score_xy):
        xs, y = score_xy
        for metric, want in EXPECTED["pearson"].items():
            fit = ols_with_ci(xs[metric], y)
            assert fit.slope == pytest.approx(want["slope"], rel=1e-9)
            assert fit.intercept == pytest.approx(want["intercept"], rel=1e-9)
            oracle = sps.linregress(xs[metric], y)
            assert fit.slope == pytest.approx(oracle.slope, rel=1e-12)
            assert fit.intercept == pytest.approx(oracle.intercept, rel=1e-12)

    def test_band_is_narrowest_at_mean_and_symmetric(self, score_xy):
        xs, y = score_xy
        x = xs["aid_error"]
        grid = np.sort(np.append(np.linspace(x.min(), x.max(), 200), x.mean()))
        fit = ols_with_ci(x, y, grid=grid)
        widths = fit.upper - fit.lower
        assert np.argmin(widths) == int(np.where(grid == x.mean())[0][0])
        mid = fit.intercept + fit.slope * grid
        assert np.allclose(fit.upper - mid, mid - fit.lower, atol=1e-9)

    def test_wider_level_means_wider_band(self, score_xy):
        xs, y = score_xy
        narrow = ols_with_ci(xs["mmd"], y, level=0.80)
        wide = ols_with_ci(xs["mmd"], y, level=0.99)
        assert np.all(wide.upper - wide.lower > narrow.upper - narrow.lower)

    def test_band_covers_mean_response_on_simulated_truth(self):
        # 95% pointwise CI of the mean response: coverage at the grid points
        # across seeded resimulations should sit near the nominal level.
        rng = np.random.default_rng(21)
        x = np.linspace(0.0, 10.0, 25)
        truth = 1.5 * x + 4.0
        probe = np.array([2.5, 5.0, 7.5])
        truth_probe = 1.5 * probe + 4.0
        covered = 0
        total = 0
        for _ in range(400):
            y = truth + rng.normal(0.0, 2.0, size=x.size)
            fit = ols_with_ci(x, y, grid=probe)
            covered += int(np.sum((fit.lower <= truth_probe) & (truth_probe <= fit.upper)))
            total += probe.size
        assert 0.92 < covered / total < 0.98

    def test_zero_x_variance_raises(self):
        with pytest.raises(ParameterError):
            ols_with_ci(np.full(5, 1.0), np.arange(5.0))


class TestSpeechScoreCorrelations:
    def test_reproduces_frozen_regressions(self, rows):
        table = speech_score_correlations(rows)
        assert list(table) == ["aid_error", "mmd", "amd"]
        for metric, want in EXPECTED["pearson"].items():
            entry = table[metric]
            assert entry.n == 17
            assert entry.r == pytest.approx(want["r"], rel=1e-12)
            assert entry.p_value == pytest.approx(want["p"], rel=1e-12)
            assert entry.band.slope == pytest.approx(want["slope"], rel=1e-9)
            assert entry.band.intercept == pytest.approx(want["intercept"], rel=1e-9)

    def test_depth_error_uses_absolute_offset_from_design_depth(self, rows):
        table = speech_score_correlations(rows)
        by_id = {r.case_id: r for r in rows}
        entry = table["aid_error"]
        idx = list(entry.case_ids).index("S06-L")
        assert entry.x[idx] == pytest.approx(abs(by_id["S06-L"].aid_deg - 450.0))
        assert entry.x[idx] == pytest.approx(92.0)


class TestPowerAnalysis:
    def test_reference_moments_land_in_published_bands(self):
        bands = EXPECTED["power"]["bands"]
        moments = EXPECTED["power"]["moments"]
        for metric in ("aid", "mmd", "amd"):
            (mean_a, sd_a), (mean_b, sd_b) = moments[metric]
            got = power_analysis(
                mean_a,
                sd_a,
                mean_b,
                sd_b,
                mode=EXPECTED["power"]["mode"],
                alpha=EXPECTED["power"]["alpha"],
                target_power=EXPECTED["power"]["target_power"],
                seed=0,
            )
            lo, hi = bands[metric]
            assert got.reachable
            assert lo <= got.required_n <= hi, metric

    def test_conventional_alpha_needs_more_cases(self):
        (mean_a, sd_a), (mean_b, sd_b) = EXPECTED["power"]["moments"]["aid"]
        strict = power_analysis(mean_a, sd_a, mean_b, sd_b, mode="equal_n", seed=0)
        assert strict.alpha == 0.05
        assert 18 <= strict.required_n <= 22

    def test_fixed_control_mode(self):
        (mean_a, sd_a), (mean_b, sd_b) = EXPECTED["power"]["moments"]["aid"]
        got = power_analysis(
            mean_a, sd_a, mean_b, sd_b, mode="fixed_control", n_fixed=37, seed=0
        )
        assert got.reachable
        assert 9 <= got.required_n <= 13

    def test_fixed_control_power_can_saturate_below_target(self):
        (mean_a, sd_a), (mean_b, sd_b) = EXPECTED["power"]["moments"]["mmd"]
        got = power_analysis(
            mean_a,
            sd_a,
            mean_b,
            sd_b,
            mode="fixed_control",
            n_fixed=37,
            seed=0,
            replicates=5000,
            n_limit=600,
        )
        assert not got.reachable
        assert got.required_n is None
        assert max(p for _, p in got.evaluated) < 0.65

    def test_identical_distributions_unreachable(self):
        got = power_analysis(
            0.0, 1.0, 0.0, 1.0, mode="equal_n", seed=0, replicates=2000, n_limit=64
        )
        assert not got.reachable
        assert got.required_n is None
        # The rank decision is discrete, so at tiny n its attained size can
        # exceed the nominal level (at n=3 per group it is exactly 0.10);
        # once the normal approximation holds the rate must sit at the level.
        assert max(p for _, p in got.evaluated) <= 0.12
        mc_sd = math.sqrt(0.05 * 0.95 / 2000)
        for n, p in got.evaluated:
            if n >= 10:
                assert abs(p - 0.05) < 4 * mc_sd

    def test_smoothed_curve_is_monotone_and_close_to_raw(self):
        got = power_analysis(
            0.0, 1.0, 0.8, 1.0, mode="equal_n", seed=0, replicates=10000
        )
        smoothed = [p for _, p in got.smoothed]
        assert all(b >= a for a, b in zip(smoothed, smoothed[1:]))
        raw = dict(got.evaluated)
        assert max(p - raw[n] for n, p in got.smoothed) <= 0.02

    def test_required_n_is_smallest_smoothed_crossing(self):
        got = power_analysis(
            0.0, 1.0, 0.8, 1.0, mode="equal_n", seed=0, replicates=10000
        )
        below = [n for n, p in got.smoothed if n < got.required_n]
        smoothed = dict(got.smoothed)
        assert all(smoothed[n] < got.target_power for n in below)
        assert smoothed[got.required_n] >= got.target_power

    def test_seed_determinism(self):
        first = power_analysis(0.0, 1.0, 0.8, 1.0, seed=9, replicates=4000)
        second = power_analysis(0.0, 1.0, 0.8, 1.0, seed=9, replicates=4000)
        assert first.required_n == second.required_n
        assert first.evaluated == second.evaluated

    def test_bad_inputs_raise(self):
        with pytest.raises(ParameterError):
            power_analysis(0.0, 0.0, 1.0, 1.0)
        with pytest.raises(ParameterError):
            power_analysis(0.0, 1.0, 1.0, 1.0, mode="bogus")
        with pytest.raises(ParameterError):
            power_analysis(0.0, 1.0, 1.0, 1.0, mode="fixed_control")
        with pytest.raises(ParameterError):
            power_analysis(0.0, 1.0, 1.0, 1.0, alpha=1.5)


EXPECTED_FAILING_CELLS = {
    ("temporal_bone", "C1", "mmd_mean"),
    ("temporal_bone", "C1_WT", "mmd_mean"),
    ("temporal_bone", "C1_WT", "mmd_sd"),
    ("temporal_bone", "C1_WT", "amd_mean"),
    ("temporal_bone", "C1_WT", "amd_sd"),
    ("clinical", "CONT_ALL", "cnc_implant_mean"),
    ("clinical", "CONT_ALL", "cnc_implant_sd"),
    ("clinical", "CONT_BEFORE", "cnc_implant_mean"),
    ("clinical", "CONT_BEFORE", "cnc_implant_sd"),
    ("clinical", "EXP_ALL", "aid_sd"),
    ("clinical", "EXP_D", "aid_sd"),
    ("clinical", "mwu before_vs_after_wt", "mmd_p"),
    ("pooled", "EXP_D", "aid_mean"),
    ("pooled", "EXP_ALL", "mmd_mean"),
    ("pooled", "EXP_ALL", "mmd_sd"),
}


class TestReproduceTables:
    @pytest.fixture
    def report(self, rows):
        return reproduce_tables(rows)

    def test_every_reference_cell_is_compared(self, report):
        tables = {c.table for c in report.cells}
        assert tables == {"temporal_bone", "clinical", "pooled", "correlations"}
        assert report.n_pass + report.n_fail == len(report.cells)
        assert len(report.cells) > 100

    def test_only_the_known_cells_fail(self, report):
        failing = {(c.table, c.row_label, c.column) for c in report.cells if not c.passed}
        assert failing == EXPECTED_FAILING_CELLS

    def test_pooled_control_row_displays_published_values(self, report):
        cells = {
            (c.row_label, c.column): c for c in report.cells if c.table == "pooled"
        }
        assert cells[("CTRL_WT", "aid_mean")].computed_display == "401"
        assert cells[("CTRL_WT", "aid_sd")].computed_display == "41"
        assert cells[("CTRL_WT", "mmd_mean")].computed_display == "0.34"
        assert cells[("CTRL_WT", "mmd_sd")].computed_display == "0.13"
        assert cells[("CTRL_WT", "amd_mean")].computed_display == "0.23"
        assert cells[("CTRL_WT", "amd_sd")].computed_display == "0.19"
        assert cells[("EXP_D", "aid_mean")].computed_display == "422"
        assert cells[("EXP_D", "aid_sd")].computed_display == "19"

    def test_knife_edge_rounding_follows_numpy_half_even(self, report):
        cell = next(
            c
            for c in report.cells
            if c.table == "clinical"
            and c.row_label == "CONT_BEFORE"
            and c.column == "amd_mean"
        )
        assert cell.computed == pytest.approx(0.165, abs=5e-4)
        assert cell.computed_display == "0.16"
        assert cell.passed

    def test_depth_checked_aid_sd_uses_sample_convention_in_pooled_table(self, report):
        cell = next(
            c
            for c in report.cells
            if c.table == "pooled" and c.row_label == "EXP_D" and c.column == "aid_sd"
        )
        assert cell.passed
        assert cell.computed == pytest.approx(18.61, abs=0.01)

    def test_p_value_cells_use_stated_tolerance(self, report):
        cell = next(
            c
            for c in report.cells
            if c.table == "temporal_bone"
            and c.row_label == "paired_t before_vs_exp"
            and c.column == "amd_p"
        )
        assert cell.passed
        assert abs(cell.computed - cell.reference) <= 0.02

    def test_counts_reproduce(self, report):
        cells = {(c.table, c.row_label, c.column): c for c in report.cells}
        assert cells[("temporal_bone", "C1", "translocations")].passed
        assert cells[("temporal_bone", "C1", "folds")].passed
        assert cells[("clinical", "CONT_ALL", "translocations")].passed
        assert cells[("pooled", "CTRL_WT", "n")].passed

    def test_correlation_cells_pass_at_published_precision(self, report):
        for metric in ("aid_error", "mmd", "amd"):
            for column in ("r", "p"):
                cell = next(
                    c
                    for c in report.cells
                    if c.table == "correlations"
                    and c.row_label == metric
                    and c.column == column
                )
                assert cell.passed, (metric, column)

    def test_text_report_lists_status_and_totals(self, report):
        text = report.to_text()
        assert text.count("FAIL") >= report.n_fail
        assert "PASS" in text
        assert f"{report.n_fail} FAIL" in text
        assert "401" in text

    def test_csv_report_round_trips(self, report, tmp_path):
        path = tmp_path / "report.csv"
        path.write_text(report.to_csv())
        with path.open() as fh:
            parsed = list(csv.DictReader(fh))
        assert len(parsed) == len(report.cells)
        assert {row["status"] for row in parsed} == {"PASS", "FAIL"}
        failing = {
            (row["table"], row["row"], row["column"])
            for row in parsed
            if row["status"] == "FAIL"
        }
        assert failing == EXPECTED_FAILING_CELLS

    def test_report_is_deterministic(self, rows, report):
        again = reproduce_tables(rows)
        assert [c.computed for c in again.cells] == [c.computed for c in report.cells]
        assert again.to_text() == report.to_text()
