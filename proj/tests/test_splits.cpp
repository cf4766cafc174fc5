#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "sourcecv/rng.hpp"
#include "sourcecv/splits.hpp"
#include "sourcecv/synthgen.hpp"

using namespace sourcecv;

namespace {

LabelMatrix single_label_matrix(std::size_t n, std::size_t positives) {
    LabelMatrix lm;
    lm.labels = {"L"};
    lm.values.setZero(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < positives; ++i) lm.values(static_cast<Eigen::Index>(i), 0) = 1;
    return lm;
}

Dataset tiny_sources(const std::vector<std::pair<std::string, int>>& sizes) {
    std::vector<Record> records;
    for (const auto& [source, n] : sizes) {
        for (int i = 0; i < n; ++i) {
            Record rec;
            rec.record_id = source + "_" + std::to_string(i);
            rec.source_id = source;
            rec.normal_flag = true;
            rec.payload = FeatureVector{};
            records.push_back(std::move(rec));
        }
    }
    return Dataset(std::move(records), LabelSpace({}));
}

} // namespace

TEST_CASE("stratified_kfold spreads a single label at quota") {
    const auto lm = single_label_matrix(100, 50);
    const FoldPlan plan = stratified_kfold(lm, 5, 42);
    plan.validate();
    CHECK(plan.n_folds == 5);

    std::vector<int> positives(5, 0), sizes(5, 0);
    for (std::size_t i = 0; i < 100; ++i) {
        sizes[static_cast<std::size_t>(plan.assignment[i])] += 1;
        if (lm.values(static_cast<Eigen::Index>(i), 0)) {
            positives[static_cast<std::size_t>(plan.assignment[i])] += 1;
        }
    }
    for (int f = 0; f < 5; ++f) {
        CHECK(std::abs(positives[static_cast<std::size_t>(f)] - 10) <= 1); // quota 50/5
        CHECK(std::abs(sizes[static_cast<std::size_t>(f)] - 20) <= 1);
    }
}

TEST_CASE("stratified_kfold degenerate shapes") {
    SUBCASE("k equal to n gives singleton folds") {
        const auto lm = single_label_matrix(6, 3);
        const FoldPlan plan = stratified_kfold(lm, 6, 0);
        const auto sizes = plan.fold_sizes();
        CHECK(std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 1; }));
    }
    SUBCASE("identical label sets balance fold sizes within 1") {
        LabelMatrix lm;
        lm.labels = {"L"};
        lm.values.setOnes(23, 1);
        const FoldPlan plan = stratified_kfold(lm, 4, 1);
        const auto sizes = plan.fold_sizes();
        CHECK(*std::max_element(sizes.begin(), sizes.end()) -
                  *std::min_element(sizes.begin(), sizes.end()) <=
              1);
    }
    SUBCASE("k out of range") {
        const auto lm = single_label_matrix(4, 2);
        CHECK_THROWS_AS(stratified_kfold(lm, 5, 0), std::invalid_argument);
        CHECK_THROWS_AS(stratified_kfold(lm, 1, 0), std::invalid_argument);
    }
}

TEST_CASE("stratified_kfold is deterministic under a seed") {
    const auto ds = generate(preset(SynthPreset::both));
    const auto lm = build_label_matrix(ds);
    const FoldPlan a = stratified_kfold(lm, 4, 7);
    const FoldPlan b = stratified_kfold(lm, 4, 7);
    const FoldPlan c = stratified_kfold(lm, 4, 8);
    CHECK(a.assignment == b.assignment);
    CHECK(a.assignment != c.assignment);
}

TEST_CASE("stratified_kfold keeps every label near quota on shifted multilabel data") {
    // k=5 quality bound: per-fold positive counts within ceil(1 + quota*0.1)
    SynthSpec spec = preset(SynthPreset::both);
    spec.records_per_source = 300; // 1500 records keeps the 100-seed loop quick
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        spec.seed = seed;
        const auto ds = generate(spec);
        const auto lm = build_label_matrix(ds);
        const FoldPlan plan = stratified_kfold(lm, 5, seed);
        for (Eigen::Index l = 0; l < lm.cols(); ++l) {
            const auto total = static_cast<double>(lm.positives(l));
            if (total < 50) continue;
            const double quota = total / 5.0;
            const double bound = std::ceil(1.0 + quota * 0.1);
            std::vector<double> per_fold(5, 0);
            for (Eigen::Index r = 0; r < lm.rows(); ++r) {
                if (lm.values(r, l)) {
                    per_fold[static_cast<std::size_t>(plan.assignment[static_cast<std::size_t>(r)])] += 1;
                }
            }
            for (const double p : per_fold) {
                CHECK(std::abs(p - quota) <= bound);
                ++checked;
            }
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("leave_source_out maps folds to sources") {
    const auto ds = tiny_sources({{"a", 10}, {"b", 1}, {"c", 5}, {"d", 3}});
    const FoldPlan plan = leave_source_out(ds);
    CHECK(plan.n_folds == 4);
    CHECK(plan.kind == SplitKind::leave_source_out);
    CHECK(plan.fold_source == std::vector<std::string>{"a", "b", "c", "d"});
    const auto sizes = plan.fold_sizes();
    CHECK(sizes == std::vector<std::size_t>{10, 1, 5, 3}); // imbalance preserved
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(plan.fold_source[static_cast<std::size_t>(plan.assignment[i])] ==
              ds.record(i).source_id);
    }
}

TEST_CASE("leave_source_out is invariant to record order") {
    const auto ds = tiny_sources({{"x", 4}, {"y", 6}});
    std::vector<Record> reversed(ds.records().rbegin(), ds.records().rend());
    const Dataset ds_rev(std::move(reversed), ds.label_space());

    const FoldPlan a = leave_source_out(ds);
    const FoldPlan b = leave_source_out(ds_rev);
    CHECK(a.fold_source == b.fold_source);
    CHECK(a.fold_sizes() == b.fold_sizes());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto source = ds.record(i).source_id;
        // the fold holding this record is the same fold in both plans
        CHECK(a.fold_source[static_cast<std::size_t>(a.assignment[i])] == source);
    }
}

TEST_CASE("leave_source_out rejects single-source data") {
    const auto ds = tiny_sources({{"only", 5}});
    CHECK_THROWS_AS(leave_source_out(ds), std::invalid_argument);
}

TEST_CASE("stratified_holdout splits per source") {
    const auto ds = tiny_sources({{"a", 100}, {"b", 200}});
    const FoldPlan plan = stratified_holdout(ds, 0.7, StratifyBy::source, 3);
    CHECK(plan.n_folds == 2);

    std::map<std::string, std::pair<int, int>> per_source;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto& [train, test] = per_source[ds.record(i).source_id];
        (plan.assignment[i] == 0 ? train : test) += 1;
    }
    CHECK(per_source["a"] == std::make_pair(70, 30));
    CHECK(per_source["b"] == std::make_pair(140, 60));
}

TEST_CASE("stratified_holdout edge cases") {
    SUBCASE("fraction 0.5 on two-record sources") {
        const auto ds = tiny_sources({{"a", 2}, {"b", 2}});
        const FoldPlan plan = stratified_holdout(ds, 0.5, StratifyBy::source, 1);
        const auto sizes = plan.fold_sizes();
        CHECK(sizes[0] == 2);
        CHECK(sizes[1] == 2);
    }
    SUBCASE("single-record source warns and goes to train") {
        const auto ds = tiny_sources({{"a", 1}, {"b", 10}});
        std::vector<std::string> warnings;
        const FoldPlan plan = stratified_holdout(ds, 0.7, StratifyBy::source, 1, &warnings);
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("'a'") != std::string::npos);
        CHECK(plan.assignment[0] == 0);
    }
    SUBCASE("same seed reproduces the plan") {
        const auto ds = tiny_sources({{"a", 50}, {"b", 50}});
        const FoldPlan p1 = stratified_holdout(ds, 0.7, StratifyBy::source, 9);
        const FoldPlan p2 = stratified_holdout(ds, 0.7, StratifyBy::source, 9);
        CHECK(p1.assignment == p2.assignment);
    }
    SUBCASE("invalid fraction") {
        const auto ds = tiny_sources({{"a", 4}});
        CHECK_THROWS_AS(stratified_holdout(ds, 0.0, StratifyBy::source, 0), std::invalid_argument);
        CHECK_THROWS_AS(stratified_holdout(ds, 1.0, StratifyBy::source, 0), std::invalid_argument);
    }
}

TEST_CASE("fold plans are partitions and serialize to csv") {
    const auto ds = tiny_sources({{"a", 9}, {"b", 7}});
    const auto lm = build_label_matrix(ds);
    for (const auto& plan : {stratified_kfold(lm, 4, 5), leave_source_out(ds),
                             stratified_holdout(ds, 0.6, StratifyBy::source, 5)}) {
        plan.validate();
        std::size_t covered = 0;
        for (int f = 0; f < plan.n_folds; ++f) covered += plan.fold_indices(f).size();
        CHECK(covered == ds.size());
    }

    oracles::TempDir tmp;
    const auto plan = leave_source_out(ds);
    save_fold_plan(ds, plan, tmp.path() / "folds.csv");
    const auto table = read_csv(tmp.path() / "folds.csv");
    CHECK(table.rows.size() == ds.size());
    CHECK(table.header == std::vector<std::string>{"record_id", "fold"});
}
