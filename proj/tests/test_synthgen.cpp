#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sourcecv/error.hpp"
#include "sourcecv/models.hpp"
#include "sourcecv/synthgen.hpp"

using namespace sourcecv;

namespace {

Eigen::MatrixXd payload_matrix(const Dataset& ds) {
    const auto& first = std::get<FeatureVector>(ds.record(0).payload);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(ds.size()),
                      static_cast<Eigen::Index>(first.values.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& fv = std::get<FeatureVector>(ds.record(i).payload);
        for (std::size_t j = 0; j < fv.values.size(); ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fv.values[j];
        }
    }
    return x;
}

} // namespace

TEST_CASE("generate is deterministic and order-stable under a seed") {
    SynthSpec spec = preset(SynthPreset::both);
    spec.records_per_source = 50;
    spec.seed = 9;
    const Dataset a = generate(spec);
    const Dataset b = generate(spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.record(i).record_id == b.record(i).record_id);
        CHECK(a.record(i).labels == b.record(i).labels);
        CHECK(std::get<FeatureVector>(a.record(i).payload).values ==
              std::get<FeatureVector>(b.record(i).payload).values);
    }
    spec.seed = 10;
    const Dataset c = generate(spec);
    bool any_difference = false;
    for (std::size_t i = 0; i < a.size() && !any_difference; ++i) {
        any_difference = std::get<FeatureVector>(a.record(i).payload).values !=
                         std::get<FeatureVector>(c.record(i).payload).values;
    }
    CHECK(any_difference);
}

TEST_CASE("explicit prevalence of 1 labels every record of that source") {
    SynthSpec spec;
    spec.n_sources = 2;
    spec.records_per_source = 40;
    spec.n_labels = 2;
    spec.n_features = 4;
    spec.prevalence = {{1.0, 0.0}, {0.5, 0.5}};
    const Dataset ds = generate(spec);
    for (std::size_t i = 0; i < 40; ++i) {
        CHECK(ds.record(i).labels.count("L00") == 1);
        CHECK(ds.record(i).labels.count("L01") == 0);
    }
}

TEST_CASE("empirical prevalence converges to the spec prevalence") {
    SynthSpec spec = preset(SynthPreset::label_shift);
    spec.seed = 123;
    const Dataset ds = generate(spec);

    // recover the sampled prevalences by regenerating with a known matrix is
    // not possible, so check against the no-shift base instead
    SynthSpec flat = preset(SynthPreset::no_shift);
    flat.seed = 123;
    const Dataset base = generate(flat);
    std::map<std::string, std::map<std::string, double>> freq;
    for (const auto& rec : base.records()) {
        for (const auto& code : rec.labels) freq[rec.source_id][code] += 1.0;
    }
    const double n = 2000;
    for (std::size_t l = 0; l < 8; ++l) {
        const double p = 0.10 + 0.35 * static_cast<double>(l) / 7.0;
        const double bound = 3.0 * std::sqrt(p * (1 - p) / n);
        for (const auto& [source, by_label] : freq) {
            std::string code = "L0" + std::to_string(l);
            const double observed = by_label.count(code) ? by_label.at(code) / n : 0.0;
            CHECK_MESSAGE(std::abs(observed - p) <= bound, source, " ", code);
        }
    }
    CHECK(ds.size() == base.size());
}

TEST_CASE("no-shift sources are statistically indistinguishable in the mean") {
    // Welch z-test per feature with a Bonferroni-style per-seed level of 0.01;
    // over 100 seeds the false-positive count should stay within twice the
    // expected rate (2 rejections).
    int rejections = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthSpec spec = preset(SynthPreset::no_shift);
        spec.records_per_source = 400;
        spec.n_sources = 2;
        spec.seed = seed;
        const Dataset ds = generate(spec);
        const Eigen::MatrixXd x = payload_matrix(ds);
        const auto n = static_cast<Eigen::Index>(spec.records_per_source);

        const double z_crit = 3.48; // two-sided 0.01 / 24 features per seed
        bool rejected = false;
        for (Eigen::Index f = 0; f < x.cols(); ++f) {
            const auto a = x.col(f).head(n);
            const auto b = x.col(f).tail(n);
            const double ma = a.mean(), mb = b.mean();
            const double va = (a.array() - ma).square().sum() / static_cast<double>(n - 1);
            const double vb = (b.array() - mb).square().sum() / static_cast<double>(n - 1);
            const double z = (ma - mb) / std::sqrt(va / static_cast<double>(n) +
                                                   vb / static_cast<double>(n));
            if (std::abs(z) > z_crit) rejected = true;
        }
        rejections += rejected;
    }
    CHECK(rejections <= 2);
}

TEST_CASE("strong covariate shift makes sources separable") {
    SynthSpec spec = preset(SynthPreset::no_shift);
    spec.delta_cov = 5.0; // 5x the unit noise
    spec.records_per_source = 300;
    spec.seed = 4;
    const Dataset ds = generate(spec);
    const Eigen::MatrixXd x = payload_matrix(ds);
    std::vector<std::string> sources;
    for (const auto& rec : ds.records()) sources.push_back(rec.source_id);

    // holdout: even rows train, odd rows test
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < ds.size(); ++i) (i % 2 ? test : train).push_back(i);
    Eigen::MatrixXd xtr(train.size(), x.cols()), xte(test.size(), x.cols());
    std::vector<std::string> ctr;
    std::vector<std::string> cte;
    for (std::size_t i = 0; i < train.size(); ++i) {
        xtr.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(train[i]));
        ctr.push_back(sources[train[i]]);
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        xte.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(test[i]));
        cte.push_back(sources[test[i]]);
    }
    const auto model = fit_softmax(xtr, ctr, {});
    const auto pred = model.predict(xte);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        hits += model.classes[static_cast<std::size_t>(pred[i])] == cte[i];
    }
    CHECK(static_cast<double>(hits) / static_cast<double>(test.size()) > 0.9);
}

TEST_CASE("presets are pure and pinned") {
    const SynthSpec a = preset(SynthPreset::both);
    const SynthSpec b = preset(SynthPreset::both);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.n_sources == 5);
    CHECK(a.records_per_source == 2000);
    CHECK(a.n_labels == 8);
    CHECK(a.n_features == 24);
    CHECK(a.delta_prior > 0);
    CHECK(a.delta_cov > 0);

    const SynthSpec flat = preset(SynthPreset::no_shift);
    CHECK(flat.delta_prior == 0.0);
    CHECK(flat.delta_cov == 0.0);

    CHECK_THROWS_AS(synth_preset_from_string("nope"), ConfigError);
}

TEST_CASE("spec json round trip and validation") {
    SynthSpec spec = preset(SynthPreset::covariate_shift);
    spec.seed = 77;
    spec.base_prevalence = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    const SynthSpec restored = SynthSpec::from_json(spec.to_json());
    CHECK(restored.to_json() == spec.to_json());

    SynthSpec bad = spec;
    bad.noise_std = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = spec;
    bad.prevalence = {{0.5}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero-label records carry the normal flag so manifests stay loadable") {
    SynthSpec spec;
    spec.n_sources = 1;
    spec.records_per_source = 60;
    spec.n_labels = 1;
    spec.n_features = 2;
    spec.prevalence = {{0.05}};
    spec.seed = 6;
    const Dataset ds = generate(spec);
    bool saw_empty = false;
    for (const auto& rec : ds.records()) {
        if (rec.labels.empty()) {
            saw_empty = true;
            CHECK(rec.normal_flag);
        }
    }
    CHECK(saw_empty);
}
