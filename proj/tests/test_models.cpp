#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sourcecv/metrics.hpp"
#include "sourcecv/models.hpp"
#include "sourcecv/rng.hpp"

using namespace sourcecv;

namespace {

struct Binary {
    Eigen::MatrixXd x;
    LabelMatrix lm;
};

// two separable blobs on a single label
Binary separable_set(std::size_t n_per_class, std::uint64_t seed) {
    Rng rng(seed);
    Binary data;
    data.x.resize(static_cast<Eigen::Index>(2 * n_per_class), 2);
    data.lm.labels = {"L"};
    data.lm.values.setZero(static_cast<Eigen::Index>(2 * n_per_class), 1);
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        const bool pos = i < n_per_class;
        data.x(static_cast<Eigen::Index>(i), 0) = (pos ? 3.0 : -3.0) + 0.3 * rng.normal();
        data.x(static_cast<Eigen::Index>(i), 1) = rng.normal();
        data.lm.values(static_cast<Eigen::Index>(i), 0) = pos;
    }
    return data;
}

std::vector<std::uint8_t> column(const LabelMatrix& lm, int c) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(lm.rows()));
    for (Eigen::Index r = 0; r < lm.rows(); ++r) out[static_cast<std::size_t>(r)] = lm.values(r, c);
    return out;
}

std::vector<double> score_column(const ScoreMatrix& sm, int c) {
    std::vector<double> out(static_cast<std::size_t>(sm.rows()));
    for (Eigen::Index r = 0; r < sm.rows(); ++r) out[static_cast<std::size_t>(r)] = sm.values(r, c);
    return out;
}

} // namespace

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(314);
    const Eigen::Index n = 40, d = 5;
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    std::vector<int> yc(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal();
        y(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        yc[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 2));
    }
    const double l2 = 0.05;
    const double h = 1e-6;

    for (int point = 0; point < 10; ++point) {
        SUBCASE("binary") {}
        Eigen::VectorXd w(d);
        for (Eigen::Index j = 0; j < d; ++j) w(j) = rng.normal();
        double b = rng.normal();

        Eigen::VectorXd gw;
        double gb;
        logistic_grad(x, y, w, b, l2, gw, gb);
        for (Eigen::Index j = 0; j < d; ++j) {
            Eigen::VectorXd wp = w, wm = w;
            wp(j) += h;
            wm(j) -= h;
            const double fd =
                (logistic_loss(x, y, wp, b, l2) - logistic_loss(x, y, wm, b, l2)) / (2 * h);
            CHECK(gw(j) == doctest::Approx(fd).epsilon(1e-5));
        }
        const double fdb =
            (logistic_loss(x, y, w, b + h, l2) - logistic_loss(x, y, w, b - h, l2)) / (2 * h);
        CHECK(gb == doctest::Approx(fdb).epsilon(1e-5));

        // softmax over 3 classes
        Eigen::MatrixXd sw(3, d);
        Eigen::VectorXd sb(3);
        for (Eigen::Index c = 0; c < 3; ++c) {
            for (Eigen::Index j = 0; j < d; ++j) sw(c, j) = rng.normal();
            sb(c) = rng.normal();
        }
        Eigen::MatrixXd sgw;
        Eigen::VectorXd sgb;
        softmax_grad(x, yc, sw, sb, l2, sgw, sgb);
        for (Eigen::Index c = 0; c < 3; ++c) {
            Eigen::MatrixXd wp = sw, wm = sw;
            wp(c, 0) += h;
            wm(c, 0) -= h;
            const double fd =
                (softmax_loss(x, yc, wp, sb, l2) - softmax_loss(x, yc, wm, sb, l2)) / (2 * h);
            CHECK(sgw(c, 0) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("fit_binary_logistic converges on a toy problem") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 0, 1, 0, 0, 1, 0, 1;
    Eigen::VectorXd y(4);
    y << 0, 0, 1, 1;
    TrainConfig cfg;
    cfg.tol = 1e-8;
    const auto model = fit_binary_logistic(x, y, cfg);
    CHECK(model.converged);
    CHECK(model.score(Eigen::Vector2d(0, 1)) > 0.5);
    CHECK(model.score(Eigen::Vector2d(1, 0)) < 0.5);

    CHECK_THROWS_AS(fit_binary_logistic(x, Eigen::VectorXd::Ones(4), cfg), std::invalid_argument);
}

TEST_CASE("fit_ovr reaches training AUC 1 on separable data") {
    const auto data = separable_set(50, 1);
    const auto model = fit_ovr(data.x, data.lm, {});
    const auto sm = model.predict_scores(data.x);
    CHECK(roc_auc(score_column(sm, 0), column(data.lm, 0)) == 1.0);
}

TEST_CASE("fit_ovr skips single-class labels and scores them 0") {
    auto data = separable_set(20, 2);
    LabelMatrix lm;
    lm.labels = {"L", "never"};
    lm.values.setZero(data.lm.rows(), 2);
    lm.values.col(0) = data.lm.values.col(0);
    const auto model = fit_ovr(data.x, lm, {});
    CHECK(model.skipped == std::vector<std::uint8_t>{0, 1});
    const auto sm = model.predict_scores(data.x);
    CHECK((sm.values.col(1).array() == 0.0).all());
}

TEST_CASE("large l2 drives per-label scores to the base rate") {
    const auto data = separable_set(40, 3);
    TrainConfig cfg;
    cfg.l2 = 1e7;
    cfg.tol = 1e-10;
    const auto model = fit_ovr(data.x, data.lm, cfg);
    const auto sm = model.predict_scores(data.x);
    for (Eigen::Index r = 0; r < sm.rows(); ++r) {
        CHECK(sm.values(r, 0) == doctest::Approx(0.5).epsilon(1e-3)); // base rate = 1/2
    }
}

TEST_CASE("predict_scores contract") {
    const auto data = separable_set(15, 4);
    const auto model = fit_ovr(data.x, data.lm, {});

    SUBCASE("zero weights and intercept score 0.5") {
        OvrModel zero = model;
        zero.weights.setZero();
        zero.intercepts.setZero();
        const auto sm = zero.predict_scores(data.x);
        CHECK((sm.values.array() == 0.5).all());
    }
    SUBCASE("sigmoid scores stay in (0,1) and respond monotonically") {
        Eigen::MatrixXd probe = Eigen::MatrixXd::Zero(2, 2);
        probe(1, 0) = 1.0; // bump the first feature
        const auto sm = model.predict_scores(probe);
        CHECK(sm.values(0, 0) > 0.0);
        CHECK(sm.values(0, 0) < 1.0);
        const bool weight_positive = model.weights(0, 0) > 0;
        CHECK((sm.values(1, 0) > sm.values(0, 0)) == weight_positive);
    }
    SUBCASE("empty input gives an empty score matrix") {
        const Eigen::MatrixXd empty(0, 2);
        CHECK(model.predict_scores(empty).rows() == 0);
    }
    SUBCASE("dimension mismatch throws") {
        const Eigen::MatrixXd wrong(1, 5);
        CHECK_THROWS_AS(model.predict_scores(wrong), std::invalid_argument);
    }
}

TEST_CASE("training is deterministic") {
    const auto data = separable_set(60, 5);
    const auto a = fit_ovr(data.x, data.lm, {});
    const auto b = fit_ovr(data.x, data.lm, {});
    CHECK(a.weights == b.weights);
    CHECK(a.intercepts == b.intercepts);
    const auto sa = a.predict_scores(data.x);
    const auto sb = b.predict_scores(data.x);
    CHECK(sa.values == sb.values); // bitwise
}

TEST_CASE("single-label ovr reduces to binary logistic regression") {
    const auto data = separable_set(30, 6);
    const auto ovr = fit_ovr(data.x, data.lm, {});

    const Standardizer st = Standardizer::fit(data.x);
    Eigen::VectorXd y = data.lm.values.col(0).cast<double>();
    const auto direct = fit_binary_logistic(st.apply(data.x), y, {});
    CHECK(ovr.weights.row(0).transpose().isApprox(direct.w, 1e-12));
    CHECK(ovr.intercepts(0) == doctest::Approx(direct.b).epsilon(1e-12));
}

TEST_CASE("ovr model json round trip") {
    const auto data = separable_set(25, 7);
    const auto model = fit_ovr(data.x, data.lm, {});
    const auto restored = OvrModel::from_json(model.to_json());
    const auto sa = model.predict_scores(data.x);
    const auto sb = restored.predict_scores(data.x);
    CHECK(sa.values == sb.values);
}

TEST_CASE("fit_softmax separates well-separated clouds") {
    Rng rng(11);
    const int n = 200;
    Eigen::MatrixXd x(2 * n, 2);
    std::vector<std::string> cls;
    for (int i = 0; i < 2 * n; ++i) {
        const bool second = i >= n;
        x(i, 0) = (second ? 4.0 : 0.0) + rng.normal(); // 4 sigma apart
        x(i, 1) = rng.normal();
        cls.push_back(second ? "b" : "a");
    }
    const auto model = fit_softmax(x, cls, {});

    Eigen::MatrixXd xt(2 * n, 2);
    std::vector<int> truth;
    for (int i = 0; i < 2 * n; ++i) {
        const bool second = i >= n;
        xt(i, 0) = (second ? 4.0 : 0.0) + rng.normal();
        xt(i, 1) = rng.normal();
        truth.push_back(second ? 1 : 0);
    }
    const auto pred = model.predict(xt);
    std::size_t hits = 0;
    for (int i = 0; i < 2 * n; ++i) hits += pred[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(i)];
    CHECK(static_cast<double>(hits) / (2.0 * n) > 0.95);

    const auto proba = model.predict_proba(xt);
    for (Eigen::Index r = 0; r < proba.rows(); ++r) {
        CHECK(proba.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("fit_softmax on identical class distributions tracks the majority share") {
    Rng rng(12);
    const int n = 900;
    Eigen::MatrixXd x(n, 3);
    std::vector<std::string> cls;
    int n_major = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
        const double u = rng.uniform();
        // priors 0.5 / 0.3 / 0.2, features carry no class signal
        const char* c = u < 0.5 ? "major" : (u < 0.8 ? "mid" : "minor");
        n_major += u < 0.5;
        cls.push_back(c);
    }
    const auto model = fit_softmax(x, cls, {});
    const auto pred = model.predict(x);
    std::size_t hits = 0;
    for (int i = 0; i < n; ++i) {
        hits += model.classes[static_cast<std::size_t>(pred[static_cast<std::size_t>(i)])] ==
                cls[static_cast<std::size_t>(i)];
    }
    const double acc = static_cast<double>(hits) / n;
    const double majority = static_cast<double>(n_major) / n;
    CHECK(std::abs(acc - majority) < 0.05);
}

TEST_CASE("fit_softmax requires two classes") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 2);
    CHECK_THROWS_AS(fit_softmax(x, std::vector<std::string>(5, "only"), {}),
                    std::invalid_argument);
}

TEST_CASE("gbdt learns xor that defeats a linear model") {
    Rng rng(21);
    const int n = 400;
    Eigen::MatrixXd x(n, 2);
    LabelMatrix lm;
    lm.labels = {"xor"};
    lm.values.resize(n, 1);
    for (int i = 0; i < n; ++i) {
        const bool a = rng.bernoulli(0.5), b = rng.bernoulli(0.5);
        x(i, 0) = (a ? 1.0 : 0.0) + 0.1 * rng.normal();
        x(i, 1) = (b ? 1.0 : 0.0) + 0.1 * rng.normal();
        lm.values(i, 0) = a != b;
    }
    GbdtConfig cfg;
    cfg.n_rounds = 30;
    const auto gbdt = fit_gbdt(x, lm, cfg);
    const auto sm = gbdt.predict_scores(x);
    CHECK(roc_auc(score_column(sm, 0), column(lm, 0)) > 0.9);

    const auto lr = fit_ovr(x, lm, {});
    const auto lr_sm = lr.predict_scores(x);
    CHECK(roc_auc(score_column(lr_sm, 0), column(lm, 0)) < 0.7); // xor is not linear
}

TEST_CASE("gbdt degenerate configurations") {
    const auto data = separable_set(30, 22);
    SUBCASE("zero rounds predicts the base rate") {
        GbdtConfig cfg;
        cfg.n_rounds = 0;
        const auto model = fit_gbdt(data.x, data.lm, cfg);
        const auto sm = model.predict_scores(data.x);
        CHECK((sm.values.col(0).array() - 0.5).abs().maxCoeff() < 1e-12);
    }
    SUBCASE("a single stump yields exactly two distinct scores") {
        GbdtConfig cfg;
        cfg.n_rounds = 1;
        cfg.max_depth = 1;
        const auto model = fit_gbdt(data.x, data.lm, cfg);
        const auto sm = model.predict_scores(data.x);
        std::set<double> distinct;
        for (Eigen::Index r = 0; r < sm.rows(); ++r) distinct.insert(sm.values(r, 0));
        CHECK(distinct.size() == 2);
    }
}

TEST_CASE("gbdt json round trip") {
    const auto data = separable_set(20, 23);
    GbdtConfig cfg;
    cfg.n_rounds = 5;
    cfg.max_depth = 3;
    const auto model = fit_gbdt(data.x, data.lm, cfg);
    const auto restored = GbdtModel::from_json(model.to_json());
    CHECK(model.predict_scores(data.x).values == restored.predict_scores(data.x).values);
}

TEST_CASE("softmax json round trip") {
    Rng rng(31);
    Eigen::MatrixXd x(40, 2);
    std::vector<std::string> cls;
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = rng.normal() + (i % 2 ? 2.0 : 0.0);
        x(i, 1) = rng.normal();
        cls.push_back(i % 2 ? "b" : "a");
    }
    const auto model = fit_softmax(x, cls, {});
    const auto restored = SoftmaxModel::from_json(model.to_json());
    CHECK(model.predict_proba(x) == restored.predict_proba(x));
}
