#include "sourcecv/models.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sourcecv {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double log1pexp(double z) {
    if (z > 0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

constexpr double kProbEps = 1e-12;

} // namespace

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    const auto n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean();
    s.std.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double var = (x.col(c).array() - s.mean(c)).square().sum() / std::max(n, 1.0);
        const double sd = std::sqrt(var);
        s.std(c) = sd > 0 ? sd : 1.0;
    }
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size()) {
        throw std::invalid_argument("standardizer: feature dimension mismatch");
    }
    return (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

double logistic_loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& w, double b, double l2) {
    const auto n = x.rows();
    const Eigen::VectorXd z = (x * w).array() + b;
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        loss += log1pexp(z(i)) - y(i) * z(i);
    }
    return loss / static_cast<double>(n) + 0.5 * l2 * w.squaredNorm();
}

void logistic_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& w, double b, double l2,
                   Eigen::VectorXd& grad_w, double& grad_b) {
    const auto n = x.rows();
    Eigen::VectorXd p = (x * w).array() + b;
    for (Eigen::Index i = 0; i < n; ++i) p(i) = sigmoid(p(i));
    const Eigen::VectorXd r = (p - y) / static_cast<double>(n);
    grad_w = x.transpose() * r + l2 * w;
    grad_b = r.sum();
}

double BinaryLogistic::score(const Eigen::VectorXd& x) const { return sigmoid(w.dot(x) + b); }

BinaryLogistic fit_binary_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const TrainConfig& cfg) {
    const auto n = x.rows();
    const auto d = x.cols();
    if (n == 0) throw std::invalid_argument("fit_binary_logistic: no rows");
    if (d == 0) throw std::invalid_argument("fit_binary_logistic: no features");
    if (y.size() != n) throw std::invalid_argument("fit_binary_logistic: target size mismatch");
    const double pos = y.sum();
    if (pos <= 0 || pos >= static_cast<double>(n)) {
        throw std::invalid_argument("fit_binary_logistic: targets are single-class");
    }
    if (cfg.max_iter < 1) throw std::invalid_argument("fit_binary_logistic: max_iter must be >= 1");
    if (!(cfg.tol > 0)) throw std::invalid_argument("fit_binary_logistic: tol must be > 0");
    if (cfg.l2 < 0) throw std::invalid_argument("fit_binary_logistic: l2 must be >= 0");

    BinaryLogistic model;
    model.w = Eigen::VectorXd::Zero(d);
    model.b = 0;

    double loss = logistic_loss(x, y, model.w, model.b, cfg.l2);
    Eigen::VectorXd grad_w(d);
    double grad_b = 0;

    int iter = 0;
    for (; iter < cfg.max_iter; ++iter) {
        logistic_grad(x, y, model.w, model.b, cfg.l2, grad_w, grad_b);
        const double gnorm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
        model.iterations = iter;
        if (gnorm <= cfg.tol) {
            model.converged = true;
            return model;
        }

        // Newton direction on the augmented parameter [w; b]
        Eigen::VectorXd z = (x * model.w).array() + model.b;
        Eigen::VectorXd s(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = sigmoid(z(i));
            s(i) = std::max(p * (1.0 - p), kProbEps);
        }
        s /= static_cast<double>(n);

        Eigen::MatrixXd h(d + 1, d + 1);
        const Eigen::MatrixXd xs = x.array().colwise() * s.array();
        h.topLeftCorner(d, d) = x.transpose() * xs;
        h.topLeftCorner(d, d).diagonal().array() += cfg.l2;
        h.topRightCorner(d, 1) = xs.colwise().sum().transpose();
        h.bottomLeftCorner(1, d) = xs.colwise().sum();
        h(d, d) = s.sum();

        Eigen::VectorXd g(d + 1);
        g.head(d) = grad_w;
        g(d) = grad_b;

        Eigen::VectorXd step = h.ldlt().solve(-g);
        if (!step.allFinite()) step = -g; // fall back to a plain gradient step

        // Armijo backtracking
        double t = 1.0;
        const double slope = g.dot(step);
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Eigen::VectorXd w_new = model.w + t * step.head(d);
            const double b_new = model.b + t * step(d);
            const double loss_new = logistic_loss(x, y, w_new, b_new, cfg.l2);
            if (loss_new <= loss + 1e-4 * t * slope) {
                model.w = w_new;
                model.b = b_new;
                loss = loss_new;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break; // no descent possible at double precision
    }
    logistic_grad(x, y, model.w, model.b, cfg.l2, grad_w, grad_b);
    model.converged = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b) <= cfg.tol;
    model.iterations = iter;
    return model;
}

ScoreMatrix OvrModel::predict_scores(const Eigen::MatrixXd& x) const {
    if (x.cols() != standardizer.mean.size()) {
        throw std::invalid_argument("predict_scores: feature dimension mismatch");
    }
    const Eigen::MatrixXd xs = standardizer.apply(x);
    ScoreMatrix sm;
    sm.labels = label_codes;
    sm.values.resize(x.rows(), static_cast<Eigen::Index>(label_codes.size()));
    for (std::size_t l = 0; l < label_codes.size(); ++l) {
        const auto col = static_cast<Eigen::Index>(l);
        if (skipped[l]) {
            sm.values.col(col).setZero();
            continue;
        }
        const Eigen::VectorXd z = (xs * weights.row(col).transpose()).array() + intercepts(col);
        for (Eigen::Index r = 0; r < z.size(); ++r) sm.values(r, col) = sigmoid(z(r));
    }
    return sm;
}

OvrModel fit_ovr(const Eigen::MatrixXd& x, const LabelMatrix& lm, const TrainConfig& cfg) {
    if (x.rows() == 0) throw std::invalid_argument("fit_ovr: no rows");
    if (x.cols() == 0) throw std::invalid_argument("fit_ovr: no features");
    if (x.rows() != lm.rows()) throw std::invalid_argument("fit_ovr: label matrix row mismatch");

    OvrModel model;
    model.label_codes = lm.labels;
    model.standardizer = Standardizer::fit(x);
    const Eigen::MatrixXd xs = model.standardizer.apply(x);

    const auto n_labels = static_cast<std::size_t>(lm.cols());
    model.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_labels), x.cols());
    model.intercepts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_labels));
    model.skipped.assign(n_labels, 0);

    for (std::size_t l = 0; l < n_labels; ++l) {
        const auto col = static_cast<Eigen::Index>(l);
        const Eigen::VectorXd y = lm.values.col(col).cast<double>();
        const double pos = y.sum();
        if (pos <= 0 || pos >= static_cast<double>(y.size())) {
            model.skipped[l] = 1; // single-class in this training slice
            continue;
        }
        const BinaryLogistic fitted = fit_binary_logistic(xs, y, cfg);
        model.weights.row(col) = fitted.w.transpose();
        model.intercepts(col) = fitted.b;
    }
    return model;
}

ScoreMatrix predict_scores(const OvrModel& model, const Eigen::MatrixXd& x) {
    return model.predict_scores(x);
}

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

} // namespace

nlohmann::json OvrModel::to_json() const {
    return {{"schema_version", 1},
            {"kind", "ovr_logistic"},
            {"labels", label_codes},
            {"skipped", skipped},
            {"feature_mean", vector_to_json(standardizer.mean)},
            {"feature_std", vector_to_json(standardizer.std)},
            {"weights", matrix_to_json(weights)},
            {"intercepts", vector_to_json(intercepts)}};
}

OvrModel OvrModel::from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "ovr_logistic") {
        throw std::invalid_argument("model JSON is not an ovr_logistic model");
    }
    OvrModel m;
    m.label_codes = j.at("labels").get<std::vector<std::string>>();
    m.skipped = j.at("skipped").get<std::vector<std::uint8_t>>();
    m.standardizer.mean = vector_from_json(j.at("feature_mean"));
    m.standardizer.std = vector_from_json(j.at("feature_std"));
    m.weights = matrix_from_json(j.at("weights"));
    m.intercepts = vector_from_json(j.at("intercepts"));
    return m;
}

double softmax_loss(const Eigen::MatrixXd& x, const std::vector<int>& y,
                    const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double l2) {
    const auto n = x.rows();
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd z = w * x.row(i).transpose() + b;
        const double zmax = z.maxCoeff();
        const double lse = zmax + std::log((z.array() - zmax).exp().sum());
        loss += lse - z(y[static_cast<std::size_t>(i)]);
    }
    return loss / static_cast<double>(n) + 0.5 * l2 * w.squaredNorm();
}

void softmax_grad(const Eigen::MatrixXd& x, const std::vector<int>& y,
                  const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double l2,
                  Eigen::MatrixXd& grad_w, Eigen::VectorXd& grad_b) {
    const auto n = x.rows();
    const auto k = w.rows();
    grad_w = l2 * w;
    grad_b = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd z = w * x.row(i).transpose() + b;
        const double zmax = z.maxCoeff();
        Eigen::VectorXd p = (z.array() - zmax).exp();
        p /= p.sum();
        p(y[static_cast<std::size_t>(i)]) -= 1.0;
        p /= static_cast<double>(n);
        grad_w.noalias() += p * x.row(i);
        grad_b += p;
    }
}

Eigen::MatrixXd SoftmaxModel::predict_proba(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd xs = standardizer.apply(x);
    const auto k = weights.rows();
    Eigen::MatrixXd probs(x.rows(), k);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::VectorXd z = weights * xs.row(i).transpose() + intercepts;
        const double zmax = z.maxCoeff();
        Eigen::VectorXd p = (z.array() - zmax).exp();
        probs.row(i) = (p / p.sum()).transpose();
    }
    return probs;
}

std::vector<int> SoftmaxModel::predict(const Eigen::MatrixXd& x) const {
    const Eigen::MatrixXd probs = predict_proba(x);
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Eigen::Index best = 0;
        probs.row(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

SoftmaxModel fit_softmax(const Eigen::MatrixXd& x, const std::vector<std::string>& class_of_row,
                         const TrainConfig& cfg) {
    const auto n = x.rows();
    if (n == 0) throw std::invalid_argument("fit_softmax: no rows");
    if (class_of_row.size() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("fit_softmax: class list size mismatch");
    }

    SoftmaxModel model;
    {
        std::vector<std::string> classes = class_of_row;
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        model.classes = std::move(classes);
    }
    const auto k = static_cast<Eigen::Index>(model.classes.size());
    if (k < 2) throw std::invalid_argument("fit_softmax: fewer than 2 classes present");

    std::vector<int> y(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto it = std::lower_bound(model.classes.begin(), model.classes.end(), class_of_row[i]);
        y[i] = static_cast<int>(it - model.classes.begin());
    }

    model.standardizer = Standardizer::fit(x);
    const Eigen::MatrixXd xs = model.standardizer.apply(x);
    const auto d = xs.cols();

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    double loss = softmax_loss(xs, y, w, b, cfg.l2);

    const auto dim = k * (d + 1); // parameter order: class-major [w_c ; b_c]
    Eigen::MatrixXd grad_w;
    Eigen::VectorXd grad_b;

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        softmax_grad(xs, y, w, b, cfg.l2, grad_w, grad_b);
        const double gnorm = std::sqrt(grad_w.squaredNorm() + grad_b.squaredNorm());
        if (gnorm <= cfg.tol) break;

        // Full Newton system over all class blocks.
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
        {
            Eigen::MatrixXd probs(n, k);
            for (Eigen::Index i = 0; i < n; ++i) {
                Eigen::VectorXd z = w * xs.row(i).transpose() + b;
                const double zmax = z.maxCoeff();
                Eigen::VectorXd p = (z.array() - zmax).exp();
                probs.row(i) = (p / p.sum()).transpose();
            }
            Eigen::MatrixXd xa(n, d + 1);
            xa.leftCols(d) = xs;
            xa.col(d).setOnes();
            for (Eigen::Index c1 = 0; c1 < k; ++c1) {
                for (Eigen::Index c2 = c1; c2 < k; ++c2) {
                    Eigen::VectorXd a = -(probs.col(c1).array() * probs.col(c2).array());
                    if (c1 == c2) a += probs.col(c1);
                    a /= static_cast<double>(n);
                    const Eigen::MatrixXd block = xa.transpose() * a.asDiagonal() * xa;
                    h.block(c1 * (d + 1), c2 * (d + 1), d + 1, d + 1) = block;
                    if (c1 != c2) h.block(c2 * (d + 1), c1 * (d + 1), d + 1, d + 1) = block;
                }
            }
            for (Eigen::Index c = 0; c < k; ++c) {
                h.block(c * (d + 1), c * (d + 1), d, d).diagonal().array() += cfg.l2;
            }
            h.diagonal().array() += 1e-10; // softmax Hessian is singular along the shift direction
        }

        Eigen::VectorXd g(dim);
        for (Eigen::Index c = 0; c < k; ++c) {
            g.segment(c * (d + 1), d) = grad_w.row(c).transpose();
            g(c * (d + 1) + d) = grad_b(c);
        }
        Eigen::VectorXd step = h.ldlt().solve(-g);
        if (!step.allFinite()) step = -g;

        double t = 1.0;
        const double slope = g.dot(step);
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
            Eigen::MatrixXd w_new = w;
            Eigen::VectorXd b_new = b;
            for (Eigen::Index c = 0; c < k; ++c) {
                w_new.row(c) += t * step.segment(c * (d + 1), d).transpose();
                b_new(c) += t * step(c * (d + 1) + d);
            }
            const double loss_new = softmax_loss(xs, y, w_new, b_new, cfg.l2);
            if (loss_new <= loss + 1e-4 * t * slope) {
                w = std::move(w_new);
                b = std::move(b_new);
                loss = loss_new;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }

    model.weights = std::move(w);
    model.intercepts = std::move(b);
    return model;
}

nlohmann::json SoftmaxModel::to_json() const {
    return {{"schema_version", 1},
            {"kind", "softmax"},
            {"classes", classes},
            {"feature_mean", vector_to_json(standardizer.mean)},
            {"feature_std", vector_to_json(standardizer.std)},
            {"weights", matrix_to_json(weights)},
            {"intercepts", vector_to_json(intercepts)}};
}

SoftmaxModel SoftmaxModel::from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "softmax") {
        throw std::invalid_argument("model JSON is not a softmax model");
    }
    SoftmaxModel m;
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.standardizer.mean = vector_from_json(j.at("feature_mean"));
    m.standardizer.std = vector_from_json(j.at("feature_std"));
    m.weights = matrix_from_json(j.at("weights"));
    m.intercepts = vector_from_json(j.at("intercepts"));
    return m;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees
// ---------------------------------------------------------------------------

double GbdtModel::Tree::eval(const Eigen::RowVectorXd& row) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& nd = nodes[static_cast<std::size_t>(node)];
        node = row(nd.feature) < nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& grad;
    const Eigen::VectorXd& hess;
    const GbdtConfig& cfg;
    const std::vector<std::vector<int>>& sorted_by_feature; // row indices per feature
    std::vector<GbdtModel::Node> nodes;

    int build(std::vector<char>& in_node, std::size_t count, int depth) {
        double g_sum = 0, h_sum = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (!in_node[static_cast<std::size_t>(i)]) continue;
            g_sum += grad(i);
            h_sum += hess(i);
        }

        const auto make_leaf = [&] {
            GbdtModel::Node leaf;
            leaf.value = -g_sum / (h_sum + cfg.reg_lambda);
            nodes.push_back(leaf);
            return static_cast<int>(nodes.size()) - 1;
        };
        if (depth >= cfg.max_depth || count < 2) return make_leaf();

        const double parent_score = g_sum * g_sum / (h_sum + cfg.reg_lambda);
        double best_gain = 0;
        int best_feature = -1;
        double best_threshold = 0;

        for (Eigen::Index f = 0; f < x.cols(); ++f) {
            double gl = 0, hl = 0;
            double prev_value = 0;
            bool have_prev = false;
            const auto& order = sorted_by_feature[static_cast<std::size_t>(f)];
            for (const int row : order) {
                if (!in_node[static_cast<std::size_t>(row)]) continue;
                const double value = x(row, f);
                if (have_prev && value > prev_value && hl >= cfg.min_child_weight &&
                    (h_sum - hl) >= cfg.min_child_weight) {
                    const double gr = g_sum - gl;
                    const double hr = h_sum - hl;
                    const double gain = 0.5 * (gl * gl / (hl + cfg.reg_lambda) +
                                               gr * gr / (hr + cfg.reg_lambda) - parent_score);
                    if (gain > best_gain + 1e-12) {
                        best_gain = gain;
                        best_feature = static_cast<int>(f);
                        best_threshold = 0.5 * (prev_value + value);
                    }
                }
                gl += grad(row);
                hl += hess(row);
                prev_value = value;
                have_prev = true;
            }
        }

        if (best_feature < 0) return make_leaf();

        std::vector<char> left(in_node.size(), 0), right(in_node.size(), 0);
        std::size_t n_left = 0, n_right = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (!in_node[static_cast<std::size_t>(i)]) continue;
            if (x(i, best_feature) < best_threshold) {
                left[static_cast<std::size_t>(i)] = 1;
                ++n_left;
            } else {
                right[static_cast<std::size_t>(i)] = 1;
                ++n_right;
            }
        }

        GbdtModel::Node split;
        split.feature = best_feature;
        split.threshold = best_threshold;
        nodes.push_back(split);
        const int self = static_cast<int>(nodes.size()) - 1;
        nodes[static_cast<std::size_t>(self)].left = build(left, n_left, depth + 1);
        nodes[static_cast<std::size_t>(self)].right = build(right, n_right, depth + 1);
        return self;
    }
};

} // namespace

GbdtModel fit_gbdt(const Eigen::MatrixXd& x, const LabelMatrix& lm, const GbdtConfig& cfg) {
    if (x.rows() == 0) throw std::invalid_argument("fit_gbdt: no rows");
    if (x.cols() == 0) throw std::invalid_argument("fit_gbdt: no features");
    if (x.rows() != lm.rows()) throw std::invalid_argument("fit_gbdt: label matrix row mismatch");
    if (cfg.n_rounds < 0) throw std::invalid_argument("fit_gbdt: n_rounds must be >= 0");

    GbdtModel model;
    model.label_codes = lm.labels;
    model.learning_rate = cfg.learning_rate;
    const auto n_labels = static_cast<std::size_t>(lm.cols());
    model.skipped.assign(n_labels, 0);
    model.ensembles.resize(n_labels);

    std::vector<std::vector<int>> sorted_by_feature(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& order = sorted_by_feature[static_cast<std::size_t>(f)];
        order.resize(static_cast<std::size_t>(x.rows()));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return x(a, f) < x(b, f); });
    }

    const auto n = x.rows();
    for (std::size_t l = 0; l < n_labels; ++l) {
        const auto col = static_cast<Eigen::Index>(l);
        const Eigen::VectorXd y = lm.values.col(col).cast<double>();
        const double pos = y.sum();
        if (pos <= 0 || pos >= static_cast<double>(n)) {
            model.skipped[l] = 1;
            continue;
        }
        auto& ens = model.ensembles[l];
        const double prior = std::clamp(pos / static_cast<double>(n), kProbEps, 1.0 - kProbEps);
        ens.base_logit = std::log(prior / (1.0 - prior));

        Eigen::VectorXd margin = Eigen::VectorXd::Constant(n, ens.base_logit);
        for (int round = 0; round < cfg.n_rounds; ++round) {
            Eigen::VectorXd grad(n), hess(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double p = sigmoid(margin(i));
                grad(i) = p - y(i);
                hess(i) = std::max(p * (1.0 - p), kProbEps);
            }
            TreeBuilder builder{x, grad, hess, cfg, sorted_by_feature, {}};
            std::vector<char> all(static_cast<std::size_t>(n), 1);
            builder.build(all, static_cast<std::size_t>(n), 0);

            GbdtModel::Tree tree{std::move(builder.nodes)};
            for (Eigen::Index i = 0; i < n; ++i) {
                margin(i) += cfg.learning_rate * tree.eval(x.row(i));
            }
            ens.trees.push_back(std::move(tree));
        }
    }
    return model;
}

ScoreMatrix GbdtModel::predict_scores(const Eigen::MatrixXd& x) const {
    ScoreMatrix sm;
    sm.labels = label_codes;
    sm.values.resize(x.rows(), static_cast<Eigen::Index>(label_codes.size()));
    for (std::size_t l = 0; l < label_codes.size(); ++l) {
        const auto col = static_cast<Eigen::Index>(l);
        if (skipped[l]) {
            sm.values.col(col).setZero();
            continue;
        }
        const auto& ens = ensembles[l];
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            double margin = ens.base_logit;
            for (const auto& tree : ens.trees) margin += learning_rate * tree.eval(x.row(r));
            sm.values(r, col) = sigmoid(margin);
        }
    }
    return sm;
}

nlohmann::json GbdtModel::to_json() const {
    nlohmann::json ens = nlohmann::json::array();
    for (const auto& e : ensembles) {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : e.trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& nd : t.nodes) {
                nodes.push_back({{"f", nd.feature},
                                 {"t", nd.threshold},
                                 {"l", nd.left},
                                 {"r", nd.right},
                                 {"v", nd.value}});
            }
            trees.push_back(std::move(nodes));
        }
        ens.push_back({{"base_logit", e.base_logit}, {"trees", std::move(trees)}});
    }
    return {{"schema_version", 1},
            {"kind", "gbdt"},
            {"labels", label_codes},
            {"skipped", skipped},
            {"learning_rate", learning_rate},
            {"ensembles", std::move(ens)}};
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "gbdt") {
        throw std::invalid_argument("model JSON is not a gbdt model");
    }
    GbdtModel m;
    m.label_codes = j.at("labels").get<std::vector<std::string>>();
    m.skipped = j.at("skipped").get<std::vector<std::uint8_t>>();
    m.learning_rate = j.at("learning_rate").get<double>();
    for (const auto& e : j.at("ensembles")) {
        LabelEnsemble ens;
        ens.base_logit = e.at("base_logit").get<double>();
        for (const auto& t : e.at("trees")) {
            Tree tree;
            for (const auto& nd : t) {
                Node node;
                node.feature = nd.at("f").get<int>();
                node.threshold = nd.at("t").get<double>();
                node.left = nd.at("l").get<int>();
                node.right = nd.at("r").get<int>();
                node.value = nd.at("v").get<double>();
                tree.nodes.push_back(node);
            }
            ens.trees.push_back(std::move(tree));
        }
        m.ensembles.push_back(std::move(ens));
    }
    return m;
}

std::string to_string(ModelKind kind) {
    return kind == ModelKind::ovr_logistic ? "ovr_logistic" : "gbdt";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "ovr_logistic") return ModelKind::ovr_logistic;
    if (name == "gbdt") return ModelKind::gbdt;
    throw std::invalid_argument("unknown model kind: '" + name + "'");
}

std::unique_ptr<MultilabelClassifier> fit_classifier(ModelKind kind, const Eigen::MatrixXd& x,
                                                     const LabelMatrix& lm, const TrainConfig& cfg,
                                                     const GbdtConfig& gbdt_cfg) {
    if (kind == ModelKind::ovr_logistic) {
        return std::make_unique<OvrModel>(fit_ovr(x, lm, cfg));
    }
    GbdtConfig gc = gbdt_cfg;
    gc.base = cfg;
    return std::make_unique<GbdtModel>(fit_gbdt(x, lm, gc));
}

} // namespace sourcecv
