#include "sourcecv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sourcecv {

int ScoreMatrix::column_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<int>(i);
    }
    throw std::invalid_argument("score matrix has no column for label '" + label + "'");
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
    const std::size_t n = scores.size();
    if (truth.size() != n) throw std::invalid_argument("roc_auc: size mismatch");

    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(scores[i])) throw std::invalid_argument("roc_auc: non-finite score");
        n_pos += truth[i] != 0;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw std::invalid_argument("roc_auc: truth vector is single-class");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tie runs; accumulate positive rank sum
    double rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) {
            if (truth[order[k]] != 0) rank_sum_pos += midrank;
        }
        i = j + 1;
    }

    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

int label_column(const LabelMatrix& lm, const std::string& label) {
    for (std::size_t i = 0; i < lm.labels.size(); ++i) {
        if (lm.labels[i] == label) return static_cast<int>(i);
    }
    throw std::invalid_argument("label matrix has no column for label '" + label + "'");
}

bool has_both_classes(const LabelMatrix& lm, int col) {
    bool pos = false, neg = false;
    for (Eigen::Index r = 0; r < lm.rows(); ++r) {
        (lm.values(r, col) != 0 ? pos : neg) = true;
        if (pos && neg) return true;
    }
    return false;
}

} // namespace

MacroAucDetail macro_auc_detail(const ScoreMatrix& sm, const LabelMatrix& lm,
                                const std::set<std::string>& valid) {
    if (sm.rows() != lm.rows()) throw std::invalid_argument("macro_auc: row count mismatch");
    MacroAucDetail out;
    double sum = 0;
    for (const auto& label : valid) {
        const int sc = sm.column_of(label);
        const int lc = label_column(lm, label);
        if (!has_both_classes(lm, lc)) {
            out.excluded.push_back(label);
            continue;
        }
        std::vector<double> s(static_cast<std::size_t>(lm.rows()));
        std::vector<std::uint8_t> t(static_cast<std::size_t>(lm.rows()));
        for (Eigen::Index r = 0; r < lm.rows(); ++r) {
            s[static_cast<std::size_t>(r)] = sm.values(r, sc);
            t[static_cast<std::size_t>(r)] = lm.values(r, lc);
        }
        const double auc = roc_auc(s, t);
        out.per_label.emplace_back(label, auc);
        sum += auc;
    }
    if (out.per_label.empty()) {
        throw std::invalid_argument("macro_auc: no valid label has both classes in the evaluation slice");
    }
    out.value = sum / static_cast<double>(out.per_label.size());
    return out;
}

double macro_auc(const ScoreMatrix& sm, const LabelMatrix& lm, const std::set<std::string>& valid) {
    return macro_auc_detail(sm, lm, valid).value;
}

double micro_auc(const ScoreMatrix& sm, const LabelMatrix& lm, const std::set<std::string>& valid) {
    if (sm.rows() != lm.rows()) throw std::invalid_argument("micro_auc: row count mismatch");
    if (valid.empty()) throw std::invalid_argument("micro_auc: empty valid label set");
    std::vector<double> s;
    std::vector<std::uint8_t> t;
    s.reserve(static_cast<std::size_t>(lm.rows()) * valid.size());
    t.reserve(s.capacity());
    for (const auto& label : valid) {
        const int sc = sm.column_of(label);
        const int lc = label_column(lm, label);
        for (Eigen::Index r = 0; r < lm.rows(); ++r) {
            s.push_back(sm.values(r, sc));
            t.push_back(lm.values(r, lc));
        }
    }
    return roc_auc(s, t); // throws when the pooled truth is single-class
}

ReliabilityReport reliability(const std::vector<ReliabilityPair>& pairs) {
    const std::size_t n = pairs.size();
    if (n < 2) throw std::invalid_argument("reliability: need at least 2 (cv, test) pairs");
    ReliabilityReport rep;
    rep.entries.reserve(n);
    double sum = 0;
    for (const auto& p : pairs) {
        const double e = p.cv_estimate - p.test_value;
        rep.entries.push_back({p.context_id, p.cv_estimate, p.test_value, e});
        sum += e;
    }
    rep.me = sum / static_cast<double>(n);
    double ss = 0;
    for (const auto& e : rep.entries) {
        const double d = e.signed_error - rep.me;
        ss += d * d;
    }
    rep.sd = std::sqrt(ss / static_cast<double>(n - 1));
    rep.rmse = std::sqrt(rep.me * rep.me + rep.sd * rep.sd);
    return rep;
}

ReliabilityReport reliability(const std::vector<std::pair<double, double>>& pairs) {
    std::vector<ReliabilityPair> named;
    named.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        named.push_back({std::to_string(i), pairs[i].first, pairs[i].second});
    }
    return reliability(named);
}

Confusion confusion_and_accuracy(std::span<const int> predicted, std::span<const int> truth,
                                 const std::vector<std::string>& classes) {
    if (predicted.size() != truth.size()) {
        throw std::invalid_argument("confusion_and_accuracy: size mismatch");
    }
    if (predicted.empty()) throw std::invalid_argument("confusion_and_accuracy: empty input");
    const int k = static_cast<int>(classes.size());
    Confusion c;
    c.classes = classes;
    c.counts.setZero(k, k);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k) {
            throw std::invalid_argument("confusion_and_accuracy: class id out of range");
        }
        c.counts(truth[i], predicted[i]) += 1;
    }
    c.accuracy = static_cast<double>(c.counts.trace()) / static_cast<double>(predicted.size());
    return c;
}

} // namespace sourcecv
