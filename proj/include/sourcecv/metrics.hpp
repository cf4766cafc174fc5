#pragma once

#include <Eigen/Core>

#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sourcecv/dataset.hpp"

namespace sourcecv {

/// Per-record, per-label real-valued classifier scores aligned to a label space.
struct ScoreMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> labels;

    Eigen::Index rows() const { return values.rows(); }
    int column_of(const std::string& label) const;
};

/// ROC-AUC as the Mann-Whitney statistic P(score+ > score-) + 0.5 P(tie),
/// computed by midrank sum. Throws std::invalid_argument when the truth
/// vector is single-class or a score is non-finite.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct MacroAucDetail {
    double value = 0;
    std::vector<std::pair<std::string, double>> per_label; // labels actually averaged
    std::vector<std::string> excluded;                     // valid labels lacking both classes here
};

/// Unweighted mean of per-label AUCs over `valid` labels that carry both
/// classes in the evaluation slice. `valid` is the caller's train/eval label
/// filter (labels with positives in both contexts).
MacroAucDetail macro_auc_detail(const ScoreMatrix& sm, const LabelMatrix& lm,
                                const std::set<std::string>& valid);
double macro_auc(const ScoreMatrix& sm, const LabelMatrix& lm, const std::set<std::string>& valid);

/// Pool all (score, truth) pairs of the valid labels into one binary problem.
double micro_auc(const ScoreMatrix& sm, const LabelMatrix& lm, const std::set<std::string>& valid);

struct ReliabilityPair {
    std::string context_id;
    double cv_estimate = 0;
    double test_value = 0;
};

/// Signed-error summary between CV estimates and test values:
/// e_i = cv_i - test_i, me = mean(e), sd = sample standard deviation (n-1),
/// rmse = sqrt(me^2 + sd^2).
struct ReliabilityReport {
    struct Entry {
        std::string context_id;
        double cv_estimate = 0;
        double test_value = 0;
        double signed_error = 0;
    };
    std::vector<Entry> entries;
    double me = 0;
    double sd = 0;
    double rmse = 0;
};

ReliabilityReport reliability(const std::vector<ReliabilityPair>& pairs);
ReliabilityReport reliability(const std::vector<std::pair<double, double>>& pairs);

struct Confusion {
    std::vector<std::string> classes;
    Eigen::MatrixXi counts; // row = truth, column = prediction
    double accuracy = 0;
};

Confusion confusion_and_accuracy(std::span<const int> predicted, std::span<const int> truth,
                                 const std::vector<std::string>& classes);

} // namespace sourcecv
