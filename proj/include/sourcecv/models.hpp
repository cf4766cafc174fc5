#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sourcecv/dataset.hpp"
#include "sourcecv/metrics.hpp"

namespace sourcecv {

struct TrainConfig {
    int max_iter = 2000;
    double tol = 1e-6;   // gradient-norm convergence threshold
    double l2 = 1e-4;    // lambda on the (lambda/2)*||w||^2 penalty; intercepts unpenalized
    std::uint64_t seed = 0;
};

/// Per-feature train-set mean/std, stored inside fitted models so prediction
/// is self-contained. Zero-variance features get std 1.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    static Standardizer fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

// Regularized losses and their analytic gradients, shared by the optimizer
// and by gradient-check tests. Loss = mean cross-entropy + (l2/2)*||w||^2.
double logistic_loss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& w, double b, double l2);
void logistic_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& w, double b, double l2,
                   Eigen::VectorXd& grad_w, double& grad_b);
double softmax_loss(const Eigen::MatrixXd& x, const std::vector<int>& y,
                    const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double l2);
void softmax_grad(const Eigen::MatrixXd& x, const std::vector<int>& y,
                  const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double l2,
                  Eigen::MatrixXd& grad_w, Eigen::VectorXd& grad_b);

struct BinaryLogistic {
    Eigen::VectorXd w;
    double b = 0;
    bool converged = false;
    int iterations = 0;

    double score(const Eigen::VectorXd& x) const; // sigmoid(w.x + b)
};

/// Damped-Newton fit of the regularized binary cross-entropy, run until the
/// gradient norm drops below cfg.tol or cfg.max_iter is reached. Inputs are
/// used as given (no standardization); throws on single-class targets.
BinaryLogistic fit_binary_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const TrainConfig& cfg);

/// Abstract multilabel scorer, the plug point for other classifier families.
class MultilabelClassifier {
public:
    virtual ~MultilabelClassifier() = default;
    virtual ScoreMatrix predict_scores(const Eigen::MatrixXd& x) const = 0;
    virtual const std::vector<std::string>& labels() const = 0;
};

/// One-vs-rest logistic regression over a fixed label space. Labels that are
/// single-class in the training slice are skipped and score a constant 0.
struct OvrModel : MultilabelClassifier {
    std::vector<std::string> label_codes;
    Standardizer standardizer;
    Eigen::MatrixXd weights;     // n_labels x d (zero rows for skipped labels)
    Eigen::VectorXd intercepts;  // n_labels
    std::vector<std::uint8_t> skipped;

    ScoreMatrix predict_scores(const Eigen::MatrixXd& x) const override;
    const std::vector<std::string>& labels() const override { return label_codes; }

    nlohmann::json to_json() const;
    static OvrModel from_json(const nlohmann::json& j);
};

OvrModel fit_ovr(const Eigen::MatrixXd& x, const LabelMatrix& lm, const TrainConfig& cfg);
ScoreMatrix predict_scores(const OvrModel& model, const Eigen::MatrixXd& x);

/// Multiclass softmax regression for source prediction.
struct SoftmaxModel {
    std::vector<std::string> classes;
    Standardizer standardizer;
    Eigen::MatrixXd weights;    // n_classes x d
    Eigen::VectorXd intercepts; // n_classes

    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const; // rows sum to 1
    std::vector<int> predict(const Eigen::MatrixXd& x) const;

    nlohmann::json to_json() const;
    static SoftmaxModel from_json(const nlohmann::json& j);
};

/// Newton fit of the L2-regularized multiclass cross-entropy. `class_of_row`
/// names each row's class; at least two distinct classes are required.
SoftmaxModel fit_softmax(const Eigen::MatrixXd& x, const std::vector<std::string>& class_of_row,
                         const TrainConfig& cfg);

struct GbdtConfig {
    int n_rounds = 100;
    int max_depth = 6;
    double learning_rate = 0.3;
    double reg_lambda = 1.0;
    double min_child_weight = 1.0;
    TrainConfig base; // seed carried for interface parity; trees are deterministic
};

/// Depth-limited regression-tree boosting on the logistic loss, one ensemble
/// per label. Zero rounds predict each label's base rate.
struct GbdtModel : MultilabelClassifier {
    struct Node {
        int feature = -1; // -1 = leaf
        double threshold = 0;
        int left = -1;
        int right = -1;
        double value = 0;
    };
    struct Tree {
        std::vector<Node> nodes;
        double eval(const Eigen::RowVectorXd& row) const;
    };
    struct LabelEnsemble {
        double base_logit = 0;
        std::vector<Tree> trees;
    };

    std::vector<std::string> label_codes;
    std::vector<LabelEnsemble> ensembles;
    std::vector<std::uint8_t> skipped;
    double learning_rate = 0.3;

    ScoreMatrix predict_scores(const Eigen::MatrixXd& x) const override;
    const std::vector<std::string>& labels() const override { return label_codes; }

    nlohmann::json to_json() const;
    static GbdtModel from_json(const nlohmann::json& j);
};

GbdtModel fit_gbdt(const Eigen::MatrixXd& x, const LabelMatrix& lm, const GbdtConfig& cfg);

enum class ModelKind { ovr_logistic, gbdt };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

std::unique_ptr<MultilabelClassifier> fit_classifier(ModelKind kind, const Eigen::MatrixXd& x,
                                                     const LabelMatrix& lm, const TrainConfig& cfg,
                                                     const GbdtConfig& gbdt_cfg = {});

} // namespace sourcecv
