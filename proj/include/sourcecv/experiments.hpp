#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sourcecv/dataset.hpp"
#include "sourcecv/metrics.hpp"
#include "sourcecv/models.hpp"
#include "sourcecv/signal_prep.hpp"
#include "sourcecv/synthgen.hpp"

namespace sourcecv {

enum class Protocol { single_source, multi_source, source_prediction };

std::string to_string(Protocol protocol);
Protocol protocol_from_string(const std::string& name);

/// Feature assemblies for the source-prediction experiment; the first one is
/// also what the multilabel protocols train on.
enum class InputSet { features_demographics, features_demographics_labels, labels_only };

std::string to_string(InputSet input_set);
InputSet input_set_from_string(const std::string& name);

struct ExperimentConfig {
    Protocol protocol = Protocol::multi_source;
    std::filesystem::path manifest;      // exactly one of manifest / synthetic
    std::optional<SynthSpec> synthetic;

    ModelKind model_kind = ModelKind::ovr_logistic;
    TrainConfig train;
    GbdtConfig gbdt;
    PrepConfig prep;

    std::optional<int> k;   // folds; defaults: 5 (single_source), n_train_sources (multi_source)
    double train_frac = 0.7;
    std::vector<InputSet> input_sets = {InputSet::features_demographics,
                                        InputSet::features_demographics_labels,
                                        InputSet::labels_only};
    std::uint64_t seed = 0;
    std::filesystem::path outdir;

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
};

struct MetricValues {
    double macro = 0;
    double micro = 0;
};

struct CvMethodResult {
    MetricValues mean;                // unweighted average over folds
    std::vector<MetricValues> folds;
};

struct ContextResult {
    std::string context_id;
    std::string train_id;
    std::string test_id;
    std::map<std::string, CvMethodResult> cv; // method name -> estimate
    MetricValues test;
};

struct ReliabilityBlock {
    std::string group;  // train source (single_source) or "all" (multi_source)
    std::string method; // "stratified_kfold" / "leave_source_out"
    std::string metric; // "macro_auc" / "micro_auc"
    ReliabilityReport report;
};

struct SourcePredictionRun {
    std::string input_set;
    double accuracy = 0;
    double majority_baseline = 0;
    Confusion confusion;
};

/// Counters from the runtime split-hygiene assertions. A violation also
/// throws, so a finished run always reports violations == 0; `checks` proves
/// the assertions executed.
struct LeakageAudit {
    std::size_t checks = 0;
    std::size_t violations = 0;
};

struct ProtocolResult {
    std::string protocol;
    std::uint64_t seed = 0;
    nlohmann::json config_echo;
    std::vector<ContextResult> contexts;
    std::vector<ReliabilityBlock> reliability;
    std::vector<SourcePredictionRun> source_prediction;
    LeakageAudit leakage;

    nlohmann::json to_json() const;
    static ProtocolResult from_json(const nlohmann::json& j);
};

/// Load the manifest or generate the synthetic dataset named by the config.
Dataset realize_dataset(const ExperimentConfig& cfg);

/// Model-ready feature matrix. Feature payloads are used as stored; signal
/// payloads contribute the 20 lead-II features. Demographics append
/// (age_scaled, sex_numeric); label inputs append the indicator columns.
Eigen::MatrixXd assemble_features(const Dataset& ds, const PrepConfig& prep, InputSet input_set);

/// Labels with at least one positive in both slices; the per-context filter
/// applied before every AUC computation.
std::set<std::string> valid_labels(const LabelMatrix& train, const LabelMatrix& eval);

ProtocolResult run_single_source(const ExperimentConfig& cfg);
ProtocolResult run_multi_source(const ExperimentConfig& cfg);
ProtocolResult run_source_prediction(const ExperimentConfig& cfg);
ProtocolResult run_experiment(const ExperimentConfig& cfg);

/// Write results.json, reliability.csv, folds.csv and confusion.csv (where
/// applicable) into `outdir`. Bit-stable for a fixed config and seed.
void emit_reports(const ProtocolResult& result, const std::filesystem::path& outdir);

} // namespace sourcecv
