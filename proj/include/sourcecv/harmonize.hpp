#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sourcecv/dataset.hpp"

namespace sourcecv {

/// Code-to-SNOMED mapping plus post-mapping merge rules (from_snomed ->
/// to_snomed). Input codes absent from the table are out-of-study labels and
/// are dropped (counted, not errored) during mapping.
struct MappingTable {
    struct Entry {
        std::string from_code; // AHA primary statement, optionally "+modifier"
        std::string to_snomed;
        std::string note;
    };
    std::vector<Entry> entries;
    std::vector<std::pair<std::string, std::string>> merge_rules;

    std::optional<std::string> map(const std::string& code) const;
    std::string apply_merges(const std::string& snomed) const;

    /// Checks entry uniqueness and that merge rules are acyclic (one pass is
    /// a fixed point). Throws DataError otherwise.
    void validate() const;
};

/// Entry CSV columns: aha_code, snomed_code, note. Merge rules live in a
/// second CSV with columns from_snomed, to_snomed, note.
MappingTable load_mapping_table(const std::filesystem::path& entries_csv,
                                const std::filesystem::path& merges_csv = {});
void save_mapping_table(const MappingTable& table, const std::filesystem::path& entries_csv,
                        const std::filesystem::path& merges_csv);

struct LabelMapReport {
    std::map<std::string, std::size_t> dropped; // unmapped code -> occurrences
    std::size_t mapped = 0;

    std::size_t dropped_total() const;
};

/// Map one record's codes: table lookup, then merge rules; unmapped codes are
/// dropped and tallied in `report` when given.
std::set<std::string> map_labels(const std::set<std::string>& codes, const MappingTable& table,
                                 LabelMapReport* report = nullptr);

/// Dataset-level mapping; the resulting label space is the set of mapped
/// codes in table order of first appearance.
std::pair<Dataset, LabelMapReport> map_dataset_labels(const Dataset& ds, const MappingTable& table);

/// Remove records with an empty label set unless they carry the normal flag.
std::pair<Dataset, std::size_t> drop_unlabeled(const Dataset& ds);

struct SelectionCriteria {
    int min_sources = 4;
    int min_count_per_source = 50;
    std::optional<std::set<std::string>> allowed_pool;
};

using SourceLabelCounts = std::map<std::string, std::map<std::string, std::size_t>>;

SourceLabelCounts count_labels_per_source(const Dataset& ds);

/// Labels present with >= min_count_per_source occurrences in >= min_sources
/// sources (and inside allowed_pool when one is set).
std::set<std::string> select_labels(const SourceLabelCounts& counts, const SelectionCriteria& crit);

/// Logistic model that predicts the sinus-rhythm label from the other
/// diagnosis indicators. `regularization` is the lambda on the
/// (lambda/2)*||w||^2 penalty added to the mean cross-entropy; the intercept
/// is unpenalized. The positive-call threshold applies to the sigmoid score.
struct ImputationModel {
    Eigen::VectorXd weights;
    double intercept = 0;
    double regularization = 0.01;
    double threshold = 0.5;
    std::vector<std::string> feature_labels;
    std::string target_label = "426783006"; // sinus rhythm

    double score(const Eigen::VectorXd& features) const;
};

/// Train the imputer on a label matrix that excludes the target column.
/// Throws on single-class targets or row-count mismatch.
ImputationModel fit_sr_imputer(const LabelMatrix& train_matrix,
                               const std::vector<std::uint8_t>& sr_targets, double lambda);

/// Add the target label to the dataset: normal-flagged records always get it;
/// the rest get it when the model score reaches the threshold. The dataset's
/// label space must equal the model's feature space.
Dataset impute_sr(const ImputationModel& model, const Dataset& ds);

struct DedupReport {
    std::size_t metadata_dup_records = 0; // records in metadata-identical groups of size >= 2
    std::size_t exact_dup_records = 0;    // of those, records whose payload bytes also match
    std::size_t removed = 0;              // exact duplicates dropped (first in manifest order kept)
};

/// Group records by identical (labels, normal flag, age, sex, source, sample
/// count, date when present); within a group, payload-identical records are
/// reduced to the first. Metadata-identical records with differing payloads
/// are retained and counted separately.
std::pair<Dataset, DedupReport> deduplicate(const Dataset& ds);

} // namespace sourcecv
