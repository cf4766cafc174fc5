#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sourcecv/dataset.hpp"

namespace sourcecv {

enum class SplitKind { stratified_kfold, leave_source_out, holdout };

std::string to_string(SplitKind kind);

/// A checked partition of record indices into folds. `fold_source` is filled
/// for leave-source-out plans (fold id -> source id). Construction paths call
/// validate(), so any plan handed out satisfies the partition property.
struct FoldPlan {
    int n_folds = 0;
    std::vector<int> assignment; // record index -> fold id
    SplitKind kind = SplitKind::stratified_kfold;
    std::vector<std::string> fold_source;
    std::uint64_t seed = 0;

    std::size_t size() const { return assignment.size(); }
    std::vector<std::size_t> fold_indices(int fold) const;
    std::vector<std::size_t> complement_indices(int fold) const; // the training side
    std::vector<std::size_t> fold_sizes() const;

    /// Partition property: assignment total, fold ids in range, disjoint cover.
    void validate() const;
};

/// Iterative multilabel stratification: repeatedly take the label with the
/// fewest remaining unassigned positives and deal its records to the fold
/// with the largest remaining quota for that label; ties break by largest
/// remaining fold capacity, then by a seeded uniform choice. Records without
/// labels are dealt last by remaining capacity.
FoldPlan stratified_kfold(const LabelMatrix& lm, int k, std::uint64_t seed);

/// One fold per source, deterministic (folds ordered by source id).
FoldPlan leave_source_out(const Dataset& ds);
FoldPlan leave_source_out(const std::vector<std::string>& source_of_record);

enum class StratifyBy { source };

/// Two-fold plan (fold 0 = train, fold 1 = test): within each source,
/// round(train_frac * n) seeded-shuffled records go to fold 0. Sources with a
/// single record go entirely to train and produce a warning.
FoldPlan stratified_holdout(const Dataset& ds, double train_frac, StratifyBy by,
                            std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

/// Audit export: record_id, fold.
void save_fold_plan(const Dataset& ds, const FoldPlan& plan, const std::filesystem::path& path);

} // namespace sourcecv
