#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sourcecv/dataset.hpp"
#include "sourcecv/harmonize.hpp"

namespace sourcecv {

/// Canonical ids for the five ECG sources the bundled tables describe
/// (PhysioNet/CinC 2021 training sources plus the Shandong Provincial
/// Hospital database).
extern const std::vector<std::string> kReferenceSourceIds;

/// The bundled AHA -> SNOMED CT mapping for the study label set. Modifier
/// variants ("50+346", "30+308", ...) collapse onto their primary diagnosis;
/// the prolonged-PR merge rule folds SNOMED 164947007 into first degree AV
/// block (that code pairing is marked as requiring confirmation in its note).
MappingTable default_mapping_table();

/// Identity table over the study SNOMED codes for sources already labeled
/// with SNOMED CT, carrying the same merge rules.
MappingTable snomed_identity_table();

/// The 16 diagnoses plus sinus rhythm, in bundled-table row order.
std::vector<std::string> study_label_codes();
std::string sinus_rhythm_code();

/// Expected per-source occurrence counts for each study label, used as an
/// advisory ingestion sanity check against upstream data releases.
struct ReferenceCounts {
    std::vector<std::string> labels;       // row order
    std::vector<std::string> diagnoses;    // human-readable names, aligned to labels
    std::vector<std::string> sources;      // column order
    std::vector<std::vector<long>> counts; // labels x sources
    std::vector<long> published_totals;    // per label, as published
    std::map<std::string, long> source_record_totals;
    long total_records = 0;

    long count(const std::string& label, const std::string& source) const;
};

ReferenceCounts reference_label_counts();

struct ReferenceDiff {
    struct Row {
        std::string label;
        std::string source;
        long expected = 0;
        long actual = 0;
    };
    std::vector<Row> mismatches;
    bool empty() const { return mismatches.empty(); }
};

/// Advisory comparison of a harmonized dataset against the reference counts.
/// Sources absent from the dataset are skipped; mismatching (label, source)
/// cells are listed. Never throws on mismatch.
ReferenceDiff validate_against_reference(const Dataset& ds, const ReferenceCounts& ref);

ReferenceCounts load_reference_counts(const std::filesystem::path& path);

/// Write the bundled tables as CSV files (the versioned data directory
/// shipped with the repository is produced by this function).
void save_reference_csvs(const std::filesystem::path& dir);

} // namespace sourcecv
