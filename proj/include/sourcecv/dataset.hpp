#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace sourcecv {

enum class Sex { male, female, unknown };

std::string to_string(Sex sex);
Sex sex_from_token(const std::string& token); // "M" / "F" / "U"

/// Reference to an on-disk signal payload: one CSV per record, one column per
/// lead, one row per sample. Lead order is fixed I, II, III, aVR, aVL, aVF,
/// V1..V6 for 12-lead files (convention; upstream sources do not state one).
struct SignalRef {
    std::filesystem::path path;
    double fs_hz = 0;
    int n_leads = 0;
};

/// In-memory feature payload. `source_path` is kept when the values were read
/// from a payload file, so manifests can be re-saved without copying data.
struct FeatureVector {
    std::vector<double> values;
    std::filesystem::path source_path;
};

using Payload = std::variant<SignalRef, FeatureVector>;

/// Ordered set of label codes with a code -> column index. Codes are opaque
/// strings; SNOMED CT integers-as-text and AHA compound codes ("50+346") both
/// occur before harmonization.
class LabelSpace {
public:
    LabelSpace() = default;
    explicit LabelSpace(std::vector<std::string> labels);

    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t size() const { return labels_.size(); }
    bool contains(const std::string& code) const { return index_.count(code) != 0; }
    int index_of(const std::string& code) const;
    std::optional<int> find(const std::string& code) const;

    bool operator==(const LabelSpace& other) const { return labels_ == other.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, int> index_;
};

struct Record {
    std::string record_id;
    std::string source_id;
    std::optional<double> age;  // years; absent = unknown
    Sex sex = Sex::unknown;
    std::set<std::string> labels;
    bool normal_flag = false;   // manifest "NORMAL" sentinel; never a label column
    std::optional<std::string> recorded_date; // opaque string, optional manifest column
    Payload payload;
};

/// Immutable collection of records plus the label space and a per-source count
/// registry. All splitters and experiment protocols consume this type. The
/// constructor validates the full invariant set; instances are safe to share
/// read-only across threads.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<Record> records, LabelSpace label_space);

    const std::vector<Record>& records() const { return records_; }
    const Record& record(std::size_t i) const { return records_[i]; }
    std::size_t size() const { return records_.size(); }
    const LabelSpace& label_space() const { return label_space_; }

    /// source_id -> record count, ordered by source_id.
    const std::map<std::string, std::size_t>& sources() const { return sources_; }
    std::vector<std::string> source_ids() const;

private:
    std::vector<Record> records_;
    LabelSpace label_space_;
    std::map<std::string, std::size_t> sources_;
};

/// Binary record-by-label indicator matrix aligned to a label space.
struct LabelMatrix {
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> values;
    std::vector<std::string> labels;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    Eigen::Index positives(Eigen::Index col) const;
    LabelMatrix select_rows(const std::vector<std::size_t>& idx) const;
};

/// Load a dataset from a manifest CSV. Columns: record_id, source_id, age
/// (blank = unknown), sex in {M,F,U}, labels (pipe-separated codes and/or the
/// NORMAL sentinel), payload_kind in {signal,features}, payload_path, fs_hz,
/// n_leads (both blank for features), plus an optional date column. Feature
/// payload files are read eagerly; signal files stay on disk as references.
/// Relative payload paths resolve against the manifest directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Write a manifest (and payload files for in-memory feature vectors, under
/// `payload_dir`, defaulting to "<manifest dir>/payloads"). Signal payloads
/// are written as path references only.
void save_manifest(const Dataset& ds, const std::filesystem::path& manifest_path,
                   std::filesystem::path payload_dir = {});

LabelMatrix build_label_matrix(const Dataset& ds);

/// New dataset whose label space is `keep` (original order preserved) with
/// record label sets intersected; no records are dropped.
Dataset restrict_labels(const Dataset& ds, const std::set<std::string>& keep);

/// Read a signal payload file: leads x samples.
std::vector<std::vector<double>> load_signal(const SignalRef& ref);

} // namespace sourcecv
