#include "sourcecv/harmonize.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "sourcecv/csv.hpp"
#include "sourcecv/error.hpp"
#include "sourcecv/models.hpp"

namespace sourcecv {

std::optional<std::string> MappingTable::map(const std::string& code) const {
    for (const auto& e : entries) {
        if (e.from_code == code) return e.to_snomed;
    }
    return std::nullopt;
}

std::string MappingTable::apply_merges(const std::string& snomed) const {
    for (const auto& [from, to] : merge_rules) {
        if (from == snomed) return to;
    }
    return snomed;
}

void MappingTable::validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.from_code).second) {
            throw DataError("mapping table: duplicate source code '" + e.from_code + "'");
        }
    }
    std::set<std::string> merge_from;
    for (const auto& [from, to] : merge_rules) {
        if (!merge_from.insert(from).second) {
            throw DataError("mapping table: duplicate merge rule for '" + from + "'");
        }
    }
    for (const auto& [from, to] : merge_rules) {
        // one pass must be a fixed point: a merge target may not itself merge
        if (merge_from.count(to)) {
            throw DataError("mapping table: chained merge rule '" + from + "' -> '" + to + "'");
        }
        if (from == to) throw DataError("mapping table: self merge rule '" + from + "'");
    }
}

MappingTable load_mapping_table(const std::filesystem::path& entries_csv,
                                const std::filesystem::path& merges_csv) {
    MappingTable table;
    {
        const CsvTable t = read_csv(entries_csv);
        const auto c_from = t.column("aha_code");
        const auto c_to = t.column("snomed_code");
        const auto c_note = t.column("note");
        for (const auto& row : t.rows) {
            table.entries.push_back({row[c_from], row[c_to], row[c_note]});
        }
    }
    if (!merges_csv.empty()) {
        const CsvTable t = read_csv(merges_csv);
        const auto c_from = t.column("from_snomed");
        const auto c_to = t.column("to_snomed");
        for (const auto& row : t.rows) {
            table.merge_rules.emplace_back(row[c_from], row[c_to]);
        }
    }
    table.validate();
    return table;
}

void save_mapping_table(const MappingTable& table, const std::filesystem::path& entries_csv,
                        const std::filesystem::path& merges_csv) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : table.entries) rows.push_back({e.from_code, e.to_snomed, e.note});
    write_csv(entries_csv, {"aha_code", "snomed_code", "note"}, rows);

    rows.clear();
    for (const auto& [from, to] : table.merge_rules) rows.push_back({from, to, ""});
    write_csv(merges_csv, {"from_snomed", "to_snomed", "note"}, rows);
}

std::size_t LabelMapReport::dropped_total() const {
    std::size_t total = 0;
    for (const auto& [code, n] : dropped) total += n;
    return total;
}

std::set<std::string> map_labels(const std::set<std::string>& codes, const MappingTable& table,
                                 LabelMapReport* report) {
    std::set<std::string> out;
    for (const auto& code : codes) {
        if (auto snomed = table.map(code)) {
            out.insert(table.apply_merges(*snomed));
            if (report) report->mapped += 1;
        } else if (report) {
            report->dropped[code] += 1;
        }
    }
    return out;
}

std::pair<Dataset, LabelMapReport> map_dataset_labels(const Dataset& ds, const MappingTable& table) {
    LabelMapReport report;
    std::vector<Record> records = ds.records();
    std::vector<std::string> label_order;
    std::set<std::string> label_seen;
    for (auto& rec : records) {
        rec.labels = map_labels(rec.labels, table, &report);
        for (const auto& code : rec.labels) {
            if (label_seen.insert(code).second) label_order.push_back(code);
        }
    }
    return {Dataset(std::move(records), LabelSpace(std::move(label_order))), std::move(report)};
}

std::pair<Dataset, std::size_t> drop_unlabeled(const Dataset& ds) {
    std::vector<Record> kept;
    kept.reserve(ds.size());
    std::size_t removed = 0;
    for (const auto& rec : ds.records()) {
        if (rec.labels.empty() && !rec.normal_flag) {
            ++removed;
        } else {
            kept.push_back(rec);
        }
    }
    return {Dataset(std::move(kept), ds.label_space()), removed};
}

SourceLabelCounts count_labels_per_source(const Dataset& ds) {
    SourceLabelCounts counts;
    for (const auto& [source, n] : ds.sources()) counts[source]; // every source appears
    for (const auto& rec : ds.records()) {
        for (const auto& code : rec.labels) counts[rec.source_id][code] += 1;
    }
    return counts;
}

std::set<std::string> select_labels(const SourceLabelCounts& counts, const SelectionCriteria& crit) {
    if (crit.min_sources < 1) throw std::invalid_argument("select_labels: min_sources must be >= 1");
    if (crit.min_count_per_source < 0) {
        throw std::invalid_argument("select_labels: min_count_per_source must be >= 0");
    }
    std::map<std::string, int> qualifying_sources;
    for (const auto& [source, by_label] : counts) {
        if (crit.min_count_per_source == 0) {
            // a zero threshold counts bare presence in the source
            for (const auto& [label, n] : by_label) {
                if (n > 0) qualifying_sources[label] += 1;
            }
            continue;
        }
        for (const auto& [label, n] : by_label) {
            if (n >= static_cast<std::size_t>(crit.min_count_per_source)) {
                qualifying_sources[label] += 1;
            }
        }
    }
    std::set<std::string> selected;
    for (const auto& [label, n_sources] : qualifying_sources) {
        if (n_sources < crit.min_sources) continue;
        if (crit.allowed_pool && !crit.allowed_pool->count(label)) continue;
        selected.insert(label);
    }
    return selected;
}

double ImputationModel::score(const Eigen::VectorXd& features) const {
    if (features.size() != weights.size()) {
        throw std::invalid_argument("imputation model: feature dimension mismatch");
    }
    const double z = weights.dot(features) + intercept;
    return 1.0 / (1.0 + std::exp(-z));
}

ImputationModel fit_sr_imputer(const LabelMatrix& train_matrix,
                               const std::vector<std::uint8_t>& sr_targets, double lambda) {
    if (static_cast<std::size_t>(train_matrix.rows()) != sr_targets.size()) {
        throw std::invalid_argument("fit_sr_imputer: target length does not match matrix rows");
    }
    bool any_pos = false, any_neg = false;
    for (const auto t : sr_targets) (t ? any_pos : any_neg) = true;
    if (!any_pos || !any_neg) {
        throw std::invalid_argument("fit_sr_imputer: targets are single-class");
    }

    const Eigen::MatrixXd x = train_matrix.values.cast<double>();
    Eigen::VectorXd y(train_matrix.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = sr_targets[static_cast<std::size_t>(i)];

    TrainConfig cfg;
    cfg.max_iter = 2000;
    cfg.tol = 1e-8;
    cfg.l2 = lambda;
    const BinaryLogistic fitted = fit_binary_logistic(x, y, cfg);

    ImputationModel model;
    model.weights = fitted.w;
    model.intercept = fitted.b;
    model.regularization = lambda;
    model.feature_labels = train_matrix.labels;
    return model;
}

Dataset impute_sr(const ImputationModel& model, const Dataset& ds) {
    if (ds.label_space().labels() != model.feature_labels) {
        throw std::invalid_argument("impute_sr: dataset label space does not match the model's features");
    }
    if (ds.label_space().contains(model.target_label)) {
        throw std::invalid_argument("impute_sr: dataset already carries label '" + model.target_label + "'");
    }

    std::vector<Record> records = ds.records();
    for (auto& rec : records) {
        if (rec.normal_flag) {
            rec.labels.insert(model.target_label); // default positive, never imputed away
            continue;
        }
        Eigen::VectorXd features = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.feature_labels.size()));
        for (const auto& code : rec.labels) {
            features(ds.label_space().index_of(code)) = 1.0;
        }
        if (model.score(features) >= model.threshold) rec.labels.insert(model.target_label);
    }

    std::vector<std::string> labels = ds.label_space().labels();
    labels.push_back(model.target_label);
    return Dataset(std::move(records), LabelSpace(std::move(labels)));
}

namespace {

std::string metadata_key(const Record& rec) {
    std::ostringstream key;
    key << rec.source_id << '\x1f';
    key << (rec.age ? format_double(*rec.age) : "?") << '\x1f';
    key << to_string(rec.sex) << '\x1f';
    key << (rec.normal_flag ? "N" : "-") << '\x1f';
    key << rec.recorded_date.value_or("") << '\x1f';
    for (const auto& code : rec.labels) key << code << '|';
    return key.str();
}

// payload identity: byte content for signal files, exact values for features
std::string payload_bytes(const Record& rec) {
    if (const auto* sig = std::get_if<SignalRef>(&rec.payload)) {
        std::ifstream in(sig->path, std::ios::binary);
        if (!in) throw DataError("deduplicate: cannot read signal file " + sig->path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }
    const auto& fv = std::get<FeatureVector>(rec.payload);
    std::string bytes(reinterpret_cast<const char*>(fv.values.data()),
                      fv.values.size() * sizeof(double));
    return bytes;
}

std::size_t payload_sample_count(const Record& rec) {
    if (const auto* sig = std::get_if<SignalRef>(&rec.payload)) {
        return load_signal(*sig).at(0).size();
    }
    return std::get<FeatureVector>(rec.payload).values.size();
}

} // namespace

std::pair<Dataset, DedupReport> deduplicate(const Dataset& ds) {
    DedupReport report;

    // group by metadata without the sample count first, so payload files are
    // only opened for actual duplicate candidates
    std::map<std::string, std::vector<std::size_t>> coarse;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        coarse[metadata_key(ds.record(i))].push_back(i);
    }

    std::vector<char> drop(ds.size(), 0);
    for (const auto& [key, members] : coarse) {
        if (members.size() < 2) continue;

        std::map<std::size_t, std::vector<std::size_t>> by_samples;
        for (const auto idx : members) {
            by_samples[payload_sample_count(ds.record(idx))].push_back(idx);
        }
        for (const auto& [n_samples, group] : by_samples) {
            if (group.size() < 2) continue;
            report.metadata_dup_records += group.size();

            std::map<std::string, std::vector<std::size_t>> by_bytes;
            for (const auto idx : group) {
                by_bytes[payload_bytes(ds.record(idx))].push_back(idx);
            }
            for (const auto& [bytes, exact] : by_bytes) {
                if (exact.size() < 2) continue;
                report.exact_dup_records += exact.size();
                for (std::size_t k = 1; k < exact.size(); ++k) {
                    drop[exact[k]] = 1; // keep the first in manifest order
                    report.removed += 1;
                }
            }
        }
    }

    std::vector<Record> kept;
    kept.reserve(ds.size() - report.removed);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!drop[i]) kept.push_back(ds.record(i));
    }
    return {Dataset(std::move(kept), ds.label_space()), report};
}

} // namespace sourcecv
