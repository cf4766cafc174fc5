#include "sourcecv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sourcecv/csv.hpp"
#include "sourcecv/error.hpp"

namespace sourcecv {

std::string to_string(Sex sex) {
    switch (sex) {
    case Sex::male: return "M";
    case Sex::female: return "F";
    case Sex::unknown: return "U";
    }
    return "U";
}

Sex sex_from_token(const std::string& token) {
    if (token == "M") return Sex::male;
    if (token == "F") return Sex::female;
    if (token == "U" || token.empty()) return Sex::unknown;
    throw DataError("unknown sex token: '" + token + "'");
}

LabelSpace::LabelSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    index_.reserve(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        auto [it, inserted] = index_.emplace(labels_[i], static_cast<int>(i));
        if (!inserted) throw DataError("duplicate label code in label space: '" + labels_[i] + "'");
    }
}

int LabelSpace::index_of(const std::string& code) const {
    auto it = index_.find(code);
    if (it == index_.end()) throw DataError("label code not in label space: '" + code + "'");
    return it->second;
}

std::optional<int> LabelSpace::find(const std::string& code) const {
    auto it = index_.find(code);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Dataset::Dataset(std::vector<Record> records, LabelSpace label_space)
    : records_(std::move(records)), label_space_(std::move(label_space)) {
    std::set<std::string> seen_ids;
    for (const auto& rec : records_) {
        if (!seen_ids.insert(rec.record_id).second) {
            throw DataError("duplicate record_id: '" + rec.record_id + "'");
        }
        for (const auto& code : rec.labels) {
            if (!label_space_.contains(code)) {
                throw DataError("record '" + rec.record_id + "' carries label '" + code +
                                "' outside the label space");
            }
        }
        if (rec.age && (*rec.age < 0 || *rec.age > 130)) {
            throw DataError("record '" + rec.record_id + "' has out-of-range age " +
                            format_double(*rec.age));
        }
        if (const auto* sig = std::get_if<SignalRef>(&rec.payload)) {
            if (sig->fs_hz <= 0) {
                throw DataError("record '" + rec.record_id + "' has non-positive sampling frequency");
            }
            if (sig->n_leads < 1) {
                throw DataError("record '" + rec.record_id + "' has lead count < 1");
            }
        }
        sources_[rec.source_id] += 1;
    }
}

std::vector<std::string> Dataset::source_ids() const {
    std::vector<std::string> ids;
    ids.reserve(sources_.size());
    for (const auto& [id, count] : sources_) ids.push_back(id);
    return ids;
}

Eigen::Index LabelMatrix::positives(Eigen::Index col) const {
    Eigen::Index n = 0;
    for (Eigen::Index r = 0; r < values.rows(); ++r) n += values(r, col) != 0;
    return n;
}

LabelMatrix LabelMatrix::select_rows(const std::vector<std::size_t>& idx) const {
    LabelMatrix out;
    out.labels = labels;
    out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(idx[r]));
    }
    return out;
}

namespace {

std::vector<std::string> split_pipe(const std::string& cell) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream in(cell);
    while (std::getline(in, tok, '|')) out.push_back(tok);
    if (!cell.empty() && cell.back() == '|') out.emplace_back();
    return out;
}

std::filesystem::path resolve_payload_path(const std::filesystem::path& raw,
                                           const std::filesystem::path& base_dir) {
    if (raw.is_absolute()) return raw;
    return base_dir / raw;
}

std::vector<double> read_feature_payload(const std::filesystem::path& path) {
    const auto rows = read_csv_rows(path);
    if (rows.size() != 1) {
        throw DataError("feature payload must be a single row: " + path.string());
    }
    std::vector<double> values;
    values.reserve(rows[0].size());
    for (const auto& cell : rows[0]) {
        values.push_back(parse_double(cell, path.string()));
    }
    return values;
}

} // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    if (!std::filesystem::exists(manifest_path)) {
        throw DataError("manifest not found: " + manifest_path.string());
    }
    const CsvTable table = read_csv(manifest_path);
    const auto base_dir = manifest_path.parent_path();

    const std::size_t c_id = table.column("record_id");
    const std::size_t c_src = table.column("source_id");
    const std::size_t c_age = table.column("age");
    const std::size_t c_sex = table.column("sex");
    const std::size_t c_labels = table.column("labels");
    const std::size_t c_kind = table.column("payload_kind");
    const std::size_t c_path = table.column("payload_path");
    const std::size_t c_fs = table.column("fs_hz");
    const std::size_t c_leads = table.column("n_leads");
    const auto c_date = table.find_column("date");

    std::vector<Record> records;
    records.reserve(table.rows.size());
    std::vector<std::string> label_order;
    std::set<std::string> label_seen;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = manifest_path.string() + ": row " + std::to_string(r + 2);

        Record rec;
        rec.record_id = row[c_id];
        rec.source_id = row[c_src];
        if (rec.record_id.empty()) throw DataError(where + ": empty record_id");
        if (rec.source_id.empty()) throw DataError(where + ": empty source_id");

        if (!row[c_age].empty()) {
            const double age = parse_double(row[c_age], where + " (age)");
            if (age < 0) throw DataError(where + ": negative age " + row[c_age]);
            if (age > 130) throw DataError(where + ": age out of range " + row[c_age]);
            rec.age = age;
        }
        rec.sex = sex_from_token(row[c_sex]);

        for (const auto& tok : split_pipe(row[c_labels])) {
            if (tok == "NORMAL") {
                rec.normal_flag = true;
            } else if (tok.empty()) {
                throw DataError(where + ": unparseable label code in '" + row[c_labels] + "'");
            } else {
                rec.labels.insert(tok);
                if (label_seen.insert(tok).second) label_order.push_back(tok);
            }
        }
        if (rec.labels.empty() && !rec.normal_flag) {
            throw DataError(where + ": empty label column without NORMAL marker");
        }

        if (c_date && !row[*c_date].empty()) rec.recorded_date = row[*c_date];

        const std::string& kind = row[c_kind];
        if (kind == "signal") {
            SignalRef sig;
            sig.path = resolve_payload_path(row[c_path], base_dir);
            sig.fs_hz = parse_double(row[c_fs], where + " (fs_hz)");
            sig.n_leads = static_cast<int>(parse_long(row[c_leads], where + " (n_leads)"));
            if (sig.fs_hz <= 0) throw DataError(where + ": fs_hz must be > 0");
            if (sig.n_leads < 1) throw DataError(where + ": n_leads must be >= 1");
            rec.payload = std::move(sig);
        } else if (kind == "features") {
            if (!row[c_fs].empty() || !row[c_leads].empty()) {
                throw DataError(where + ": fs_hz/n_leads must be blank for feature payloads");
            }
            FeatureVector fv;
            fv.source_path = resolve_payload_path(row[c_path], base_dir);
            fv.values = read_feature_payload(fv.source_path);
            rec.payload = std::move(fv);
        } else {
            throw DataError(where + ": unknown payload_kind '" + kind + "'");
        }

        records.push_back(std::move(rec));
    }

    return Dataset(std::move(records), LabelSpace(std::move(label_order)));
}

void save_manifest(const Dataset& ds, const std::filesystem::path& manifest_path,
                   std::filesystem::path payload_dir) {
    const auto base_dir = manifest_path.parent_path();
    if (payload_dir.empty()) payload_dir = base_dir / "payloads";

    bool any_date = false;
    for (const auto& rec : ds.records()) any_date |= rec.recorded_date.has_value();

    std::vector<std::string> header = {"record_id", "source_id", "age",     "sex", "labels",
                                       "payload_kind", "payload_path", "fs_hz", "n_leads"};
    if (any_date) header.push_back("date");

    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.size());
    bool payload_dir_ready = false;

    for (const auto& rec : ds.records()) {
        std::vector<std::string> row(header.size());
        row[0] = rec.record_id;
        row[1] = rec.source_id;
        row[2] = rec.age ? format_double(*rec.age) : "";
        row[3] = to_string(rec.sex);

        std::string labels;
        for (const auto& code : rec.labels) {
            if (!labels.empty()) labels.push_back('|');
            labels += code;
        }
        if (rec.normal_flag) {
            if (!labels.empty()) labels.push_back('|');
            labels += "NORMAL";
        }
        row[4] = labels;

        if (const auto* sig = std::get_if<SignalRef>(&rec.payload)) {
            row[5] = "signal";
            row[6] = sig->path.string();
            row[7] = format_double(sig->fs_hz);
            row[8] = std::to_string(sig->n_leads);
        } else {
            const auto& fv = std::get<FeatureVector>(rec.payload);
            row[5] = "features";
            std::filesystem::path ppath = fv.source_path;
            if (ppath.empty()) {
                if (!payload_dir_ready) {
                    std::filesystem::create_directories(payload_dir);
                    payload_dir_ready = true;
                }
                ppath = payload_dir / (rec.record_id + ".csv");
                std::vector<std::string> cells;
                cells.reserve(fv.values.size());
                for (const double v : fv.values) cells.push_back(format_double(v));
                write_csv(ppath, cells, {});
            }
            // written relative to the manifest when possible, so the pair stays portable
            std::error_code ec;
            auto rel = std::filesystem::relative(ppath, base_dir.empty() ? "." : base_dir, ec);
            row[6] = (ec || rel.empty()) ? ppath.string() : rel.string();
            row[7] = "";
            row[8] = "";
        }
        if (any_date) row[9] = rec.recorded_date.value_or("");
        rows.push_back(std::move(row));
    }

    write_csv(manifest_path, header, rows);
}

LabelMatrix build_label_matrix(const Dataset& ds) {
    LabelMatrix lm;
    lm.labels = ds.label_space().labels();
    lm.values.setZero(static_cast<Eigen::Index>(ds.size()),
                      static_cast<Eigen::Index>(ds.label_space().size()));
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (const auto& code : ds.record(r).labels) {
            lm.values(static_cast<Eigen::Index>(r), ds.label_space().index_of(code)) = 1;
        }
    }
    return lm;
}

Dataset restrict_labels(const Dataset& ds, const std::set<std::string>& keep) {
    for (const auto& code : keep) {
        if (!ds.label_space().contains(code)) {
            throw DataError("restrict_labels: unknown label code '" + code + "'");
        }
    }
    std::vector<std::string> new_labels;
    for (const auto& code : ds.label_space().labels()) {
        if (keep.count(code)) new_labels.push_back(code);
    }
    std::vector<Record> records = ds.records();
    for (auto& rec : records) {
        std::set<std::string> kept;
        for (const auto& code : rec.labels) {
            if (keep.count(code)) kept.insert(code);
        }
        rec.labels = std::move(kept);
    }
    return Dataset(std::move(records), LabelSpace(std::move(new_labels)));
}

std::vector<std::vector<double>> load_signal(const SignalRef& ref) {
    const auto rows = read_csv_rows(ref.path);
    if (rows.empty()) throw DataError("empty signal file: " + ref.path.string());
    const std::size_t n_leads = rows[0].size();
    if (static_cast<int>(n_leads) != ref.n_leads) {
        throw DataError("signal file " + ref.path.string() + " has " + std::to_string(n_leads) +
                        " leads, manifest says " + std::to_string(ref.n_leads));
    }
    std::vector<std::vector<double>> leads(n_leads);
    for (auto& lead : leads) lead.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != n_leads) {
            throw DataError("signal file " + ref.path.string() + ": ragged row " +
                            std::to_string(r + 1));
        }
        for (std::size_t c = 0; c < n_leads; ++c) {
            leads[c].push_back(parse_double(rows[r][c], ref.path.string()));
        }
    }
    return leads;
}

} // namespace sourcecv
