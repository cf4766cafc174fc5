#include "sourcecv/reference_tables.hpp"

#include <algorithm>
#include <stdexcept>

#include "sourcecv/csv.hpp"
#include "sourcecv/error.hpp"

namespace sourcecv {

const std::vector<std::string> kReferenceSourceIds = {"chapman_ningbo", "cpsc", "g12ec",
                                                      "ptb_ptbxl", "sph"};

namespace {

struct StudyRow {
    const char* diagnosis;
    const char* snomed;
    std::vector<const char*> aha_codes;
    long counts[5]; // chapman_ningbo, cpsc, g12ec, ptb_ptbxl, sph
    long total;
};

// Bundled study label set: SNOMED and AHA codes with per-source occurrence
// counts for the five-source corpus.
const std::vector<StudyRow>& study_rows() {
    static const std::vector<StudyRow> rows = {
        {"first degree AV block", "270492004", {"82"}, {1192, 828, 769, 1012, 238}, 4039},
        {"atrial fibrillation", "164889003", {"50", "50+346", "50+347"},
         {1780, 1374, 570, 1529, 675}, 5928},
        {"atrial flutter", "164890007", {"51"}, {8060, 54, 186, 74, 99}, 8473},
        {"incomplete right bundle branch block", "713426002", {"105"},
         {246, 86, 407, 1118, 1259}, 3116},
        {"left anterior fascicular block", "445118002", {"101"}, {380, 0, 180, 1626, 154}, 2340},
        {"left axis deviation", "39732003", {"121"}, {1545, 0, 940, 5146, 138}, 7769},
        {"left bundle branch block", "164909002", {"104"}, {240, 274, 231, 536, 84}, 1365},
        {"low QRS voltages", "251146004", {"125"}, {1043, 0, 374, 182, 322}, 1921},
        {"premature atrial contraction", "284470004",
         {"30", "30+308", "30+310", "30+340", "30+341", "30+349"},
         {1312, 689, 639, 398, 539}, 3577},
        {"right axis deviation", "47665007", {"120"}, {853, 1, 83, 343, 161}, 1441},
        {"right bundle branch block", "59118001", {"106"}, {649, 1858, 542, 0, 710}, 3759},
        {"sinus arrhythmia", "427393009", {"23"}, {2550, 11, 455, 772, 1553}, 5341},
        {"sinus bradycardia", "426177001", {"22"}, {16559, 45, 1677, 637, 2711}, 21629},
        {"sinus rhythm", "426783006", {}, {8125, 922, 1752, 18172, 16858}, 45829},
        {"sinus tachycardia", "427084000", {"21"}, {7255, 303, 1261, 827, 725}, 10371},
        {"T wave abnormal", "164934002", {"147"}, {7043, 22, 2306, 2345, 2042}, 13758},
        {"T wave inversion", "59931005", {"147+367"}, {2877, 5, 812, 294, 176}, 4164},
    };
    return rows;
}

constexpr const char* kProlongedPrSnomed = "164947007";
constexpr const char* kFirstDegreeAvBlock = "270492004";
constexpr const char* kProlongedPrNote =
    "prolonged PR interval folded into first degree AV block; code pairing requires confirmation";

} // namespace

MappingTable default_mapping_table() {
    MappingTable table;
    for (const auto& row : study_rows()) {
        for (const auto* aha : row.aha_codes) {
            std::string note = row.diagnosis;
            if (std::string(aha).find('+') != std::string::npos) {
                note += " (modifier variant collapsed)";
            }
            table.entries.push_back({aha, row.snomed, note});
        }
    }
    table.merge_rules.emplace_back(kProlongedPrSnomed, kFirstDegreeAvBlock);
    table.validate();
    return table;
}

MappingTable snomed_identity_table() {
    MappingTable table;
    for (const auto& row : study_rows()) {
        table.entries.push_back({row.snomed, row.snomed, row.diagnosis});
    }
    table.entries.push_back({kProlongedPrSnomed, kProlongedPrSnomed, kProlongedPrNote});
    table.merge_rules.emplace_back(kProlongedPrSnomed, kFirstDegreeAvBlock);
    table.validate();
    return table;
}

std::vector<std::string> study_label_codes() {
    std::vector<std::string> codes;
    codes.reserve(study_rows().size());
    for (const auto& row : study_rows()) codes.emplace_back(row.snomed);
    return codes;
}

std::string sinus_rhythm_code() { return "426783006"; }

long ReferenceCounts::count(const std::string& label, const std::string& source) const {
    const auto li = std::find(labels.begin(), labels.end(), label);
    const auto si = std::find(sources.begin(), sources.end(), source);
    if (li == labels.end() || si == sources.end()) {
        throw std::invalid_argument("reference counts: unknown label or source");
    }
    return counts[static_cast<std::size_t>(li - labels.begin())]
                 [static_cast<std::size_t>(si - sources.begin())];
}

ReferenceCounts reference_label_counts() {
    ReferenceCounts ref;
    ref.sources = kReferenceSourceIds;
    for (const auto& row : study_rows()) {
        ref.labels.emplace_back(row.snomed);
        ref.diagnoses.emplace_back(row.diagnosis);
        ref.counts.push_back({row.counts[0], row.counts[1], row.counts[2], row.counts[3],
                              row.counts[4]});
        ref.published_totals.push_back(row.total);
    }
    ref.source_record_totals = {{"chapman_ningbo", 43814},
                                {"cpsc", 6110},
                                {"g12ec", 8892},
                                {"ptb_ptbxl", 21348},
                                {"sph", 23274}};
    ref.total_records = 103438;
    return ref;
}

ReferenceDiff validate_against_reference(const Dataset& ds, const ReferenceCounts& ref) {
    const auto actual = count_labels_per_source(ds);
    ReferenceDiff diff;
    for (std::size_t li = 0; li < ref.labels.size(); ++li) {
        for (std::size_t si = 0; si < ref.sources.size(); ++si) {
            const auto& source = ref.sources[si];
            const auto src_it = actual.find(source);
            if (src_it == actual.end()) continue; // source not ingested; advisory only
            long n = 0;
            const auto lab_it = src_it->second.find(ref.labels[li]);
            if (lab_it != src_it->second.end()) n = static_cast<long>(lab_it->second);
            if (n != ref.counts[li][si]) {
                diff.mismatches.push_back({ref.labels[li], source, ref.counts[li][si], n});
            }
        }
    }
    return diff;
}

ReferenceCounts load_reference_counts(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const auto c_label = t.column("label_code");
    const auto c_diag = t.column("diagnosis");
    const auto c_total = t.column("total");

    ReferenceCounts ref;
    for (const auto& name : t.header) {
        if (name != "label_code" && name != "diagnosis" && name != "total") {
            ref.sources.push_back(name);
        }
    }
    for (const auto& row : t.rows) {
        ref.labels.push_back(row[c_label]);
        ref.diagnoses.push_back(row[c_diag]);
        std::vector<long> counts;
        for (const auto& source : ref.sources) {
            counts.push_back(parse_long(row[t.column(source)], path.string()));
        }
        ref.counts.push_back(std::move(counts));
        ref.published_totals.push_back(parse_long(row[c_total], path.string()));
    }
    return ref;
}

void save_reference_csvs(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    const MappingTable table = default_mapping_table();
    save_mapping_table(table, dir / "label_map_aha_snomed.csv", dir / "label_merges.csv");

    const ReferenceCounts ref = reference_label_counts();
    {
        std::vector<std::string> header = {"label_code", "diagnosis"};
        header.insert(header.end(), ref.sources.begin(), ref.sources.end());
        header.push_back("total");
        std::vector<std::vector<std::string>> rows;
        for (std::size_t li = 0; li < ref.labels.size(); ++li) {
            std::vector<std::string> row = {ref.labels[li], ref.diagnoses[li]};
            for (const long n : ref.counts[li]) row.push_back(std::to_string(n));
            row.push_back(std::to_string(ref.published_totals[li]));
            rows.push_back(std::move(row));
        }
        write_csv(dir / "reference_counts.csv", header, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& [source, n] : ref.source_record_totals) {
            rows.push_back({source, std::to_string(n)});
        }
        rows.push_back({"total", std::to_string(ref.total_records)});
        write_csv(dir / "source_totals.csv", {"source_id", "included_records"}, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        const auto& refc = reference_label_counts();
        for (std::size_t i = 0; i < refc.labels.size(); ++i) {
            rows.push_back({refc.labels[i], refc.diagnoses[i]});
        }
        write_csv(dir / "study_labels.csv", {"label_code", "diagnosis"}, rows);
    }
}

} // namespace sourcecv
