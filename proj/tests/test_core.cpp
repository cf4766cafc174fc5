#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "sourcecv/csv.hpp"
#include "sourcecv/dataset.hpp"
#include "sourcecv/error.hpp"
#include "sourcecv/rng.hpp"

using namespace sourcecv;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

const char* kManifest =
    "record_id,source_id,age,sex,labels,payload_kind,payload_path,fs_hz,n_leads\n"
    "r1,A,63,M,x|y,features,r1.csv,,\n"
    "r2,A,,F,x,features,r2.csv,,\n"
    "r3,B,70,U,NORMAL,features,r3.csv,,\n";

void write_payloads(const std::filesystem::path& dir) {
    write_file(dir / "r1.csv", "1,2,0.5\n");
    write_file(dir / "r2.csv", "0,1,-3\n");
    write_file(dir / "r3.csv", "4,4,4\n");
}

} // namespace

TEST_CASE("csv round trip with quoting") {
    oracles::TempDir tmp;
    const auto path = tmp.path() / "t.csv";
    const std::vector<std::string> header{"a", "b"};
    const std::vector<std::vector<std::string>> rows{{"plain", "has,comma"},
                                                     {"has \"quote\"", "multi\nline"}};
    write_csv(path, header, rows);
    const auto table = read_csv(path);
    CHECK(table.header == header);
    CHECK(table.rows == rows);
    CHECK(table.column("b") == 1);
    CHECK_THROWS_AS(table.column("c"), DataError);
}

TEST_CASE("csv rejects ragged rows") {
    CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), DataError);
    CHECK_THROWS_AS(parse_csv(""), DataError);
}

TEST_CASE("load_dataset builds records, sources and label space") {
    oracles::TempDir tmp;
    write_payloads(tmp.path());
    write_file(tmp.path() / "m.csv", kManifest);

    const Dataset ds = load_dataset(tmp.path() / "m.csv");
    CHECK(ds.size() == 3);
    CHECK(ds.sources().at("A") == 2);
    CHECK(ds.sources().at("B") == 1);
    CHECK(ds.label_space().labels() == std::vector<std::string>{"x", "y"});

    CHECK(ds.record(0).age == 63.0);
    CHECK(ds.record(0).sex == Sex::male);
    CHECK(ds.record(0).labels == std::set<std::string>{"x", "y"});
    CHECK_FALSE(ds.record(0).normal_flag);

    CHECK_FALSE(ds.record(1).age.has_value());

    CHECK(ds.record(2).sex == Sex::unknown);
    CHECK(ds.record(2).labels.empty());
    CHECK(ds.record(2).normal_flag);
    CHECK(std::get<FeatureVector>(ds.record(2).payload).values ==
          std::vector<double>{4, 4, 4});
}

TEST_CASE("load_dataset error paths") {
    oracles::TempDir tmp;
    write_payloads(tmp.path());

    CHECK_THROWS_AS(load_dataset(tmp.path() / "missing.csv"), DataError);

    write_file(tmp.path() / "dup.csv",
               "record_id,source_id,age,sex,labels,payload_kind,payload_path,fs_hz,n_leads\n"
               "r1,A,63,M,x,features,r1.csv,,\n"
               "r1,A,64,F,x,features,r2.csv,,\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "dup.csv"),
                         doctest::Contains("r1"), DataError);

    write_file(tmp.path() / "sex.csv",
               "record_id,source_id,age,sex,labels,payload_kind,payload_path,fs_hz,n_leads\n"
               "r1,A,63,Q,x,features,r1.csv,,\n");
    CHECK_THROWS_AS(load_dataset(tmp.path() / "sex.csv"), DataError);

    write_file(tmp.path() / "age.csv",
               "record_id,source_id,age,sex,labels,payload_kind,payload_path,fs_hz,n_leads\n"
               "r1,A,-5,M,x,features,r1.csv,,\n");
    CHECK_THROWS_AS(load_dataset(tmp.path() / "age.csv"), DataError);

    // empty label cell without the NORMAL marker names the row
    write_file(tmp.path() / "nolabel.csv",
               "record_id,source_id,age,sex,labels,payload_kind,payload_path,fs_hz,n_leads\n"
               "r1,A,63,M,,features,r1.csv,,\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "nolabel.csv"),
                         doctest::Contains("row 2"), DataError);

    write_file(tmp.path() / "badlabel.csv",
               "record_id,source_id,age,sex,labels,payload_kind,payload_path,fs_hz,n_leads\n"
               "r1,A,63,M,x||y,features,r1.csv,,\n");
    CHECK_THROWS_AS(load_dataset(tmp.path() / "badlabel.csv"), DataError);
}

TEST_CASE("signal payload validation") {
    oracles::TempDir tmp;
    write_file(tmp.path() / "sig.csv", "0,1\n1,2\n2,3\n");
    write_file(tmp.path() / "m.csv",
               "record_id,source_id,age,sex,labels,payload_kind,payload_path,fs_hz,n_leads\n"
               "r1,A,63,M,x,signal,sig.csv,500,2\n");
    const Dataset ds = load_dataset(tmp.path() / "m.csv");
    const auto& sig = std::get<SignalRef>(ds.record(0).payload);
    CHECK(sig.fs_hz == 500.0);
    const auto leads = load_signal(sig);
    CHECK(leads.size() == 2);
    CHECK(leads[1] == std::vector<double>{1, 2, 3});

    write_file(tmp.path() / "bad_fs.csv",
               "record_id,source_id,age,sex,labels,payload_kind,payload_path,fs_hz,n_leads\n"
               "r1,A,63,M,x,signal,sig.csv,0,2\n");
    CHECK_THROWS_AS(load_dataset(tmp.path() / "bad_fs.csv"), DataError);
}

TEST_CASE("manifest round trip preserves content") {
    oracles::TempDir tmp;
    write_payloads(tmp.path());
    write_file(tmp.path() / "m.csv", kManifest);
    const Dataset ds = load_dataset(tmp.path() / "m.csv");

    const auto tmp2 = tmp.path() / "resaved";
    std::filesystem::create_directories(tmp2);
    save_manifest(ds, tmp2 / "m.csv");
    const Dataset ds2 = load_dataset(tmp2 / "m.csv");

    REQUIRE(ds2.size() == ds.size());
    CHECK(ds2.label_space() == ds.label_space());
    CHECK(ds2.sources() == ds.sources());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds2.record(i).record_id == ds.record(i).record_id);
        CHECK(ds2.record(i).source_id == ds.record(i).source_id);
        CHECK(ds2.record(i).age == ds.record(i).age);
        CHECK(ds2.record(i).sex == ds.record(i).sex);
        CHECK(ds2.record(i).labels == ds.record(i).labels);
        CHECK(ds2.record(i).normal_flag == ds.record(i).normal_flag);
        CHECK(std::get<FeatureVector>(ds2.record(i).payload).values ==
              std::get<FeatureVector>(ds.record(i).payload).values);
    }
}

TEST_CASE("build_label_matrix definition cases") {
    std::vector<Record> records(3);
    records[0] = {"r1", "A", {}, Sex::unknown, {"164889003"}, false, {}, FeatureVector{}};
    records[1] = {"r2", "A", {}, Sex::unknown, {}, true, {}, FeatureVector{}};
    records[2] = {"r3", "B", {}, Sex::unknown, {"a", "164889003", "z"}, false, {}, FeatureVector{}};
    const Dataset ds(std::move(records), LabelSpace({"a", "164889003", "z"}));

    const auto lm = build_label_matrix(ds);
    CHECK(lm.rows() == 3);
    CHECK(lm.cols() == 3);
    CHECK(lm.values(0, 0) == 0);
    CHECK(lm.values(0, 1) == 1);
    CHECK(lm.values(0, 2) == 0);
    CHECK(lm.values.row(1).sum() == 0); // empty label set -> all-zero row
    CHECK(lm.values.row(2).sum() == 3); // every label -> all-ones row
    CHECK(lm.positives(1) == 2);
}

TEST_CASE("restrict_labels") {
    std::vector<Record> records(2);
    records[0] = {"r1", "A", {}, Sex::unknown, {"a", "b"}, false, {}, FeatureVector{}};
    records[1] = {"r2", "B", {}, Sex::unknown, {"c"}, false, {}, FeatureVector{}};
    const Dataset ds(std::move(records), LabelSpace({"a", "b", "c"}));

    SUBCASE("full space is the identity") {
        const Dataset out = restrict_labels(ds, {"a", "b", "c"});
        CHECK(out.label_space() == ds.label_space());
        CHECK(out.record(0).labels == ds.record(0).labels);
    }
    SUBCASE("empty keep set clears labels but drops no records") {
        const Dataset out = restrict_labels(ds, {});
        CHECK(out.size() == 2);
        CHECK(out.label_space().size() == 0);
        CHECK(out.record(0).labels.empty());
    }
    SUBCASE("removing a column never positive in a slice") {
        const Dataset out = restrict_labels(ds, {"a", "b"});
        CHECK(out.label_space().labels() == std::vector<std::string>{"a", "b"});
        CHECK(out.record(1).labels.empty());
    }
    SUBCASE("unknown code is an error") {
        CHECK_THROWS_AS(restrict_labels(ds, {"nope"}), DataError);
    }
    SUBCASE("commutes with column selection on the label matrix") {
        const auto full = build_label_matrix(ds);
        const auto restricted = build_label_matrix(restrict_labels(ds, {"a", "c"}));
        CHECK(restricted.values.col(0) == full.values.col(0));
        CHECK(restricted.values.col(1) == full.values.col(2));
    }
}

TEST_CASE("dataset invariants are enforced") {
    // label outside the space
    std::vector<Record> bad(1);
    bad[0] = {"r1", "A", {}, Sex::unknown, {"zzz"}, false, {}, FeatureVector{}};
    CHECK_THROWS_AS(Dataset(std::move(bad), LabelSpace({"a"})), DataError);

    // source counts match a recomputed histogram on any constructed dataset
    Rng rng(5);
    std::vector<Record> records;
    std::map<std::string, std::size_t> expected;
    for (int i = 0; i < 100; ++i) {
        Record rec;
        rec.record_id = "r" + std::to_string(i);
        rec.source_id = "s" + std::to_string(rng.uniform_int(0, 3));
        rec.normal_flag = true;
        rec.payload = FeatureVector{};
        expected[rec.source_id] += 1;
        records.push_back(std::move(rec));
    }
    const Dataset ds(std::move(records), LabelSpace({}));
    CHECK(ds.sources() == expected);
}
