#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sourcecv/error.hpp"
#include "sourcecv/experiments.hpp"
#include "sourcecv/reference_tables.hpp"
#include "sourcecv/synthgen.hpp"

namespace {

using namespace sourcecv;

void print_result_summary(const ProtocolResult& result) {
    std::printf("protocol: %s (seed %llu)\n", result.protocol.c_str(),
                static_cast<unsigned long long>(result.seed));
    for (const auto& ctx : result.contexts) {
        std::printf("  %-32s", ctx.context_id.c_str());
        for (const auto& [method, cv] : ctx.cv) {
            std::printf("  %s macro=%.4f micro=%.4f", method.c_str(), cv.mean.macro,
                        cv.mean.micro);
        }
        std::printf("  test macro=%.4f micro=%.4f\n", ctx.test.macro, ctx.test.micro);
    }
    for (const auto& block : result.reliability) {
        std::printf("  reliability %-16s %-18s %-10s me=%+.4f sd=%.4f rmse=%.4f (n=%zu)\n",
                    block.group.c_str(), block.method.c_str(), block.metric.c_str(),
                    block.report.me, block.report.sd, block.report.rmse,
                    block.report.entries.size());
    }
    for (const auto& run : result.source_prediction) {
        std::printf("  source-prediction %-30s accuracy=%.4f baseline=%.4f\n",
                    run.input_set.c_str(), run.accuracy, run.majority_baseline);
    }
    std::printf("  leakage checks=%zu violations=%zu\n", result.leakage.checks,
                result.leakage.violations);
}

int cmd_run(const std::string& config_path, const std::string& outdir_override) {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (!outdir_override.empty()) cfg.outdir = outdir_override;
    if (cfg.outdir.empty()) {
        throw ConfigError("no output directory: set \"outdir\" in the config or pass --outdir");
    }
    const ProtocolResult result = run_experiment(cfg);
    emit_reports(result, cfg.outdir);
    print_result_summary(result);
    std::printf("reports written to %s\n", cfg.outdir.string().c_str());
    return 0;
}

int cmd_validate(const std::string& manifest_path, bool against_reference) {
    const Dataset ds = load_dataset(manifest_path);
    std::printf("records: %zu\n", ds.size());
    std::printf("labels:  %zu\n", ds.label_space().size());
    std::printf("sources: %zu\n", ds.sources().size());
    for (const auto& [source, count] : ds.sources()) {
        std::printf("  %-24s %zu\n", source.c_str(), count);
    }
    if (against_reference) {
        const auto diff = validate_against_reference(ds, reference_label_counts());
        if (diff.empty()) {
            std::printf("reference counts: all ingested sources match\n");
        } else {
            std::printf("reference counts: %zu mismatching cells (advisory)\n",
                        diff.mismatches.size());
            for (const auto& row : diff.mismatches) {
                std::printf("  %s / %s: expected %ld, got %ld\n", row.label.c_str(),
                            row.source.c_str(), row.expected, row.actual);
            }
        }
    }
    return 0;
}

int cmd_gen(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file: " + config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
    }
    if (!j.contains("outdir")) throw ConfigError("gen config must set \"outdir\"");
    const std::filesystem::path outdir = j.at("outdir").get<std::string>();
    const SynthSpec spec = SynthSpec::from_json(j);

    const Dataset ds = generate(spec);
    std::filesystem::create_directories(outdir);
    save_manifest(ds, outdir / "manifest.csv", outdir / "payloads");
    std::printf("wrote %zu records (%zu sources, %zu labels) to %s\n", ds.size(),
                ds.sources().size(), ds.label_space().size(), outdir.string().c_str());
    return 0;
}

int cmd_report(const std::string& results_path, const std::string& outdir) {
    std::ifstream in(results_path);
    if (!in) throw DataError("cannot open results file: " + results_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(results_path + ": " + e.what());
    }
    const ProtocolResult result = ProtocolResult::from_json(j);
    print_result_summary(result);
    if (!outdir.empty()) {
        emit_reports(result, outdir);
        std::printf("reports written to %s\n", outdir.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-source cross-validation reliability experiments"};
    app.require_subcommand(1);

    std::string config_path, manifest_path, results_path, outdir;
    bool against_reference = false;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--outdir", outdir, "override the config's output directory");

    auto* validate = app.add_subcommand("validate", "load a manifest and print a summary");
    validate->add_option("manifest", manifest_path, "dataset manifest (CSV)")->required();
    validate->add_flag("--reference", against_reference,
                       "compare label counts against the bundled reference table");

    auto* gen = app.add_subcommand("gen", "generate a synthetic multi-source dataset");
    gen->add_option("config", config_path, "generator config (JSON)")->required();

    auto* report = app.add_subcommand("report", "summarize a results.json file");
    report->add_option("results", results_path, "results.json produced by `run`")->required();
    report->add_option("--outdir", outdir, "re-emit the CSV reports into this directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, outdir);
        if (validate->parsed()) return cmd_validate(manifest_path, against_reference);
        if (gen->parsed()) return cmd_gen(config_path);
        if (report->parsed()) return cmd_report(results_path, outdir);
    } catch (const sourcecv::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const sourcecv::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
