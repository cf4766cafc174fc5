#include "sourcecv/experiments.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "sourcecv/csv.hpp"
#include "sourcecv/error.hpp"
#include "sourcecv/rng.hpp"
#include "sourcecv/splits.hpp"

namespace sourcecv {

std::string to_string(Protocol protocol) {
    switch (protocol) {
    case Protocol::single_source: return "single_source";
    case Protocol::multi_source: return "multi_source";
    case Protocol::source_prediction: return "source_prediction";
    }
    return "?";
}

Protocol protocol_from_string(const std::string& name) {
    if (name == "single_source") return Protocol::single_source;
    if (name == "multi_source") return Protocol::multi_source;
    if (name == "source_prediction") return Protocol::source_prediction;
    throw ConfigError("unknown protocol: '" + name + "'");
}

std::string to_string(InputSet input_set) {
    switch (input_set) {
    case InputSet::features_demographics: return "features_demographics";
    case InputSet::features_demographics_labels: return "features_demographics_labels";
    case InputSet::labels_only: return "labels_only";
    }
    return "?";
}

InputSet input_set_from_string(const std::string& name) {
    if (name == "features_demographics") return InputSet::features_demographics;
    if (name == "features_demographics_labels") return InputSet::features_demographics_labels;
    if (name == "labels_only") return InputSet::labels_only;
    throw ConfigError("unknown input set: '" + name + "'");
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json dataset;
    if (synthetic) {
        dataset["synthetic"] = synthetic->to_json();
    } else {
        dataset["manifest"] = manifest.string();
    }
    nlohmann::json model{{"kind", to_string(model_kind)},
                         {"max_iter", train.max_iter},
                         {"tol", train.tol},
                         {"l2", train.l2},
                         {"seed", train.seed}};
    if (model_kind == ModelKind::gbdt) {
        model["gbdt"] = {{"n_rounds", gbdt.n_rounds},
                         {"max_depth", gbdt.max_depth},
                         {"learning_rate", gbdt.learning_rate},
                         {"reg_lambda", gbdt.reg_lambda},
                         {"min_child_weight", gbdt.min_child_weight}};
    }
    nlohmann::json j{{"protocol", to_string(protocol)},
                     {"dataset", dataset},
                     {"model", model},
                     {"prep",
                      {{"target_fs", prep.target_fs},
                       {"target_len", prep.target_len},
                       {"age_scale_max", prep.age_scale_max}}},
                     {"seed", seed},
                     {"outdir", outdir.string()}};
    if (k) j["k"] = *k;
    if (protocol == Protocol::source_prediction) {
        j["train_frac"] = train_frac;
        nlohmann::json sets = nlohmann::json::array();
        for (const auto s : input_sets) sets.push_back(to_string(s));
        j["input_sets"] = sets;
    }
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        cfg.protocol = protocol_from_string(j.at("protocol").get<std::string>());

        const auto& dataset = j.at("dataset");
        const bool has_manifest = dataset.contains("manifest");
        const bool has_synth = dataset.contains("synthetic");
        if (has_manifest == has_synth) {
            throw ConfigError("dataset must name exactly one of 'manifest' or 'synthetic'");
        }
        if (has_manifest) {
            cfg.manifest = dataset.at("manifest").get<std::string>();
        } else {
            cfg.synthetic = SynthSpec::from_json(dataset.at("synthetic"));
        }

        if (j.contains("model")) {
            const auto& model = j.at("model");
            if (model.contains("kind")) {
                cfg.model_kind = model_kind_from_string(model.at("kind").get<std::string>());
            }
            if (model.contains("max_iter")) cfg.train.max_iter = model.at("max_iter").get<int>();
            if (model.contains("tol")) cfg.train.tol = model.at("tol").get<double>();
            if (model.contains("l2")) cfg.train.l2 = model.at("l2").get<double>();
            if (model.contains("seed")) cfg.train.seed = model.at("seed").get<std::uint64_t>();
            if (model.contains("gbdt")) {
                const auto& g = model.at("gbdt");
                if (g.contains("n_rounds")) cfg.gbdt.n_rounds = g.at("n_rounds").get<int>();
                if (g.contains("max_depth")) cfg.gbdt.max_depth = g.at("max_depth").get<int>();
                if (g.contains("learning_rate")) cfg.gbdt.learning_rate = g.at("learning_rate").get<double>();
                if (g.contains("reg_lambda")) cfg.gbdt.reg_lambda = g.at("reg_lambda").get<double>();
                if (g.contains("min_child_weight")) cfg.gbdt.min_child_weight = g.at("min_child_weight").get<double>();
            }
        }
        if (j.contains("prep")) {
            const auto& prep = j.at("prep");
            if (prep.contains("target_fs")) cfg.prep.target_fs = prep.at("target_fs").get<double>();
            if (prep.contains("target_len")) cfg.prep.target_len = prep.at("target_len").get<int>();
            if (prep.contains("age_scale_max")) cfg.prep.age_scale_max = prep.at("age_scale_max").get<double>();
        }
        if (j.contains("k")) cfg.k = j.at("k").get<int>();
        if (j.contains("train_frac")) cfg.train_frac = j.at("train_frac").get<double>();
        if (j.contains("input_sets")) {
            cfg.input_sets.clear();
            for (const auto& s : j.at("input_sets")) {
                cfg.input_sets.push_back(input_set_from_string(s.get<std::string>()));
            }
            if (cfg.input_sets.empty()) throw ConfigError("input_sets must not be empty");
        }
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("outdir")) cfg.outdir = j.at("outdir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.k && *cfg.k < 2) throw ConfigError("k must be >= 2");
    if (!(cfg.train_frac > 0 && cfg.train_frac < 1)) {
        throw ConfigError("train_frac must be in (0, 1)");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

Dataset realize_dataset(const ExperimentConfig& cfg) {
    if (cfg.synthetic) return generate(*cfg.synthetic);
    return load_dataset(cfg.manifest);
}

namespace {

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
    }
    return out;
}

// sorted-vector disjointness + cover check; every split consumed by a fit
// goes through here
void check_split(const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& val_idx,
                 std::size_t n_total, LeakageAudit& audit) {
    audit.checks += 1;
    bool bad = train_idx.size() + val_idx.size() != n_total;
    std::size_t a = 0, b = 0;
    while (!bad && a < train_idx.size() && b < val_idx.size()) {
        if (train_idx[a] == val_idx[b]) {
            bad = true;
        } else if (train_idx[a] < val_idx[b]) {
            ++a;
        } else {
            ++b;
        }
    }
    if (bad) {
        audit.violations += 1;
        throw std::logic_error("split hygiene violation: train/validation folds overlap");
    }
}

MetricValues eval_metrics(const ScoreMatrix& sm, const LabelMatrix& lm_eval,
                          const std::set<std::string>& valid) {
    MetricValues mv;
    mv.macro = macro_auc(sm, lm_eval, valid);
    mv.micro = micro_auc(sm, lm_eval, valid);
    return mv;
}

CvMethodResult run_cv(const ExperimentConfig& cfg, const Eigen::MatrixXd& x, const LabelMatrix& lm,
                      const FoldPlan& plan, LeakageAudit& audit) {
    CvMethodResult res;
    res.folds.reserve(static_cast<std::size_t>(plan.n_folds));
    double macro_sum = 0, micro_sum = 0;
    for (int fold = 0; fold < plan.n_folds; ++fold) {
        const auto val_idx = plan.fold_indices(fold);
        const auto train_idx = plan.complement_indices(fold);
        if (val_idx.empty() || train_idx.empty()) {
            throw DataError("cross-validation fold " + std::to_string(fold) + " is empty");
        }
        check_split(train_idx, val_idx, plan.size(), audit);

        const LabelMatrix lm_train = lm.select_rows(train_idx);
        const LabelMatrix lm_val = lm.select_rows(val_idx);
        const auto model = fit_classifier(cfg.model_kind, select_rows(x, train_idx), lm_train,
                                          cfg.train, cfg.gbdt);
        const ScoreMatrix scores = model->predict_scores(select_rows(x, val_idx));
        const MetricValues mv = eval_metrics(scores, lm_val, valid_labels(lm_train, lm_val));
        macro_sum += mv.macro;
        micro_sum += mv.micro;
        res.folds.push_back(mv);
    }
    res.mean.macro = macro_sum / static_cast<double>(plan.n_folds);
    res.mean.micro = micro_sum / static_cast<double>(plan.n_folds);
    return res;
}

std::map<std::string, std::vector<std::size_t>> indices_by_source(const Dataset& ds) {
    std::map<std::string, std::vector<std::size_t>> by_source;
    for (std::size_t i = 0; i < ds.size(); ++i) by_source[ds.record(i).source_id].push_back(i);
    return by_source;
}

void append_reliability(std::vector<ReliabilityBlock>& blocks, const std::string& group,
                        const std::string& method,
                        const std::vector<ReliabilityPair>& macro_pairs,
                        const std::vector<ReliabilityPair>& micro_pairs) {
    if (macro_pairs.size() >= 2) {
        blocks.push_back({group, method, "macro_auc", reliability(macro_pairs)});
        blocks.push_back({group, method, "micro_auc", reliability(micro_pairs)});
    }
}

} // namespace

std::set<std::string> valid_labels(const LabelMatrix& train, const LabelMatrix& eval) {
    if (train.labels != eval.labels) {
        throw std::invalid_argument("valid_labels: label spaces differ");
    }
    std::set<std::string> valid;
    for (Eigen::Index c = 0; c < train.cols(); ++c) {
        if (train.positives(c) > 0 && eval.positives(c) > 0) {
            valid.insert(train.labels[static_cast<std::size_t>(c)]);
        }
    }
    return valid;
}

Eigen::MatrixXd assemble_features(const Dataset& ds, const PrepConfig& prep, InputSet input_set) {
    const auto n = static_cast<Eigen::Index>(ds.size());
    const bool want_payload = input_set != InputSet::labels_only;
    const bool want_labels = input_set != InputSet::features_demographics;

    Eigen::MatrixXd payload_block;
    if (want_payload) {
        Eigen::Index payload_dim = -1;
        std::vector<std::vector<double>> rows(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto& rec = ds.record(i);
            if (const auto* fv = std::get_if<FeatureVector>(&rec.payload)) {
                rows[i] = fv->values;
            } else {
                const auto& sig = std::get<SignalRef>(rec.payload);
                const auto leads = load_signal(sig);
                const auto& lead2 = leads.size() >= 2 ? leads[1] : leads[0];
                const auto resampled = resample_lead(lead2, sig.fs_hz, prep.target_fs);
                const auto features = lead2_signal_features(resampled, prep.target_fs);
                rows[i].assign(features.begin(), features.end());
            }
            const auto dim = static_cast<Eigen::Index>(rows[i].size());
            if (payload_dim < 0) {
                payload_dim = dim;
            } else if (dim != payload_dim) {
                throw DataError("record '" + rec.record_id + "' has a payload of dimension " +
                                std::to_string(dim) + ", expected " + std::to_string(payload_dim));
            }
        }
        payload_block.resize(n, payload_dim + 2);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const auto& rec = ds.record(i);
            const auto row = static_cast<Eigen::Index>(i);
            for (Eigen::Index c = 0; c < payload_dim; ++c) {
                payload_block(row, c) = rows[i][static_cast<std::size_t>(c)];
            }
            const Demographics d = encode_demographics(rec.age, rec.sex, prep.age_scale_max);
            payload_block(row, payload_dim) = d.age_scaled;
            payload_block(row, payload_dim + 1) = d.sex_numeric;
        }
    }

    Eigen::MatrixXd label_block;
    if (want_labels) {
        label_block = build_label_matrix(ds).values.cast<double>();
    }

    if (want_payload && want_labels) {
        Eigen::MatrixXd out(n, payload_block.cols() + label_block.cols());
        out << payload_block, label_block;
        return out;
    }
    return want_payload ? payload_block : label_block;
}

ProtocolResult run_single_source(const ExperimentConfig& cfg) {
    const Dataset ds = realize_dataset(cfg);
    if (ds.sources().size() < 2) {
        throw DataError("single_source protocol needs at least 2 sources");
    }
    const int k = cfg.k.value_or(5);
    const auto by_source = indices_by_source(ds);

    const Eigen::MatrixXd x = assemble_features(ds, cfg.prep, InputSet::features_demographics);
    const LabelMatrix lm = build_label_matrix(ds);

    ProtocolResult result;
    result.protocol = to_string(cfg.protocol);
    result.seed = cfg.seed;
    result.config_echo = cfg.to_json();

    for (const auto& [train_source, train_idx] : by_source) {
        if (train_idx.size() < static_cast<std::size_t>(k)) {
            throw DataError("source '" + train_source + "' has " +
                            std::to_string(train_idx.size()) + " records, fewer than k=" +
                            std::to_string(k));
        }
        const Eigen::MatrixXd x_train = select_rows(x, train_idx);
        const LabelMatrix lm_train = lm.select_rows(train_idx);

        const FoldPlan plan =
            stratified_kfold(lm_train, k, Rng::derive(cfg.seed, "kfold:" + train_source));
        const CvMethodResult cv = run_cv(cfg, x_train, lm_train, plan, result.leakage);

        const auto model = fit_classifier(cfg.model_kind, x_train, lm_train, cfg.train, cfg.gbdt);

        std::vector<ReliabilityPair> macro_pairs, micro_pairs;
        for (const auto& [test_source, test_idx] : by_source) {
            if (test_source == train_source) continue;
            const LabelMatrix lm_test = lm.select_rows(test_idx);
            const ScoreMatrix scores = model->predict_scores(select_rows(x, test_idx));
            const MetricValues test = eval_metrics(scores, lm_test, valid_labels(lm_train, lm_test));

            ContextResult ctx;
            ctx.context_id = "train=" + train_source + "|test=" + test_source;
            ctx.train_id = train_source;
            ctx.test_id = test_source;
            ctx.cv["stratified_kfold"] = cv;
            ctx.test = test;
            result.contexts.push_back(std::move(ctx));

            macro_pairs.push_back({"test=" + test_source, cv.mean.macro, test.macro});
            micro_pairs.push_back({"test=" + test_source, cv.mean.micro, test.micro});
        }
        append_reliability(result.reliability, "train=" + train_source, "stratified_kfold",
                           macro_pairs, micro_pairs);
    }
    return result;
}

ProtocolResult run_multi_source(const ExperimentConfig& cfg) {
    const Dataset ds = realize_dataset(cfg);
    if (ds.sources().size() < 3) {
        throw DataError("multi_source protocol needs at least 3 sources");
    }
    const auto by_source = indices_by_source(ds);

    const Eigen::MatrixXd x = assemble_features(ds, cfg.prep, InputSet::features_demographics);
    const LabelMatrix lm = build_label_matrix(ds);

    ProtocolResult result;
    result.protocol = to_string(cfg.protocol);
    result.seed = cfg.seed;
    result.config_echo = cfg.to_json();

    std::vector<ReliabilityPair> macro_kfold, micro_kfold, macro_lso, micro_lso;

    for (const auto& [held_out, test_idx] : by_source) {
        std::vector<std::size_t> train_idx;
        std::vector<std::string> train_sources;
        train_idx.reserve(ds.size() - test_idx.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.record(i).source_id != held_out) {
                train_idx.push_back(i);
                train_sources.push_back(ds.record(i).source_id);
            }
        }
        // the held-out source must be invisible to every training-side split
        result.leakage.checks += 1;
        for (const auto idx : train_idx) {
            if (ds.record(idx).source_id == held_out) {
                result.leakage.violations += 1;
                throw std::logic_error("split hygiene violation: test source in training pool");
            }
        }

        const int k = cfg.k.value_or(static_cast<int>(ds.sources().size()) - 1);
        if (train_idx.size() < static_cast<std::size_t>(k)) {
            throw DataError("training pool for held-out '" + held_out + "' is smaller than k");
        }

        const Eigen::MatrixXd x_train = select_rows(x, train_idx);
        const LabelMatrix lm_train = lm.select_rows(train_idx);

        const FoldPlan kfold_plan =
            stratified_kfold(lm_train, k, Rng::derive(cfg.seed, "kfold:" + held_out));
        const FoldPlan lso_plan = leave_source_out(train_sources);

        ContextResult ctx;
        ctx.context_id = "test=" + held_out;
        ctx.train_id = "pool";
        ctx.test_id = held_out;
        ctx.cv["stratified_kfold"] = run_cv(cfg, x_train, lm_train, kfold_plan, result.leakage);
        ctx.cv["leave_source_out"] = run_cv(cfg, x_train, lm_train, lso_plan, result.leakage);

        // the same final model serves both CV methods' error computation
        const auto model = fit_classifier(cfg.model_kind, x_train, lm_train, cfg.train, cfg.gbdt);
        const LabelMatrix lm_test = lm.select_rows(test_idx);
        const ScoreMatrix scores = model->predict_scores(select_rows(x, test_idx));
        ctx.test = eval_metrics(scores, lm_test, valid_labels(lm_train, lm_test));

        macro_kfold.push_back({ctx.context_id, ctx.cv["stratified_kfold"].mean.macro, ctx.test.macro});
        micro_kfold.push_back({ctx.context_id, ctx.cv["stratified_kfold"].mean.micro, ctx.test.micro});
        macro_lso.push_back({ctx.context_id, ctx.cv["leave_source_out"].mean.macro, ctx.test.macro});
        micro_lso.push_back({ctx.context_id, ctx.cv["leave_source_out"].mean.micro, ctx.test.micro});

        result.contexts.push_back(std::move(ctx));
    }

    append_reliability(result.reliability, "all", "stratified_kfold", macro_kfold, micro_kfold);
    append_reliability(result.reliability, "all", "leave_source_out", macro_lso, micro_lso);
    return result;
}

ProtocolResult run_source_prediction(const ExperimentConfig& cfg) {
    const Dataset ds = realize_dataset(cfg);
    const auto classes = ds.source_ids();
    if (classes.size() < 2) {
        throw DataError("source_prediction protocol needs at least 2 sources");
    }

    const FoldPlan plan = stratified_holdout(ds, cfg.train_frac, StratifyBy::source,
                                             Rng::derive(cfg.seed, "holdout"));
    const auto train_idx = plan.fold_indices(0);
    const auto test_idx = plan.fold_indices(1);
    if (test_idx.empty()) throw DataError("holdout produced an empty test fold");

    ProtocolResult result;
    result.protocol = to_string(cfg.protocol);
    result.seed = cfg.seed;
    result.config_echo = cfg.to_json();
    check_split(train_idx, test_idx, ds.size(), result.leakage);

    std::map<std::string, int> class_index;
    for (std::size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = static_cast<int>(i);

    std::vector<std::string> train_classes;
    train_classes.reserve(train_idx.size());
    for (const auto idx : train_idx) train_classes.push_back(ds.record(idx).source_id);

    // majority vote from train counts, evaluated on the test slice
    std::map<std::string, std::size_t> train_counts;
    for (const auto& c : train_classes) train_counts[c] += 1;
    const auto majority = std::max_element(train_counts.begin(), train_counts.end(),
                                           [](const auto& a, const auto& b) {
                                               return a.second < b.second;
                                           })->first;
    std::size_t majority_hits = 0;
    std::vector<int> truth;
    truth.reserve(test_idx.size());
    for (const auto idx : test_idx) {
        const auto& source = ds.record(idx).source_id;
        truth.push_back(class_index.at(source));
        majority_hits += source == majority;
    }
    const double baseline = static_cast<double>(majority_hits) / static_cast<double>(test_idx.size());

    for (const auto input_set : cfg.input_sets) {
        const Eigen::MatrixXd x = assemble_features(ds, cfg.prep, input_set);
        const SoftmaxModel model = fit_softmax(select_rows(x, train_idx), train_classes, cfg.train);

        const auto local_pred = model.predict(select_rows(x, test_idx));
        std::vector<int> predicted;
        predicted.reserve(local_pred.size());
        for (const int p : local_pred) {
            predicted.push_back(class_index.at(model.classes[static_cast<std::size_t>(p)]));
        }

        SourcePredictionRun run;
        run.input_set = to_string(input_set);
        run.confusion = confusion_and_accuracy(predicted, truth, classes);
        run.accuracy = run.confusion.accuracy;
        run.majority_baseline = baseline;
        result.source_prediction.push_back(std::move(run));
    }
    return result;
}

ProtocolResult run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.protocol) {
    case Protocol::single_source: return run_single_source(cfg);
    case Protocol::multi_source: return run_multi_source(cfg);
    case Protocol::source_prediction: return run_source_prediction(cfg);
    }
    throw ConfigError("unknown protocol");
}

namespace {

nlohmann::json metric_values_to_json(const MetricValues& mv) {
    return {{"macro_auc", mv.macro}, {"micro_auc", mv.micro}};
}

MetricValues metric_values_from_json(const nlohmann::json& j) {
    MetricValues mv;
    mv.macro = j.at("macro_auc").get<double>();
    mv.micro = j.at("micro_auc").get<double>();
    return mv;
}

} // namespace

nlohmann::json ProtocolResult::to_json() const {
    nlohmann::json contexts_json = nlohmann::json::array();
    for (const auto& ctx : contexts) {
        nlohmann::json cv;
        for (const auto& [method, res] : ctx.cv) {
            nlohmann::json folds = nlohmann::json::array();
            for (const auto& f : res.folds) folds.push_back(metric_values_to_json(f));
            cv[method] = {{"mean", metric_values_to_json(res.mean)}, {"folds", folds}};
        }
        contexts_json.push_back({{"context_id", ctx.context_id},
                                 {"train", ctx.train_id},
                                 {"test", ctx.test_id},
                                 {"cv", cv},
                                 {"test_metrics", metric_values_to_json(ctx.test)}});
    }

    nlohmann::json rel_json = nlohmann::json::array();
    for (const auto& block : reliability) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& e : block.report.entries) {
            entries.push_back({{"context_id", e.context_id},
                               {"cv_estimate", e.cv_estimate},
                               {"test_value", e.test_value},
                               {"signed_error", e.signed_error}});
        }
        rel_json.push_back({{"group", block.group},
                            {"method", block.method},
                            {"metric", block.metric},
                            {"n", block.report.entries.size()},
                            {"me", block.report.me},
                            {"sd", block.report.sd},
                            {"rmse", block.report.rmse},
                            {"entries", entries}});
    }

    nlohmann::json sp_json = nlohmann::json::array();
    for (const auto& run : source_prediction) {
        nlohmann::json matrix = nlohmann::json::array();
        for (Eigen::Index r = 0; r < run.confusion.counts.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < run.confusion.counts.cols(); ++c) {
                row.push_back(run.confusion.counts(r, c));
            }
            matrix.push_back(std::move(row));
        }
        sp_json.push_back({{"input_set", run.input_set},
                           {"accuracy", run.accuracy},
                           {"majority_baseline", run.majority_baseline},
                           {"classes", run.confusion.classes},
                           {"confusion", matrix}});
    }

    return {{"schema_version", 1},
            {"protocol", protocol},
            {"seed", seed},
            {"config", config_echo},
            {"contexts", contexts_json},
            {"reliability", rel_json},
            {"source_prediction", sp_json},
            {"leakage", {{"checks", leakage.checks}, {"violations", leakage.violations}}}};
}

ProtocolResult ProtocolResult::from_json(const nlohmann::json& j) {
    ProtocolResult result;
    result.protocol = j.at("protocol").get<std::string>();
    result.seed = j.at("seed").get<std::uint64_t>();
    result.config_echo = j.at("config");
    for (const auto& c : j.at("contexts")) {
        ContextResult ctx;
        ctx.context_id = c.at("context_id").get<std::string>();
        ctx.train_id = c.at("train").get<std::string>();
        ctx.test_id = c.at("test").get<std::string>();
        for (const auto& [method, res] : c.at("cv").items()) {
            CvMethodResult cv;
            cv.mean = metric_values_from_json(res.at("mean"));
            for (const auto& f : res.at("folds")) cv.folds.push_back(metric_values_from_json(f));
            ctx.cv[method] = std::move(cv);
        }
        ctx.test = metric_values_from_json(c.at("test_metrics"));
        result.contexts.push_back(std::move(ctx));
    }
    for (const auto& r : j.at("reliability")) {
        ReliabilityBlock block;
        block.group = r.at("group").get<std::string>();
        block.method = r.at("method").get<std::string>();
        block.metric = r.at("metric").get<std::string>();
        block.report.me = r.at("me").get<double>();
        block.report.sd = r.at("sd").get<double>();
        block.report.rmse = r.at("rmse").get<double>();
        for (const auto& e : r.at("entries")) {
            block.report.entries.push_back({e.at("context_id").get<std::string>(),
                                            e.at("cv_estimate").get<double>(),
                                            e.at("test_value").get<double>(),
                                            e.at("signed_error").get<double>()});
        }
        result.reliability.push_back(std::move(block));
    }
    for (const auto& s : j.at("source_prediction")) {
        SourcePredictionRun run;
        run.input_set = s.at("input_set").get<std::string>();
        run.accuracy = s.at("accuracy").get<double>();
        run.majority_baseline = s.at("majority_baseline").get<double>();
        run.confusion.classes = s.at("classes").get<std::vector<std::string>>();
        const auto& matrix = s.at("confusion");
        const auto k = static_cast<Eigen::Index>(matrix.size());
        run.confusion.counts.resize(k, k);
        for (Eigen::Index r = 0; r < k; ++r) {
            for (Eigen::Index c = 0; c < k; ++c) {
                run.confusion.counts(r, c) =
                    matrix[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<int>();
            }
        }
        run.confusion.accuracy = run.accuracy;
        result.source_prediction.push_back(std::move(run));
    }
    result.leakage.checks = j.at("leakage").at("checks").get<std::size_t>();
    result.leakage.violations = j.at("leakage").at("violations").get<std::size_t>();
    return result;
}

void emit_reports(const ProtocolResult& result, const std::filesystem::path& outdir) {
    if (result.contexts.empty() && result.source_prediction.empty()) {
        throw DataError("emit_reports: empty protocol result, nothing to write");
    }
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) throw DataError("cannot create output directory " + outdir.string() + ": " + ec.message());

    {
        const auto path = outdir / "results.json";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path.string());
        out << result.to_json().dump(2) << '\n';
        if (!out) throw DataError("write failed: " + path.string());
    }

    if (!result.reliability.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& block : result.reliability) {
            for (const auto& e : block.report.entries) {
                rows.push_back({block.group, block.method, block.metric, e.context_id,
                                format_double(e.cv_estimate), format_double(e.test_value),
                                format_double(e.signed_error),
                                std::to_string(block.report.entries.size()),
                                format_double(block.report.me), format_double(block.report.sd),
                                format_double(block.report.rmse)});
            }
        }
        write_csv(outdir / "reliability.csv",
                  {"group", "method", "metric", "context_id", "cv_estimate", "test_value",
                   "signed_error", "n", "me", "sd", "rmse"},
                  rows);
    }

    if (!result.contexts.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& ctx : result.contexts) {
            for (const auto& [method, cv] : ctx.cv) {
                for (std::size_t f = 0; f < cv.folds.size(); ++f) {
                    rows.push_back({ctx.context_id, method, std::to_string(f),
                                    format_double(cv.folds[f].macro),
                                    format_double(cv.folds[f].micro)});
                }
            }
        }
        write_csv(outdir / "folds.csv", {"context_id", "method", "fold", "macro_auc", "micro_auc"},
                  rows);
    }

    if (!result.source_prediction.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& run : result.source_prediction) {
            const auto& classes = run.confusion.classes;
            for (Eigen::Index r = 0; r < run.confusion.counts.rows(); ++r) {
                for (Eigen::Index c = 0; c < run.confusion.counts.cols(); ++c) {
                    rows.push_back({run.input_set, classes[static_cast<std::size_t>(r)],
                                    classes[static_cast<std::size_t>(c)],
                                    std::to_string(run.confusion.counts(r, c))});
                }
            }
        }
        write_csv(outdir / "confusion.csv", {"input_set", "true_source", "predicted_source", "count"},
                  rows);
    }
}

} // namespace sourcecv
