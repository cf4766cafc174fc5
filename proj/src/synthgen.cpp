#include "sourcecv/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sourcecv/error.hpp"
#include "sourcecv/rng.hpp"

namespace sourcecv {

void SynthSpec::validate() const {
    if (n_sources < 1) throw ConfigError("synth spec: n_sources must be >= 1");
    if (records_per_source < 1) throw ConfigError("synth spec: records_per_source must be >= 1");
    if (n_labels < 1) throw ConfigError("synth spec: n_labels must be >= 1");
    if (n_features < 1) throw ConfigError("synth spec: n_features must be >= 1");
    if (!(noise_std > 0)) throw ConfigError("synth spec: noise_std must be > 0");
    if (delta_prior < 0 || delta_cov < 0) {
        throw ConfigError("synth spec: shift magnitudes must be >= 0");
    }
    if (!base_prevalence.empty() &&
        base_prevalence.size() != static_cast<std::size_t>(n_labels)) {
        throw ConfigError("synth spec: base_prevalence length must equal n_labels");
    }
    if (!prevalence.empty()) {
        if (prevalence.size() != static_cast<std::size_t>(n_sources)) {
            throw ConfigError("synth spec: prevalence must have one row per source");
        }
        for (const auto& row : prevalence) {
            if (row.size() != static_cast<std::size_t>(n_labels)) {
                throw ConfigError("synth spec: prevalence rows must have n_labels entries");
            }
            for (const double p : row) {
                if (p < 0 || p > 1) throw ConfigError("synth spec: prevalences must be in [0,1]");
            }
        }
    }
    if (!label_effects.empty()) {
        if (label_effects.size() != static_cast<std::size_t>(n_labels)) {
            throw ConfigError("synth spec: label_effects must have one row per label");
        }
        for (const auto& row : label_effects) {
            if (row.size() != static_cast<std::size_t>(n_features)) {
                throw ConfigError("synth spec: label_effects rows must have n_features entries");
            }
        }
    }
}

namespace {

std::vector<double> random_direction(Rng& rng, int dim, double length) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm = 0;
    do {
        norm = 0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
    } while (norm == 0);
    for (auto& x : v) x *= length / norm;
    return v;
}

std::string label_code(int l) {
    std::string code = "L";
    if (l < 10) code += '0';
    code += std::to_string(l);
    return code;
}

} // namespace

Dataset generate(const SynthSpec& spec) {
    spec.validate();
    const auto n_sources = static_cast<std::size_t>(spec.n_sources);
    const auto n_labels = static_cast<std::size_t>(spec.n_labels);
    const auto n_features = static_cast<std::size_t>(spec.n_features);

    std::vector<double> base = spec.base_prevalence;
    if (base.empty()) {
        base.resize(n_labels);
        for (std::size_t l = 0; l < n_labels; ++l) {
            base[l] = n_labels == 1
                          ? 0.3
                          : 0.10 + 0.35 * static_cast<double>(l) / static_cast<double>(n_labels - 1);
        }
    }

    std::vector<std::vector<double>> effects = spec.label_effects;
    if (effects.empty()) {
        Rng rng(Rng::derive(spec.seed, "effects"));
        effects.reserve(n_labels);
        for (std::size_t l = 0; l < n_labels; ++l) {
            effects.push_back(random_direction(rng, spec.n_features, spec.effect_scale));
        }
    }

    std::vector<std::vector<double>> offsets(n_sources, std::vector<double>(n_features, 0.0));
    if (spec.delta_cov > 0) {
        Rng rng(Rng::derive(spec.seed, "offsets"));
        for (auto& offset : offsets) {
            offset = random_direction(rng, spec.n_features, spec.delta_cov);
        }
    }

    std::vector<std::vector<double>> prevalence = spec.prevalence;
    if (prevalence.empty()) {
        Rng rng(Rng::derive(spec.seed, "prevalence"));
        prevalence.assign(n_sources, std::vector<double>(n_labels, 0.0));
        for (std::size_t s = 0; s < n_sources; ++s) {
            for (std::size_t l = 0; l < n_labels; ++l) {
                prevalence[s][l] =
                    std::clamp(base[l] + spec.delta_prior * rng.uniform(-1.0, 1.0), 0.02, 0.98);
            }
        }
    }

    std::vector<std::string> labels;
    labels.reserve(n_labels);
    for (std::size_t l = 0; l < n_labels; ++l) labels.push_back(label_code(static_cast<int>(l)));

    std::vector<Record> records;
    records.reserve(n_sources * static_cast<std::size_t>(spec.records_per_source));
    for (std::size_t s = 0; s < n_sources; ++s) {
        Rng rng(Rng::derive(spec.seed, 1000 + s)); // independent stream per source
        const std::string source_id = "source_" + std::to_string(s);
        for (int r = 0; r < spec.records_per_source; ++r) {
            Record rec;
            rec.record_id = source_id + "_r" + std::to_string(r);
            rec.source_id = source_id;

            std::vector<std::uint8_t> y(n_labels, 0);
            for (std::size_t l = 0; l < n_labels; ++l) {
                y[l] = rng.bernoulli(prevalence[s][l]) ? 1 : 0;
                if (y[l]) rec.labels.insert(labels[l]);
            }
            rec.normal_flag = rec.labels.empty();

            FeatureVector fv;
            fv.values.assign(n_features, 0.0);
            for (std::size_t l = 0; l < n_labels; ++l) {
                if (!y[l]) continue;
                for (std::size_t fidx = 0; fidx < n_features; ++fidx) {
                    fv.values[fidx] += effects[l][fidx];
                }
            }
            for (std::size_t fidx = 0; fidx < n_features; ++fidx) {
                fv.values[fidx] += offsets[s][fidx] + spec.noise_std * rng.normal();
            }
            rec.payload = std::move(fv);

            rec.age = std::floor(rng.uniform(20.0, 91.0));
            rec.sex = rng.bernoulli(0.5) ? Sex::male : Sex::female;
            records.push_back(std::move(rec));
        }
    }

    return Dataset(std::move(records), LabelSpace(std::move(labels)));
}

SynthPreset synth_preset_from_string(const std::string& name) {
    if (name == "no_shift") return SynthPreset::no_shift;
    if (name == "label_shift") return SynthPreset::label_shift;
    if (name == "covariate_shift") return SynthPreset::covariate_shift;
    if (name == "both") return SynthPreset::both;
    throw ConfigError("unknown preset: '" + name + "'");
}

std::string to_string(SynthPreset preset) {
    switch (preset) {
    case SynthPreset::no_shift: return "no_shift";
    case SynthPreset::label_shift: return "label_shift";
    case SynthPreset::covariate_shift: return "covariate_shift";
    case SynthPreset::both: return "both";
    }
    return "?";
}

SynthSpec preset(SynthPreset which) {
    SynthSpec spec; // 5 x 2000, 8 labels, 24 features by default
    switch (which) {
    case SynthPreset::no_shift:
        break;
    case SynthPreset::label_shift:
        spec.delta_prior = 0.18;
        break;
    case SynthPreset::covariate_shift:
        spec.delta_cov = 4.0;
        break;
    case SynthPreset::both:
        spec.delta_prior = 0.18;
        spec.delta_cov = 4.0;
        break;
    }
    return spec;
}

nlohmann::json SynthSpec::to_json() const {
    nlohmann::json j{{"n_sources", n_sources},
                     {"records_per_source", records_per_source},
                     {"n_labels", n_labels},
                     {"n_features", n_features},
                     {"delta_prior", delta_prior},
                     {"delta_cov", delta_cov},
                     {"effect_scale", effect_scale},
                     {"noise_std", noise_std},
                     {"seed", seed}};
    if (!base_prevalence.empty()) j["base_prevalence"] = base_prevalence;
    if (!prevalence.empty()) j["prevalence"] = prevalence;
    if (!label_effects.empty()) j["label_effects"] = label_effects;
    return j;
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
    SynthSpec spec;
    if (j.contains("preset")) {
        spec = preset(synth_preset_from_string(j.at("preset").get<std::string>()));
    }
    auto load = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    load("n_sources", spec.n_sources);
    load("records_per_source", spec.records_per_source);
    load("n_labels", spec.n_labels);
    load("n_features", spec.n_features);
    load("base_prevalence", spec.base_prevalence);
    load("prevalence", spec.prevalence);
    load("delta_prior", spec.delta_prior);
    load("delta_cov", spec.delta_cov);
    load("label_effects", spec.label_effects);
    load("effect_scale", spec.effect_scale);
    load("noise_std", spec.noise_std);
    load("seed", spec.seed);
    spec.validate();
    return spec;
}

} // namespace sourcecv
