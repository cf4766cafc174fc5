#include "sourcecv/splits.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

#include "sourcecv/csv.hpp"
#include "sourcecv/rng.hpp"

namespace sourcecv {

std::string to_string(SplitKind kind) {
    switch (kind) {
    case SplitKind::stratified_kfold: return "stratified_kfold";
    case SplitKind::leave_source_out: return "leave_source_out";
    case SplitKind::holdout: return "holdout";
    }
    return "?";
}

std::vector<std::size_t> FoldPlan::fold_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::complement_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(n_folds), 0);
    for (const int f : assignment) sizes[static_cast<std::size_t>(f)] += 1;
    return sizes;
}

void FoldPlan::validate() const {
    if (n_folds < 1) throw std::logic_error("fold plan: n_folds < 1");
    for (const int f : assignment) {
        if (f < 0 || f >= n_folds) {
            throw std::logic_error("fold plan: assignment outside 0..n_folds-1");
        }
    }
    if (kind == SplitKind::leave_source_out &&
        fold_source.size() != static_cast<std::size_t>(n_folds)) {
        throw std::logic_error("fold plan: fold_source size mismatch");
    }
}

FoldPlan stratified_kfold(const LabelMatrix& lm, int k, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(lm.rows());
    const auto n_labels = static_cast<std::size_t>(lm.cols());
    if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
    if (static_cast<std::size_t>(k) > n) {
        throw std::invalid_argument("stratified_kfold: k exceeds the number of records");
    }

    Rng rng(Rng::derive(seed, "stratified_kfold"));

    std::vector<int> assignment(n, -1);
    std::vector<double> capacity(static_cast<std::size_t>(k), static_cast<double>(n) / k);

    // remaining per-fold quota for each label, and remaining unassigned positives
    std::vector<std::vector<double>> quota(static_cast<std::size_t>(k),
                                           std::vector<double>(n_labels, 0.0));
    std::vector<std::size_t> remaining(n_labels, 0);
    for (std::size_t l = 0; l < n_labels; ++l) {
        std::size_t count = 0;
        for (std::size_t r = 0; r < n; ++r) count += lm.values(static_cast<Eigen::Index>(r),
                                                               static_cast<Eigen::Index>(l)) != 0;
        remaining[l] = count;
        for (int f = 0; f < k; ++f) quota[static_cast<std::size_t>(f)][l] = static_cast<double>(count) / k;
    }

    auto pick_fold = [&](auto key) {
        std::vector<int> best;
        for (int f = 0; f < k; ++f) {
            if (best.empty()) {
                best.push_back(f);
                continue;
            }
            const auto cmp = key(f) <=> key(best.front());
            if (cmp > 0) {
                best.assign(1, f);
            } else if (cmp == 0) {
                best.push_back(f);
            }
        }
        if (best.size() == 1) return best.front();
        return best[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(best.size()) - 1))];
    };

    auto assign = [&](std::size_t rec, int fold) {
        assignment[rec] = fold;
        capacity[static_cast<std::size_t>(fold)] -= 1.0;
        for (std::size_t l = 0; l < n_labels; ++l) {
            if (lm.values(static_cast<Eigen::Index>(rec), static_cast<Eigen::Index>(l)) != 0) {
                quota[static_cast<std::size_t>(fold)][l] -= 1.0;
                remaining[l] -= 1;
            }
        }
    };

    for (;;) {
        // rarest label with unassigned positives
        std::size_t target = n_labels;
        for (std::size_t l = 0; l < n_labels; ++l) {
            if (remaining[l] == 0) continue;
            if (target == n_labels || remaining[l] < remaining[target]) target = l;
        }
        if (target == n_labels) break;

        for (std::size_t rec = 0; rec < n; ++rec) {
            if (assignment[rec] != -1) continue;
            if (lm.values(static_cast<Eigen::Index>(rec), static_cast<Eigen::Index>(target)) == 0) continue;
            const int fold = pick_fold([&](int f) {
                return std::make_pair(quota[static_cast<std::size_t>(f)][target],
                                      capacity[static_cast<std::size_t>(f)]);
            });
            assign(rec, fold);
        }
    }

    // records with no labels: by remaining capacity only
    for (std::size_t rec = 0; rec < n; ++rec) {
        if (assignment[rec] != -1) continue;
        const int fold = pick_fold([&](int f) { return capacity[static_cast<std::size_t>(f)]; });
        assign(rec, fold);
    }

    FoldPlan plan;
    plan.n_folds = k;
    plan.assignment = std::move(assignment);
    plan.kind = SplitKind::stratified_kfold;
    plan.seed = seed;
    plan.validate();
    return plan;
}

FoldPlan leave_source_out(const std::vector<std::string>& source_of_record) {
    std::vector<std::string> ids = source_of_record;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) {
        throw std::invalid_argument("leave_source_out: dataset has a single source");
    }
    std::map<std::string, int> fold_of;
    for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = static_cast<int>(i);

    FoldPlan plan;
    plan.n_folds = static_cast<int>(ids.size());
    plan.kind = SplitKind::leave_source_out;
    plan.fold_source = std::move(ids);
    plan.assignment.resize(source_of_record.size());
    for (std::size_t r = 0; r < source_of_record.size(); ++r) {
        plan.assignment[r] = fold_of.at(source_of_record[r]);
    }
    plan.validate();
    return plan;
}

FoldPlan leave_source_out(const Dataset& ds) {
    std::vector<std::string> sources;
    sources.reserve(ds.size());
    for (const auto& rec : ds.records()) sources.push_back(rec.source_id);
    return leave_source_out(sources);
}

FoldPlan stratified_holdout(const Dataset& ds, double train_frac, StratifyBy by,
                            std::uint64_t seed, std::vector<std::string>* warnings) {
    (void)by; // only source stratification exists
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
        throw std::invalid_argument("stratified_holdout: train_frac must be in (0, 1)");
    }

    FoldPlan plan;
    plan.n_folds = 2;
    plan.kind = SplitKind::holdout;
    plan.seed = seed;
    plan.assignment.assign(ds.size(), 0);

    std::map<std::string, std::vector<std::size_t>> by_source;
    for (std::size_t r = 0; r < ds.size(); ++r) by_source[ds.record(r).source_id].push_back(r);

    for (auto& [source, idx] : by_source) {
        if (idx.size() < 2) {
            if (warnings) {
                warnings->push_back("source '" + source +
                                    "' has fewer than 2 records; all assigned to train");
            }
            continue;
        }
        Rng rng(Rng::derive(Rng::derive(seed, "holdout"), source));
        rng.shuffle(idx);
        const auto n_train = static_cast<std::size_t>(
            std::llround(train_frac * static_cast<double>(idx.size())));
        for (std::size_t i = n_train; i < idx.size(); ++i) plan.assignment[idx[i]] = 1;
    }

    plan.validate();
    return plan;
}

void save_fold_plan(const Dataset& ds, const FoldPlan& plan, const std::filesystem::path& path) {
    if (plan.size() != ds.size()) {
        throw std::invalid_argument("save_fold_plan: plan does not match dataset size");
    }
    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r) {
        rows.push_back({ds.record(r).record_id, std::to_string(plan.assignment[r])});
    }
    write_csv(path, {"record_id", "fold"}, rows);
}

} // namespace sourcecv
