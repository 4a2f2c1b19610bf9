#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fedicu/client.hpp"
#include "fedicu/cohort.hpp"
#include "fedicu/csv_io.hpp"
#include "fedicu/federation.hpp"
#include "fedicu/metrics.hpp"
#include "fedicu/splits.hpp"
#include "fedicu/trainer.hpp"

// The full evaluation protocol: stratified k-fold cross-validation where each
// fold's test split is shared byte-for-byte by all three approaches, every
// approach starts from the same initial weights, and AUPRC/F1 are aggregated
// over the per-approach model populations (1 centralized model per fold, K
// local models per fold, 1 global federated model per fold).

namespace fedicu {

struct MatrixConfig {
    std::vector<ModelFamily> families = {ModelFamily::lstm};
    std::vector<int> windows = {8};
    std::vector<std::size_t> client_counts = {4};  // K values for LML and FL
    int folds = 5;
    double val_fraction = 0.15;
    std::size_t base_batch = 64;  // centralized batch; clients use base/K
    TrainConfig train;            // epochs/lr/patience for CML and LML
    FederationConfig federation;  // rounds/lr/patience for FL
    int local_epochs = 1;
    double skew = 0.0;
    std::uint64_t seed = 0;
    int jobs = 1;

    void validate() const {
        if (families.empty()) throw ConfigError("matrix: no model families");
        if (windows.empty()) throw ConfigError("matrix: no windows");
        if (folds < 2) throw ConfigError("matrix: folds must be >= 2");
        if (val_fraction <= 0.0 || val_fraction >= 1.0)
            throw ConfigError("matrix: validation fraction must be in (0,1)");
        if (base_batch < 1) throw ConfigError("matrix: batch must be >= 1");
        if (local_epochs < 1) throw ConfigError("matrix: local epochs must be >= 1");
        if (jobs < 1) throw ConfigError("matrix: jobs must be >= 1");
        for (int w : windows) require_window(w);
        for (std::size_t k : client_counts)
            if (k < 1) throw ConfigError("matrix: client counts must be >= 1");
        train.validate();
        federation.validate();
    }
};

// Scores of one approach within one (family, window, fold) job. LML carries K
// entries (ascending client id); CML and FL carry one.
struct ArmScores {
    std::vector<double> auprc_values;
    std::vector<double> f1_values;
    bool failed = false;
    std::string error;
};

struct CellResult {
    std::string approach;  // "CML", "LML4", "FL4", ...
    ModelFamily family = ModelFamily::lstm;
    int window = 0;
    std::size_t clients = 0;  // 0 for CML
    std::vector<double> auprc_values;
    std::vector<double> f1_values;
    bool failed = false;
    std::string error;
};

struct ExperimentReport {
    std::vector<CellResult> cells;

    std::string to_csv() const;
    std::string to_markdown() const;
};

namespace detail {

inline std::string approach_name(const std::string& base, std::size_t k) {
    return k == 0 ? base : base + std::to_string(k);
}

inline std::vector<const PatientRecord*> record_ptrs(const std::vector<PatientRecord>& records,
                                                     const std::vector<std::size_t>& indices) {
    std::vector<const PatientRecord*> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(&records[i]);
    return out;
}

inline std::vector<int> subset_labels(const std::vector<int>& labels,
                                      const std::vector<std::size_t>& indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(labels[i]);
    return out;
}

struct FoldJobResult {
    ArmScores cml;
    std::map<std::size_t, ArmScores> lml;  // by K
    std::map<std::size_t, ArmScores> fl;
};

// Seed-stream tokens for the independent random decisions of a run.
inline constexpr std::uint64_t kTokFolds = 0xF01D5EEDULL;
inline constexpr std::uint64_t kTokSubSplit = 0x5AB5EEDULL;
inline constexpr std::uint64_t kTokPartition = 0xC11E9A5ULL;
inline constexpr std::uint64_t kTokInit = 0x1A171ULL;
inline constexpr std::uint64_t kTokTrain = 0x7EA1ULL;

// One (family, window, fold) job: preprocess, then run all three approaches
// against the shared test split from identical initial weights.
inline FoldJobResult run_fold_job(const std::vector<PatientRecord>& records,
                                  const std::vector<int>& labels, const SplitPlan& plan,
                                  std::size_t family_index, ModelFamily family, int window,
                                  int fold, const MatrixConfig& config) {
    FoldJobResult result;
    const ArchitectureSpec arch = build_architecture(family, window);
    const std::uint64_t cell_seed = mix_seed(config.seed, family_index,
                                             static_cast<std::uint64_t>(window),
                                             static_cast<std::uint64_t>(fold));
    const ParameterSet init = init_parameters(arch, mix_seed(cell_seed, kTokInit));

    const std::vector<std::size_t> test_idx = plan.test_indices(fold);
    const std::vector<std::size_t> trainval_idx = plan.trainval_indices(fold);
    const std::vector<int> test_labels = subset_labels(labels, test_idx);
    const auto test_ptrs = record_ptrs(records, test_idx);

    // Centralized: one model on the pooled 85/15 split, global stats.
    try {
        const TrainValSplit tv =
            split_train_val(trainval_idx, labels, config.val_fraction,
                            mix_seed(cell_seed, kTokSubSplit, 0));
        Preprocessor prep;
        prep.fit(record_ptrs(records, tv.train), window);
        const Dataset train_ds = Dataset::from_samples(prep.transform(record_ptrs(records, tv.train)));
        const Dataset val_ds = Dataset::from_samples(prep.transform(record_ptrs(records, tv.val)));
        const Dataset test_ds = Dataset::from_samples(prep.transform(test_ptrs));

        TrainConfig tc = config.train;
        tc.batch_size = std::min(config.base_batch, train_ds.size());
        tc.seed = mix_seed(cell_seed, kTokTrain);
        tc.shuffle_token = 0;
        const TrainOutcome outcome = train(arch, init, train_ds, val_ds, tc);
        const std::vector<double> scores = predict_scores(arch, outcome.best_params, test_ds);
        result.cml.auprc_values.push_back(auprc(scores, test_labels));
        result.cml.f1_values.push_back(f1_score(scores, test_labels));
    } catch (const std::exception& e) {
        result.cml.failed = true;
        result.cml.error = "fold " + std::to_string(fold) + ": " + e.what();
    }

    for (std::size_t k : config.client_counts) {
        ArmScores lml, fl;
        try {
            // LML and FL share the client partition and per-client sub-splits.
            const std::vector<int> tv_labels = subset_labels(labels, trainval_idx);
            const auto shards_local =
                partition_clients(tv_labels, k, config.skew,
                                  mix_seed(cell_seed, kTokPartition, k));
            const std::size_t client_batch = client_batch_size(config.base_batch, k);

            std::vector<Dataset> client_train, client_val;
            std::vector<Preprocessor> client_prep(k);
            std::vector<std::size_t> client_sizes;
            for (std::size_t c = 0; c < k; ++c) {
                std::vector<std::size_t> shard_global;
                shard_global.reserve(shards_local[c].size());
                for (std::size_t j : shards_local[c]) shard_global.push_back(trainval_idx[j]);
                const TrainValSplit tv =
                    split_train_val(shard_global, labels, config.val_fraction,
                                    mix_seed(cell_seed, kTokSubSplit, mix_seed(k, c)));
                client_prep[c].fit(record_ptrs(records, tv.train), window);
                client_train.push_back(Dataset::from_samples(
                    client_prep[c].transform(record_ptrs(records, tv.train))));
                client_val.push_back(Dataset::from_samples(
                    client_prep[c].transform(record_ptrs(records, tv.val))));
                client_sizes.push_back(client_train.back().size());
            }

            // Local-only: K independent models, each scored on the shared
            // test fold normalized with its own client's statistics.
            try {
                for (std::size_t c = 0; c < k; ++c) {
                    TrainConfig tc = config.train;
                    tc.batch_size = client_batch;
                    if (tc.batch_size > client_train[c].size())
                        tc.batch_size = client_train[c].size();
                    tc.seed = mix_seed(cell_seed, kTokTrain);
                    tc.shuffle_token = c;
                    const TrainOutcome outcome =
                        train(arch, init, client_train[c], client_val[c], tc);
                    const Dataset test_ds =
                        Dataset::from_samples(client_prep[c].transform(test_ptrs));
                    const std::vector<double> scores =
                        predict_scores(arch, outcome.best_params, test_ds);
                    lml.auprc_values.push_back(auprc(scores, test_labels));
                    lml.f1_values.push_back(f1_score(scores, test_labels));
                }
            } catch (const std::exception& e) {
                lml.failed = true;
                lml.error = "fold " + std::to_string(fold) + ": " + e.what();
            }

            // Federated: one global model, scored on the test fold normalized
            // with the size-weighted pooled client statistics.
            try {
                std::vector<std::unique_ptr<SimulatedClient>> clients;
                std::vector<FederatedClient*> views;
                for (std::size_t c = 0; c < k; ++c) {
                    const std::size_t batch = std::min(client_batch, client_train[c].size());
                    clients.push_back(std::make_unique<SimulatedClient>(
                        c, arch, client_train[c], client_val[c], batch,
                        config.local_epochs, mix_seed(cell_seed, kTokTrain)));
                    views.push_back(clients.back().get());
                }
                const FederationOutcome outcome =
                    run_federation(init, views, config.federation);

                std::vector<const Preprocessor*> preps;
                for (const Preprocessor& p : client_prep) preps.push_back(&p);
                const Preprocessor pooled = Preprocessor::pooled(preps, client_sizes);
                const Dataset test_ds = Dataset::from_samples(pooled.transform(test_ptrs));
                const std::vector<double> scores =
                    predict_scores(arch, outcome.best_params, test_ds);
                fl.auprc_values.push_back(auprc(scores, test_labels));
                fl.f1_values.push_back(f1_score(scores, test_labels));
            } catch (const std::exception& e) {
                fl.failed = true;
                fl.error = "fold " + std::to_string(fold) + ": " + e.what();
            }
        } catch (const std::exception& e) {
            // Partition or preprocessing failure takes down both arms.
            lml.failed = fl.failed = true;
            lml.error = fl.error = "fold " + std::to_string(fold) + ": " + e.what();
        }
        result.lml.emplace(k, std::move(lml));
        result.fl.emplace(k, std::move(fl));
    }
    return result;
}

inline void merge_arm(CellResult& cell, const ArmScores& arm) {
    if (arm.failed) {
        cell.failed = true;
        if (!cell.error.empty()) cell.error += "; ";
        cell.error += arm.error;
        return;
    }
    cell.auprc_values.insert(cell.auprc_values.end(), arm.auprc_values.begin(),
                             arm.auprc_values.end());
    cell.f1_values.insert(cell.f1_values.end(), arm.f1_values.begin(), arm.f1_values.end());
}

}  // namespace detail

// Runs every (family, window, fold) job — in parallel when jobs > 1; each job
// is internally deterministic and owns its result slot, so the assembled
// report does not depend on scheduling.
inline ExperimentReport run_experiment_matrix(const std::vector<PatientRecord>& records,
                                              const MatrixConfig& config) {
    config.validate();
    std::vector<int> labels;
    labels.reserve(records.size());
    for (const PatientRecord& r : records) labels.push_back(r.label);
    const SplitPlan plan =
        stratified_kfold(labels, config.folds, mix_seed(config.seed, detail::kTokFolds));

    struct JobSpec {
        std::size_t family_index;
        int window;
        int fold;
    };
    std::vector<JobSpec> jobs;
    for (std::size_t f = 0; f < config.families.size(); ++f)
        for (int w : config.windows)
            for (int fold = 0; fold < config.folds; ++fold) jobs.push_back({f, w, fold});

    std::vector<detail::FoldJobResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::string abort_message;
    std::mutex abort_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size() || abort.load()) return;
            const JobSpec& job = jobs[j];
            log_info("matrix job: family " +
                     std::string(family_name(config.families[job.family_index])) + ", window " +
                     std::to_string(job.window) + "h, fold " + std::to_string(job.fold));
            try {
                results[j] = detail::run_fold_job(records, labels, plan, job.family_index,
                                                  config.families[job.family_index], job.window,
                                                  job.fold, config);
            } catch (const std::exception& e) {
                // Job-level failures outside the per-arm guards are fatal
                // setup errors, not numeric divergence; stop the matrix.
                std::lock_guard<std::mutex> lock(abort_mutex);
                abort.store(true);
                if (abort_message.empty()) abort_message = e.what();
                return;
            }
        }
    };
    const std::size_t worker_count =
        std::min<std::size_t>(static_cast<std::size_t>(config.jobs), jobs.size());
    if (worker_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < worker_count; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (abort.load()) throw ConfigError("experiment matrix aborted: " + abort_message);

    // Assemble cells in canonical order: family, window, then CML and each
    // K's LML/FL pair; fold values appear in fold order.
    ExperimentReport report;
    for (std::size_t f = 0; f < config.families.size(); ++f) {
        for (int w : config.windows) {
            auto job_at = [&](int fold) -> const detail::FoldJobResult& {
                for (std::size_t j = 0; j < jobs.size(); ++j) {
                    if (jobs[j].family_index == f && jobs[j].window == w && jobs[j].fold == fold)
                        return results[j];
                }
                throw ContractError("experiment matrix: missing job result");
            };
            CellResult cml;
            cml.approach = "CML";
            cml.family = config.families[f];
            cml.window = w;
            for (int fold = 0; fold < config.folds; ++fold)
                detail::merge_arm(cml, job_at(fold).cml);
            report.cells.push_back(std::move(cml));
            for (std::size_t k : config.client_counts) {
                CellResult lml, fl;
                lml.approach = detail::approach_name("LML", k);
                fl.approach = detail::approach_name("FL", k);
                lml.family = fl.family = config.families[f];
                lml.window = fl.window = w;
                lml.clients = fl.clients = k;
                for (int fold = 0; fold < config.folds; ++fold) {
                    detail::merge_arm(lml, job_at(fold).lml.at(k));
                    detail::merge_arm(fl, job_at(fold).fl.at(k));
                }
                report.cells.push_back(std::move(lml));
                report.cells.push_back(std::move(fl));
            }
        }
    }
    return report;
}

inline std::string ExperimentReport::to_csv() const {
    std::ostringstream out;
    out << "approach,family,window_hours,clients,metric,status,n_models,mean,std,values,error\n";
    auto emit = [&](const CellResult& c, const std::string& metric,
                    const std::vector<double>& values) {
        out << c.approach << ',' << family_name(c.family) << ',' << c.window << ','
            << c.clients << ',' << metric << ',';
        if (c.failed) {
            std::string msg = c.error;
            for (char& ch : msg)
                if (ch == ',' || ch == '\n') ch = ';';
            out << "failed,0,,,," << msg << '\n';
            return;
        }
        const MeanStd agg = mean_std(values);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", agg.mean);
        out << "ok," << agg.n << ',' << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", agg.stddev);
        out << buf << ',';
        for (std::size_t i = 0; i < values.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
            out << (i ? ";" : "") << buf;
        }
        out << ",\n";
    };
    for (const CellResult& c : cells) {
        emit(c, "auprc", c.auprc_values);
        emit(c, "f1", c.f1_values);
    }
    return out.str();
}

// Inverse of to_csv(), for re-rendering an existing report.
inline ExperimentReport report_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) ||
        line !=
            "approach,family,window_hours,clients,metric,status,n_models,mean,std,values,error")
        throw ConfigError("report: unrecognized CSV header");
    ExperimentReport report;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                fields.push_back(cur);
                cur.clear();
            } else if (ch != '\r') {
                cur.push_back(ch);
            }
        }
        fields.push_back(cur);
        const std::string context = "report csv line " + std::to_string(line_no);
        if (fields.size() != 11) throw ConfigError(context + ": expected 11 fields");
        const bool same_cell = !report.cells.empty() &&
                               report.cells.back().approach == fields[0] &&
                               family_name(report.cells.back().family) == fields[1] &&
                               std::to_string(report.cells.back().window) == fields[2] &&
                               std::to_string(report.cells.back().clients) == fields[3];
        if (!same_cell) {
            CellResult cell;
            cell.approach = fields[0];
            cell.family = parse_family(fields[1]);
            try {
                cell.window = std::stoi(fields[2]);
                cell.clients = static_cast<std::size_t>(std::stoull(fields[3]));
            } catch (const std::exception&) {
                throw ConfigError(context + ": bad window or client count");
            }
            report.cells.push_back(std::move(cell));
        }
        CellResult& cell = report.cells.back();
        if (fields[5] == "failed") {
            cell.failed = true;
            if (cell.error.empty()) cell.error = fields[10];
            continue;
        }
        std::vector<double> values;
        std::string num;
        std::istringstream vs(fields[9]);
        while (std::getline(vs, num, ';')) {
            if (num.empty()) continue;
            try {
                values.push_back(std::stod(num));
            } catch (const std::exception&) {
                throw ConfigError(context + ": bad metric value '" + num + "'");
            }
        }
        if (fields[4] == "auprc")
            cell.auprc_values = std::move(values);
        else if (fields[4] == "f1")
            cell.f1_values = std::move(values);
        else
            throw ConfigError(context + ": unknown metric '" + fields[4] + "'");
    }
    return report;
}

inline std::string ExperimentReport::to_markdown() const {
    std::ostringstream out;
    out << "# Experiment report\n";
    // Group rows by window; one table per window with a column pair per family.
    std::vector<int> windows;
    std::vector<ModelFamily> families;
    std::vector<std::string> approaches;
    for (const CellResult& c : cells) {
        if (std::find(windows.begin(), windows.end(), c.window) == windows.end())
            windows.push_back(c.window);
        if (std::find(families.begin(), families.end(), c.family) == families.end())
            families.push_back(c.family);
        if (std::find(approaches.begin(), approaches.end(), c.approach) == approaches.end())
            approaches.push_back(c.approach);
    }
    auto find_cell = [&](const std::string& approach, ModelFamily fam,
                         int window) -> const CellResult* {
        for (const CellResult& c : cells)
            if (c.approach == approach && c.family == fam && c.window == window) return &c;
        return nullptr;
    };
    for (int w : windows) {
        out << "\n## Window " << w << "h\n\n| Approach |";
        for (ModelFamily fam : families)
            out << ' ' << family_name(fam) << " AUPRC | " << family_name(fam) << " F1 |";
        out << "\n|---|";
        for (std::size_t i = 0; i < families.size(); ++i) out << "---|---|";
        out << '\n';
        for (const std::string& approach : approaches) {
            bool any = false;
            for (ModelFamily fam : families)
                if (find_cell(approach, fam, w)) any = true;
            if (!any) continue;
            out << "| " << approach << " |";
            for (ModelFamily fam : families) {
                const CellResult* c = find_cell(approach, fam, w);
                if (!c) {
                    out << " - | - |";
                } else if (c->failed) {
                    out << " failed | failed |";
                } else {
                    char buf[64];
                    const MeanStd a = mean_std(c->auprc_values);
                    const MeanStd f1 = mean_std(c->f1_values);
                    std::snprintf(buf, sizeof(buf), " %.2f ± %.2f |", a.mean, a.stddev);
                    out << buf;
                    std::snprintf(buf, sizeof(buf), " %.2f ± %.2f |", f1.mean, f1.stddev);
                    out << buf;
                }
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace fedicu
