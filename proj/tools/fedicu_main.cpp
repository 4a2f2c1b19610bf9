// Command-line entry point: generate synthetic cohorts, run centralized /
// local / federated training, sweep the full experiment matrix, and render
// reports. Everything is seed-deterministic; outputs carry no timestamps.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedicu/client.hpp"
#include "fedicu/cohort.hpp"
#include "fedicu/config.hpp"
#include "fedicu/csv_io.hpp"
#include "fedicu/experiment.hpp"
#include "fedicu/federation.hpp"
#include "fedicu/log.hpp"
#include "fedicu/metrics.hpp"
#include "fedicu/splits.hpp"
#include "fedicu/trainer.hpp"

namespace fs = std::filesystem;
using namespace fedicu;

namespace {

struct Settings {
    // data (empty = generate a synthetic cohort in-process)
    std::string events_path, labels_path;
    // cohort
    std::size_t patients = 2000;
    double positive_fraction = 0.0975;
    double skew = 0.0;
    double signal_strength = 1.0;
    double signal_hours = 48.0;
    double variance_inflation = 0.5;
    double duration_min = 48.0, duration_max = 72.0;
    double vital_rate_min = 0.5, vital_rate_max = 1.5;
    double lab_rate_min = 1.0, lab_rate_max = 2.0;
    // run
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out;
    // training (CML/LML)
    std::size_t batch = 64;
    double lr = 0.01;
    int patience = 30;
    int max_epochs = 100;
    bool fixed_lr = false;
    double decay_factor = 0.5;
    int decay_every = 5;
    // federation
    std::vector<std::size_t> clients;
    bool clients_set = false;
    int max_rounds = 100;
    int local_epochs = 1;
    double fed_lr = 0.01;
    int fed_patience = 30;
    bool fed_fixed_lr = true;
    bool size_weighted_loss = false;
    // matrix
    std::vector<std::string> families;
    bool families_set = false;
    std::vector<int> windows;
    bool windows_set = false;
    int folds = 5;
    double val_fraction = 0.15;
};

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "data.events", "data.labels",
        "cohort.patients", "cohort.positive_fraction", "cohort.skew",
        "cohort.signal_strength", "cohort.signal_hours", "cohort.variance_inflation",
        "cohort.duration_min", "cohort.duration_max",
        "cohort.vital_rate_min", "cohort.vital_rate_max",
        "cohort.lab_rate_min", "cohort.lab_rate_max",
        "run.seed", "run.jobs", "run.out",
        "train.batch", "train.lr", "train.patience", "train.max_epochs",
        "train.fixed_lr", "train.decay_factor", "train.decay_every",
        "federation.clients", "federation.max_rounds", "federation.local_epochs",
        "federation.lr", "federation.patience", "federation.fixed_lr",
        "federation.size_weighted_loss",
        "matrix.families", "matrix.windows", "matrix.folds", "matrix.val_fraction",
    };
    return keys;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

template <typename T>
std::string join_list(const std::vector<T>& values) {
    std::ostringstream out;
    for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
    return out.str();
}

void apply_config_map(const ConfigMap& m, const std::string& origin, Settings& s) {
    require_known_keys(m, known_keys(), origin);
    s.events_path = config_string(m, "data.events", s.events_path);
    s.labels_path = config_string(m, "data.labels", s.labels_path);
    s.patients = static_cast<std::size_t>(
        config_int(m, "cohort.patients", static_cast<long long>(s.patients)));
    s.positive_fraction = config_double(m, "cohort.positive_fraction", s.positive_fraction);
    s.skew = config_double(m, "cohort.skew", s.skew);
    s.signal_strength = config_double(m, "cohort.signal_strength", s.signal_strength);
    s.signal_hours = config_double(m, "cohort.signal_hours", s.signal_hours);
    s.variance_inflation = config_double(m, "cohort.variance_inflation", s.variance_inflation);
    s.duration_min = config_double(m, "cohort.duration_min", s.duration_min);
    s.duration_max = config_double(m, "cohort.duration_max", s.duration_max);
    s.vital_rate_min = config_double(m, "cohort.vital_rate_min", s.vital_rate_min);
    s.vital_rate_max = config_double(m, "cohort.vital_rate_max", s.vital_rate_max);
    s.lab_rate_min = config_double(m, "cohort.lab_rate_min", s.lab_rate_min);
    s.lab_rate_max = config_double(m, "cohort.lab_rate_max", s.lab_rate_max);
    s.seed = static_cast<std::uint64_t>(
        config_int(m, "run.seed", static_cast<long long>(s.seed)));
    s.jobs = static_cast<int>(config_int(m, "run.jobs", s.jobs));
    s.out = config_string(m, "run.out", s.out);
    s.batch = static_cast<std::size_t>(
        config_int(m, "train.batch", static_cast<long long>(s.batch)));
    s.lr = config_double(m, "train.lr", s.lr);
    s.patience = static_cast<int>(config_int(m, "train.patience", s.patience));
    s.max_epochs = static_cast<int>(config_int(m, "train.max_epochs", s.max_epochs));
    s.fixed_lr = config_bool(m, "train.fixed_lr", s.fixed_lr);
    s.decay_factor = config_double(m, "train.decay_factor", s.decay_factor);
    s.decay_every = static_cast<int>(config_int(m, "train.decay_every", s.decay_every));
    if (m.count("federation.clients")) {
        s.clients.clear();
        for (const std::string& c : split_list(m.at("federation.clients")))
            s.clients.push_back(static_cast<std::size_t>(std::stoull(c)));
        s.clients_set = true;
    }
    s.max_rounds = static_cast<int>(config_int(m, "federation.max_rounds", s.max_rounds));
    s.local_epochs = static_cast<int>(config_int(m, "federation.local_epochs", s.local_epochs));
    s.fed_lr = config_double(m, "federation.lr", s.fed_lr);
    s.fed_patience = static_cast<int>(config_int(m, "federation.patience", s.fed_patience));
    s.fed_fixed_lr = config_bool(m, "federation.fixed_lr", s.fed_fixed_lr);
    s.size_weighted_loss =
        config_bool(m, "federation.size_weighted_loss", s.size_weighted_loss);
    if (m.count("matrix.families")) {
        s.families = split_list(m.at("matrix.families"));
        s.families_set = true;
    }
    if (m.count("matrix.windows")) {
        s.windows.clear();
        for (const std::string& w : split_list(m.at("matrix.windows")))
            s.windows.push_back(std::stoi(w));
        s.windows_set = true;
    }
    s.folds = static_cast<int>(config_int(m, "matrix.folds", s.folds));
    s.val_fraction = config_double(m, "matrix.val_fraction", s.val_fraction);
}

ConfigMap settings_to_map(const Settings& s) {
    ConfigMap m;
    auto put_d = [&](const std::string& k, double v) { m[k] = detail::format_double(v); };
    m["data.events"] = s.events_path;
    m["data.labels"] = s.labels_path;
    m["cohort.patients"] = std::to_string(s.patients);
    put_d("cohort.positive_fraction", s.positive_fraction);
    put_d("cohort.skew", s.skew);
    put_d("cohort.signal_strength", s.signal_strength);
    put_d("cohort.signal_hours", s.signal_hours);
    put_d("cohort.variance_inflation", s.variance_inflation);
    put_d("cohort.duration_min", s.duration_min);
    put_d("cohort.duration_max", s.duration_max);
    put_d("cohort.vital_rate_min", s.vital_rate_min);
    put_d("cohort.vital_rate_max", s.vital_rate_max);
    put_d("cohort.lab_rate_min", s.lab_rate_min);
    put_d("cohort.lab_rate_max", s.lab_rate_max);
    m["run.seed"] = std::to_string(s.seed);
    m["run.jobs"] = std::to_string(s.jobs);
    m["run.out"] = s.out;
    m["train.batch"] = std::to_string(s.batch);
    put_d("train.lr", s.lr);
    m["train.patience"] = std::to_string(s.patience);
    m["train.max_epochs"] = std::to_string(s.max_epochs);
    m["train.fixed_lr"] = s.fixed_lr ? "true" : "false";
    put_d("train.decay_factor", s.decay_factor);
    m["train.decay_every"] = std::to_string(s.decay_every);
    m["federation.clients"] = join_list(s.clients);
    m["federation.max_rounds"] = std::to_string(s.max_rounds);
    m["federation.local_epochs"] = std::to_string(s.local_epochs);
    put_d("federation.lr", s.fed_lr);
    m["federation.patience"] = std::to_string(s.fed_patience);
    m["federation.fixed_lr"] = s.fed_fixed_lr ? "true" : "false";
    m["federation.size_weighted_loss"] = s.size_weighted_loss ? "true" : "false";
    m["matrix.families"] = join_list(s.families);
    m["matrix.windows"] = join_list(s.windows);
    m["matrix.folds"] = std::to_string(s.folds);
    put_d("matrix.val_fraction", s.val_fraction);
    return m;
}

CohortConfig cohort_config(const Settings& s) {
    CohortConfig c;
    c.patients = s.patients;
    c.positive_fraction = s.positive_fraction;
    c.seed = s.seed;
    c.skew = s.skew;
    c.signal_strength = s.signal_strength;
    c.signal_hours = s.signal_hours;
    c.variance_inflation = s.variance_inflation;
    c.duration_min = s.duration_min;
    c.duration_max = s.duration_max;
    c.vital_rate_min = s.vital_rate_min;
    c.vital_rate_max = s.vital_rate_max;
    c.lab_rate_min = s.lab_rate_min;
    c.lab_rate_max = s.lab_rate_max;
    return c;
}

TrainConfig train_config(const Settings& s) {
    TrainConfig t;
    t.max_epochs = s.max_epochs;
    t.batch_size = s.batch;
    t.learning_rate = s.lr;
    t.decay_factor = s.decay_factor;
    t.decay_every = s.decay_every;
    t.fixed_lr = s.fixed_lr;
    t.patience = s.patience;
    return t;
}

FederationConfig federation_config(const Settings& s) {
    FederationConfig f;
    f.max_rounds = s.max_rounds;
    f.learning_rate = s.fed_lr;
    f.fixed_lr = s.fed_fixed_lr;
    f.patience = s.fed_patience;
    f.size_weighted_loss = s.size_weighted_loss;
    return f;
}

std::vector<PatientRecord> load_records(const Settings& s) {
    if (!s.events_path.empty() || !s.labels_path.empty()) {
        if (s.events_path.empty() || s.labels_path.empty())
            throw ConfigError("loading a cohort needs both data.events and data.labels");
        log_info("loading cohort from " + s.events_path);
        return read_cohort_csv(s.events_path, s.labels_path);
    }
    log_info("generating synthetic cohort: " + std::to_string(s.patients) + " patients, seed " +
             std::to_string(s.seed));
    return generate_cohort(cohort_config(s));
}

std::vector<ModelFamily> resolve_families(const Settings& s, bool single) {
    std::vector<std::string> names = s.families;
    if (!s.families_set) names = single ? std::vector<std::string>{"lstm"}
                                        : std::vector<std::string>{"1dcnn", "frnn", "lstm", "gru"};
    std::vector<ModelFamily> out;
    for (const std::string& n : names) out.push_back(parse_family(n));
    if (out.empty()) throw ConfigError("no model families given");
    if (single && out.size() != 1)
        throw ConfigError("this command takes exactly one model family");
    return out;
}

std::vector<int> resolve_windows(const Settings& s, bool single) {
    std::vector<int> out = s.windows;
    if (!s.windows_set) out = single ? std::vector<int>{8} : std::vector<int>{8, 16, 24, 48};
    for (int w : out) require_window(w);
    if (out.empty()) throw ConfigError("no windows given");
    if (single && out.size() != 1) throw ConfigError("this command takes exactly one window");
    return out;
}

fs::path require_out(const Settings& s) {
    if (s.out.empty()) throw ConfigError("--out is required for this command");
    fs::path dir(s.out);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << content;
    if (!f) throw ConfigError("write failed for " + path.string());
}

void write_snapshot(const Settings& s, const fs::path& dir) {
    write_config_snapshot(settings_to_map(s), (dir / "config.resolved.txt").string());
}

std::string history_csv(const TrainOutcome& outcome) {
    std::ostringstream out;
    out << "epoch,lr,train_loss,val_loss\n";
    for (const EpochStat& e : outcome.history) {
        out << e.epoch << ',' << detail::format_double(e.lr) << ','
            << detail::format_double(e.train_loss) << ',' << detail::format_double(e.val_loss)
            << '\n';
    }
    return out.str();
}

std::string outcome_summary(const TrainOutcome& outcome, double val_auprc, double val_f1) {
    std::ostringstream out;
    out << "best_epoch=" << outcome.best_epoch << '\n'
        << "best_val_loss=" << detail::format_double(outcome.best_val_loss) << '\n'
        << "epochs_run=" << outcome.history.size() << '\n'
        << "stopped_early=" << (outcome.stopped_early ? "true" : "false") << '\n'
        << "val_auprc=" << detail::format_double(val_auprc) << '\n'
        << "val_f1=" << detail::format_double(val_f1) << '\n';
    return out.str();
}

int cmd_generate(const Settings& s) {
    const fs::path dir = require_out(s);
    const std::vector<PatientRecord> records = generate_cohort(cohort_config(s));
    write_cohort_csv(records, (dir / "events.csv").string(), (dir / "labels.csv").string());
    write_snapshot(s, dir);
    std::size_t events = 0;
    for (const PatientRecord& r : records)
        for (const auto& series : r.events) events += series.size();
    log_info("wrote " + std::to_string(records.size()) + " patients, " +
             std::to_string(events) + " events to " + dir.string());
    return 0;
}

// Trains one model on the given record subset and writes history, checkpoint,
// and validation metrics under the file stem.
void run_train_arm(const Settings& s, const ArchitectureSpec& arch, const ParameterSet& init,
                   const std::vector<PatientRecord>& records, const std::vector<int>& labels,
                   const std::vector<std::size_t>& indices, std::size_t batch,
                   std::uint64_t shuffle_token, std::uint64_t split_salt, const fs::path& dir,
                   const std::string& stem) {
    const TrainValSplit tv = split_train_val(
        indices, labels, s.val_fraction, mix_seed(s.seed, detail::kTokSubSplit, split_salt));
    Preprocessor prep;
    prep.fit(detail::record_ptrs(records, tv.train), arch.window_hours);
    const Dataset train_ds =
        Dataset::from_samples(prep.transform(detail::record_ptrs(records, tv.train)));
    const Dataset val_ds =
        Dataset::from_samples(prep.transform(detail::record_ptrs(records, tv.val)));

    TrainConfig tc = train_config(s);
    tc.batch_size = std::min(batch, train_ds.size());
    tc.seed = mix_seed(s.seed, detail::kTokTrain);
    tc.shuffle_token = shuffle_token;
    const TrainOutcome outcome = train(arch, init, train_ds, val_ds, tc);

    const std::vector<double> scores = predict_scores(arch, outcome.best_params, val_ds);
    const double a = auprc(scores, val_ds.int_labels());
    const double f1 = f1_score(scores, val_ds.int_labels());
    write_text(dir / (stem + "_history.csv"), history_csv(outcome));
    save_params(outcome.best_params, (dir / (stem + "_model.bin")).string());
    write_text(dir / (stem + "_summary.txt"), outcome_summary(outcome, a, f1));
    log_info(stem + ": best epoch " + std::to_string(outcome.best_epoch) + ", val auprc " +
             std::to_string(a));
}

int cmd_train(const Settings& s) {
    const fs::path dir = require_out(s);
    const ModelFamily family = resolve_families(s, true).front();
    const int window = resolve_windows(s, true).front();
    const ArchitectureSpec arch = build_architecture(family, window);
    const ParameterSet init = init_parameters(arch, mix_seed(s.seed, detail::kTokInit));
    const std::vector<PatientRecord> records = load_records(s);
    std::vector<int> labels;
    for (const PatientRecord& r : records) labels.push_back(r.label);
    std::vector<std::size_t> all(records.size());
    std::iota(all.begin(), all.end(), 0);

    if (!s.clients_set) {
        run_train_arm(s, arch, init, records, labels, all, s.batch, 0, 0, dir, "cml");
    } else {
        if (s.clients.size() != 1)
            throw ConfigError("train takes exactly one --clients value");
        const std::size_t k = s.clients.front();
        const auto shards = partition_clients(labels, k, s.skew,
                                              mix_seed(s.seed, detail::kTokPartition, k));
        for (std::size_t c = 0; c < k; ++c) {
            run_train_arm(s, arch, init, records, labels, shards[c],
                          client_batch_size(s.batch, k), c, mix_seed(k, c), dir,
                          "lml_client" + std::to_string(c));
        }
    }
    write_snapshot(s, dir);
    return 0;
}

int cmd_federate(const Settings& s) {
    const fs::path dir = require_out(s);
    const ModelFamily family = resolve_families(s, true).front();
    const int window = resolve_windows(s, true).front();
    const ArchitectureSpec arch = build_architecture(family, window);
    const ParameterSet init = init_parameters(arch, mix_seed(s.seed, detail::kTokInit));
    const std::vector<PatientRecord> records = load_records(s);
    std::vector<int> labels;
    for (const PatientRecord& r : records) labels.push_back(r.label);

    if (s.clients_set && s.clients.size() != 1)
        throw ConfigError("federate takes exactly one --clients value");
    const std::size_t k = s.clients_set ? s.clients.front() : 2;
    const auto shards =
        partition_clients(labels, k, s.skew, mix_seed(s.seed, detail::kTokPartition, k));

    std::vector<std::unique_ptr<SimulatedClient>> clients;
    std::vector<FederatedClient*> views;
    for (std::size_t c = 0; c < k; ++c) {
        const TrainValSplit tv =
            split_train_val(shards[c], labels, s.val_fraction,
                            mix_seed(s.seed, detail::kTokSubSplit, mix_seed(k, c)));
        Preprocessor prep;
        prep.fit(detail::record_ptrs(records, tv.train), window);
        Dataset train_ds =
            Dataset::from_samples(prep.transform(detail::record_ptrs(records, tv.train)));
        Dataset val_ds =
            Dataset::from_samples(prep.transform(detail::record_ptrs(records, tv.val)));
        const std::size_t batch = std::min(client_batch_size(s.batch, k), train_ds.size());
        clients.push_back(std::make_unique<SimulatedClient>(
            c, arch, std::move(train_ds), std::move(val_ds), batch, s.local_epochs,
            mix_seed(s.seed, detail::kTokTrain)));
        views.push_back(clients.back().get());
    }
    const FederationOutcome outcome = run_federation(init, views, federation_config(s));

    std::ostringstream rounds;
    rounds << "round,lr";
    for (std::size_t c = 0; c < k; ++c) rounds << ",client_" << c << "_val_loss";
    rounds << ",avg_val_loss,checksum\n";
    for (const RoundRecord& r : outcome.history) {
        rounds << r.round << ',' << detail::format_double(r.lr);
        for (double loss : r.client_val_losses) rounds << ',' << detail::format_double(loss);
        char hex[24];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(r.params_checksum));
        rounds << ',' << detail::format_double(r.avg_val_loss) << ',' << hex << '\n';
    }
    write_text(dir / "rounds.csv", rounds.str());
    save_params(outcome.best_params, (dir / "global_model.bin").string());
    std::ostringstream summary;
    summary << "best_round=" << outcome.best_round << '\n'
            << "best_avg_val_loss=" << detail::format_double(outcome.best_avg_val_loss) << '\n'
            << "rounds_run=" << outcome.history.size() << '\n'
            << "stopped_early=" << (outcome.stopped_early ? "true" : "false") << '\n';
    write_text(dir / "summary.txt", summary.str());
    write_snapshot(s, dir);
    log_info("federation: best round " + std::to_string(outcome.best_round) +
             ", best avg val loss " + std::to_string(outcome.best_avg_val_loss));
    return 0;
}

int cmd_matrix(const Settings& s) {
    const fs::path dir = require_out(s);
    MatrixConfig mc;
    mc.families = resolve_families(s, false);
    mc.windows = resolve_windows(s, false);
    mc.client_counts = s.clients_set ? s.clients : std::vector<std::size_t>{2, 4, 8};
    mc.folds = s.folds;
    mc.val_fraction = s.val_fraction;
    mc.base_batch = s.batch;
    mc.train = train_config(s);
    mc.federation = federation_config(s);
    mc.local_epochs = s.local_epochs;
    mc.skew = s.skew;
    mc.seed = s.seed;
    mc.jobs = s.jobs;
    const std::vector<PatientRecord> records = load_records(s);
    const ExperimentReport report = run_experiment_matrix(records, mc);
    write_text(dir / "report.csv", report.to_csv());
    write_text(dir / "report.md", report.to_markdown());
    write_snapshot(s, dir);
    log_info("wrote report for " + std::to_string(report.cells.size()) + " cells to " +
             dir.string());
    return 0;
}

int cmd_report(const Settings& s, const std::string& input) {
    std::ifstream f(input, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + input);
    std::ostringstream buf;
    buf << f.rdbuf();
    const ExperimentReport report = report_from_csv(buf.str());
    const std::string md = report.to_markdown();
    if (s.out.empty()) {
        std::cout << md;
    } else {
        const fs::path dir = require_out(s);
        write_text(dir / "report.md", md);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated ICU mortality prediction: synthetic cohorts, windowed feature "
                 "extraction, dual-channel sequence models, and CML/LML/FL evaluation"};
    app.require_subcommand(1);

    Settings cli;  // shadow values written by the parser
    std::string config_path;
    std::string report_input;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--out", cli.out, "output directory");
        sub->add_option("--seed", cli.seed, "master seed");
        sub->add_option("--jobs", cli.jobs, "parallel jobs (1 = bitwise-reproducible)");
        sub->add_option("--families", cli.families,
                        "model families (1dcnn, frnn, lstm, gru)")
            ->delimiter(',');
        sub->add_option("--windows", cli.windows, "history windows in hours (8/16/24/48)")
            ->delimiter(',');
        sub->add_option("--clients", cli.clients, "client counts K")->delimiter(',');
        sub->add_option("--folds", cli.folds, "cross-validation folds");
        sub->add_option("--patients", cli.patients, "synthetic cohort size");
        sub->add_option("--positive-fraction", cli.positive_fraction,
                        "synthetic positive-class fraction");
        sub->add_option("--skew", cli.skew, "client label-skew (0 = stratified)");
        sub->add_option("--batch", cli.batch, "centralized batch size (clients use batch/K)");
        sub->add_option("--lr", cli.lr, "initial learning rate");
        sub->add_option("--patience", cli.patience, "early-stopping patience");
        sub->add_option("--max-rounds", cli.max_rounds, "maximum federation rounds");
        sub->add_option("--max-epochs", cli.max_epochs, "maximum training epochs");
        sub->add_flag("--fixed-lr", cli.fixed_lr, "disable the learning-rate decay schedule");
        sub->add_option("--events", cli.events_path, "events CSV of an existing cohort");
        sub->add_option("--labels", cli.labels_path, "labels CSV of an existing cohort");
        return sub;
    };

    CLI::App* gen = add_common(app.add_subcommand("generate", "write a synthetic cohort CSV pair"));
    CLI::App* trn = add_common(app.add_subcommand(
        "train", "centralized (default) or local-per-client training run"));
    CLI::App* fed = add_common(app.add_subcommand("federate", "federated training run"));
    CLI::App* mat = add_common(app.add_subcommand(
        "matrix", "full CML/LML/FL evaluation matrix with report"));
    CLI::App* rep = app.add_subcommand("report", "render a report CSV as markdown");
    rep->add_option("input", report_input, "report CSV path")->required();
    rep->add_option("--out", cli.out, "output directory (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* active = app.get_subcommands().front();
    try {
        Settings s;  // defaults
        if (active->get_option_no_throw("--config") != nullptr && active->count("--config") > 0) {
            apply_config_map(parse_config_file(config_path), config_path, s);
        }
        // Command-line values override the config file.
        auto picked = [&](const std::string& name) {
            return active->get_option_no_throw(name) != nullptr && active->count(name) > 0;
        };
        if (picked("--out")) s.out = cli.out;
        if (picked("--seed")) s.seed = cli.seed;
        if (picked("--jobs")) s.jobs = cli.jobs;
        if (picked("--families")) {
            s.families = cli.families;
            s.families_set = true;
        }
        if (picked("--windows")) {
            s.windows = cli.windows;
            s.windows_set = true;
        }
        if (picked("--clients")) {
            s.clients = cli.clients;
            s.clients_set = true;
        }
        if (picked("--folds")) s.folds = cli.folds;
        if (picked("--patients")) s.patients = cli.patients;
        if (picked("--positive-fraction")) s.positive_fraction = cli.positive_fraction;
        if (picked("--skew")) s.skew = cli.skew;
        if (picked("--batch")) s.batch = cli.batch;
        if (picked("--lr")) {
            s.lr = cli.lr;
            s.fed_lr = cli.lr;
        }
        if (picked("--patience")) {
            s.patience = cli.patience;
            s.fed_patience = cli.patience;
        }
        if (picked("--max-rounds")) s.max_rounds = cli.max_rounds;
        if (picked("--max-epochs")) s.max_epochs = cli.max_epochs;
        if (picked("--fixed-lr")) {
            s.fixed_lr = cli.fixed_lr;
            s.fed_fixed_lr = true;
        }
        if (picked("--events")) s.events_path = cli.events_path;
        if (picked("--labels")) s.labels_path = cli.labels_path;

        if (active == gen) return cmd_generate(s);
        if (active == trn) return cmd_train(s);
        if (active == fed) return cmd_federate(s);
        if (active == mat) return cmd_matrix(s);
        if (active == rep) return cmd_report(s, report_input);
        throw ContractError("unhandled subcommand");
    } catch (const ConfigError& e) {
        log_error(e.what());
        return 2;
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
}
