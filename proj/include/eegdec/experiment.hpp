#pragma once
// Experiment harness: one place that wires data, model, training, decoding
// and metrics together for the CLI. A sweep runs the full activation grid
// with a shared data split and seed, one output directory per configuration,
// and a combined results table.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eegdec/checkpoint.hpp"
#include "eegdec/data.hpp"
#include "eegdec/decode.hpp"
#include "eegdec/metrics.hpp"
#include "eegdec/model.hpp"
#include "eegdec/train.hpp"

namespace eegdec {

struct ExperimentConfig {
    // data source: interchange file, or synthetic parameters
    std::string data_path;
    bool synthetic = false;
    SyntheticConfig synth;

    ModelConfig model;
    TrainConfig train;
    std::uint64_t seed = 0;

    int beam_width = 5;
    double length_penalty = 1.0;

    std::string out_dir;
    std::vector<std::string> sweep_rows;  // empty -> default grid
    int jobs = 0;                         // 0 -> hardware concurrency
};

// ---- data resolution ----

struct PreparedData {
    SplitResult splits;
    Vocabulary vocab;
    std::int64_t electrodes = 0;
    std::int64_t dropped_sentences = 0;
    std::int64_t total_sentences = 0;
};

inline SampleSet resolve_samples(const ExperimentConfig& cfg) {
    if (cfg.synthetic) {
        SyntheticConfig sc = cfg.synth;
        sc.seed = cfg.seed;
        return gen_synthetic_samples(sc);
    }
    if (cfg.data_path.empty())
        throw std::invalid_argument("no data source: give a data file or synthetic parameters");
    return load_zuco_jsonl(cfg.data_path);
}

// Split first, then build the vocabulary from the training split only.
inline PreparedData prepare_data(const ExperimentConfig& cfg) {
    auto set = resolve_samples(cfg);
    PreparedData out;
    out.dropped_sentences = set.dropped_sentences;
    out.total_sentences = static_cast<std::int64_t>(set.samples.size());
    out.electrodes = set.electrodes;
    SplitSpec spec;
    spec.seed = cfg.seed;
    out.splits = split(std::move(set.samples), spec);
    out.vocab = build_vocab(out.splits.train);
    apply_vocab(out.vocab, out.splits.train);
    apply_vocab(out.vocab, out.splits.valid);
    apply_vocab(out.vocab, out.splits.test);
    return out;
}

// ---- single run ----

struct TrainOutcome {
    Checkpoint ckpt;
    RunLog log;
    PreparedData data;
};

inline TrainOutcome run_training(const ExperimentConfig& cfg,
                                 const EpochObserver& observer = nullptr) {
    TrainOutcome out;
    out.data = prepare_data(cfg);

    ModelConfig mc = cfg.model;
    mc.electrodes = out.data.electrodes;
    mc.vocab_size = out.data.vocab.size();
    mc.validate();
    cfg.train.validate();

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;

    ParamStore params = init_model_params(mc, cfg.seed);
    out.log = two_stage_run(params, mc, tc, out.data.splits.train, out.data.splits.valid,
                            observer);
    out.ckpt = Checkpoint{mc.resolved(), out.data.vocab, std::move(params)};
    return out;
}

// Beam-search generator bound to a checkpoint; never reads the target text.
// The checkpoint must outlive the returned function.
inline GenerateFn checkpoint_generator(const Checkpoint& ckpt, int beam_width,
                                       double length_penalty) {
    return [&ckpt, beam_width, length_penalty](const SentenceSample& sample) {
        const auto words = std::min<std::int64_t>(
            static_cast<std::int64_t>(sample.word_features.size()), ckpt.config.max_seq_len);
        Tensor feats({words, ckpt.config.electrodes});
        for (std::int64_t w = 0; w < words; ++w)
            for (std::int64_t e = 0; e < ckpt.config.electrodes; ++e)
                feats.at(w, e) = sample.word_features[static_cast<std::size_t>(w)][e];
        Tensor enc_out = run_encoder(ckpt.params, ckpt.config, feats);
        return beam_search(ckpt.params, ckpt.config, enc_out, beam_width,
                           ckpt.config.max_seq_len - 1, length_penalty);
    };
}

inline MetricReport evaluate_checkpoint(const Checkpoint& ckpt,
                                        const std::vector<SentenceSample>& test,
                                        int beam_width, double length_penalty) {
    return evaluate_corpus(checkpoint_generator(ckpt, beam_width, length_penalty), test);
}

// ---- sweep ----

struct SweepRow {
    std::string label;
    std::string activation;
    bool norm_first = false;
};

// The default activation grid: the baseline is labeled "plain"; three
// configurations repeat with the normalization moved to the front.
inline std::vector<SweepRow> default_sweep_rows() {
    return {
        {"plain", "relu", false},
        {"swish", "swish", false},
        {"gelu", "gelu", false},
        {"elu", "elu", false},
        {"leaky_relu", "leaky_relu", false},
        {"swish_norm_first", "swish", true},
        {"prelu", "prelu", false},
        {"sine", "sine", false},
        {"chebyshev3", "chebyshev3", false},
        {"chebyshev3_norm_first", "chebyshev3", true},
        {"chebyshev2", "chebyshev2", false},
        {"poly2", "poly2", false},
        {"poly3", "poly3", false},
        {"neg_pos_poly", "neg_pos_poly", false},
        {"neg_pos_poly_norm_first", "neg_pos_poly", true},
    };
}

// "swish" or "swish+norm_first"; the plain relu row keeps its "plain" label.
inline SweepRow parse_sweep_row(const std::string& text) {
    SweepRow row;
    const auto plus = text.find('+');
    row.activation = text.substr(0, plus);
    if (plus != std::string::npos) {
        const auto suffix = text.substr(plus + 1);
        if (suffix != "norm_first")
            throw std::invalid_argument("unknown sweep row modifier: " + suffix);
        row.norm_first = true;
    }
    activation_from_name(row.activation);  // validates the spelling
    if (row.activation == "relu" && !row.norm_first)
        row.label = "plain";
    else
        row.label = row.activation + (row.norm_first ? "_norm_first" : "");
    return row;
}

inline std::vector<SweepRow> resolve_sweep_rows(const std::vector<std::string>& names) {
    if (names.empty()) return default_sweep_rows();
    std::vector<SweepRow> rows;
    rows.reserve(names.size());
    for (const auto& n : names) rows.push_back(parse_sweep_row(n));
    return rows;
}

using SweepTable = std::vector<std::pair<std::string, std::optional<MetricReport>>>;

struct SweepOutcome {
    SweepTable table;
    int succeeded = 0;
    int failed = 0;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

inline nlohmann::json experiment_row_json(const SweepRow& row, const MetricReport& report) {
    nlohmann::json j = metric_report_json(report);
    j["configuration"] = row.label;
    j["activation"] = row.activation;
    j["norm_first"] = row.norm_first;
    return j;
}

inline void write_sweep_tables(const std::filesystem::path& out_dir, const SweepTable& table) {
    write_text_file(out_dir / "sweep_results.md", metric_table_markdown(table));
    write_text_file(out_dir / "sweep_results.csv", metric_table_csv(table));
    nlohmann::json order = nlohmann::json::array();
    for (const auto& [label, report] : table) order.push_back(label);
    write_text_file(out_dir / "sweep_rows.json", order.dump() + "\n");
}

// Runs every configuration against the same data, split and seed; each row
// gets its own subdirectory with checkpoint, run log, config echo and
// report. A failing row is recorded and the sweep continues.
inline SweepOutcome run_sweep(const ExperimentConfig& cfg,
                              const std::function<void(const std::string&)>& progress = nullptr) {
    namespace fs = std::filesystem;
    const auto rows = resolve_sweep_rows(cfg.sweep_rows);
    if (rows.empty()) throw std::invalid_argument("sweep: empty activation list");
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);

    SweepOutcome outcome;
    outcome.table.resize(rows.size());
    std::mutex progress_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<int> succeeded{0}, failed{0};

    auto report_progress = [&](const std::string& msg) {
        if (!progress) return;
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(msg);
    };

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= rows.size()) return;
            const SweepRow& row = rows[i];
            const fs::path row_dir = out_dir / row.label;
            fs::create_directories(row_dir);
            try {
                ExperimentConfig run_cfg = cfg;
                run_cfg.model.activation = row.activation;
                run_cfg.model.norm_first = row.norm_first;

                auto trained = run_training(run_cfg);
                save_checkpoint((row_dir / "checkpoint.bin").string(), trained.ckpt);
                save_runlog_jsonl((row_dir / "runlog.jsonl").string(), trained.log);
                write_text_file(row_dir / "config.json",
                                model_config_to_json(trained.ckpt.config).dump(2) + "\n");

                auto report = evaluate_checkpoint(trained.ckpt, trained.data.splits.test,
                                                  cfg.beam_width, cfg.length_penalty);
                write_text_file(row_dir / "report.json",
                                experiment_row_json(row, report).dump(2) + "\n");
                SweepTable one{{row.label, report}};
                write_text_file(row_dir / "report.md", metric_table_markdown(one));

                outcome.table[i] = {row.label, report};
                succeeded.fetch_add(1);
                report_progress(row.label + ": done (BLEU-1 " +
                                format_score(report.bleu.at(1)) + ")");
            } catch (const std::exception& e) {
                write_text_file(row_dir / "error.txt", std::string(e.what()) + "\n");
                outcome.table[i] = {row.label, std::nullopt};
                failed.fetch_add(1);
                report_progress(row.label + ": FAILED (" + e.what() + ")");
            }
        }
    };

    int jobs = cfg.jobs > 0 ? cfg.jobs : static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    jobs = std::min<int>(jobs, static_cast<int>(rows.size()));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    outcome.succeeded = succeeded.load();
    outcome.failed = failed.load();
    write_sweep_tables(out_dir, outcome.table);
    return outcome;
}

// Reassembles the combined table from the per-row report files.
inline SweepTable collect_sweep_reports(const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    const auto order_file = out_dir / "sweep_rows.json";
    if (!fs::exists(order_file))
        throw std::runtime_error("no sweep_rows.json in " + out_dir.string() +
                                 "; run a sweep first");
    std::ifstream in(order_file);
    nlohmann::json order;
    in >> order;
    SweepTable table;
    for (const auto& label_json : order) {
        const auto label = label_json.get<std::string>();
        const auto report_path = out_dir / label / "report.json";
        if (!fs::exists(report_path)) {
            table.emplace_back(label, std::nullopt);
            continue;
        }
        std::ifstream rin(report_path);
        nlohmann::json j;
        rin >> j;
        table.emplace_back(label, metric_report_from_json(j));
    }
    return table;
}

}  // namespace eegdec
