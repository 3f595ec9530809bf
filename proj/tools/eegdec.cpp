// eegdec: EEG-to-text decoding testbed.
//
// Subcommands:
//   gen-synthetic   write a synthetic interchange corpus
//   train           two-stage training run -> checkpoint + run log
//   evaluate        score a checkpoint on the held-out test split
//   sweep           train + evaluate the whole activation grid
//   report          reassemble a sweep's combined results table
//
// Every flag can also be given in a config file (--config, key = value,
// keys mirror the long flag names); command-line flags override the file.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "eegdec/experiment.hpp"

using namespace eegdec;
namespace fs = std::filesystem;

namespace {

void add_seed_out_flags(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--seed", cfg.seed, "master seed for split, init and training");
    cmd->add_option("--out", cfg.out_dir, "output directory")->required();
}

void add_data_flags(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--data", cfg.data_path, "interchange data file (jsonl)");
    cmd->add_flag("--synthetic", cfg.synthetic, "generate a synthetic corpus in memory");
    cmd->add_option("--vocab", cfg.synth.vocab_size, "synthetic vocabulary size");
    cmd->add_option("--sentences", cfg.synth.n_sentences, "synthetic sentence count");
    cmd->add_option("--electrodes", cfg.synth.electrodes, "synthetic electrode count");
    cmd->add_option("--noise", cfg.synth.noise_std, "synthetic recording noise stddev");
    cmd->add_option("--min-len", cfg.synth.min_len, "synthetic minimum sentence length");
    cmd->add_option("--max-len", cfg.synth.max_len, "synthetic maximum sentence length");
}

void add_model_flags(CLI::App* cmd, ModelConfig& mc) {
    cmd->add_option("--activation", mc.activation,
                    "encoder activation (relu, swish, gelu, elu, leaky_relu, prelu, sine, "
                    "chebyshev2, chebyshev3, poly2, poly3, neg_pos_poly)");
    cmd->add_flag("--norm-first", mc.norm_first, "place layer norm before each sublayer");
    cmd->add_flag("--heads-same-as-layers", mc.heads_same_as_layers,
                  "use as many attention heads as encoder layers");
    cmd->add_option("--encoder-layers", mc.encoder_layers, "encoder layer count");
    cmd->add_option("--decoder-layers", mc.decoder_layers, "decoder layer count");
    cmd->add_option("--model-dim", mc.model_dim, "model width");
    cmd->add_option("--heads", mc.heads, "attention head count");
    cmd->add_option("--ff-dim", mc.ff_dim, "feed-forward hidden width");
    cmd->add_option("--max-seq-len", mc.max_seq_len, "maximum sequence length");
    cmd->add_option("--dropout", mc.dropout_rate, "dropout rate (training only)");
}

void add_train_flags(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--epochs", cfg.train.epochs_per_stage, "epochs per training stage");
    cmd->add_option("--batch-size", cfg.train.batch_size, "batch size");
    cmd->add_option("--lr", cfg.train.learning_rate, "SGD learning rate");
    cmd->add_option("--clip-norm", cfg.train.grad_clip_norm,
                    "global gradient norm clip (<= 0 disables)");
    cmd->add_option("--lm-epochs", cfg.train.lm_pretrain_epochs,
                    "decoder language-model pre-training epochs");
}

void add_eval_flags(CLI::App* cmd, ExperimentConfig& cfg) {
    cmd->add_option("--beam", cfg.beam_width, "beam width for generation");
    cmd->add_option("--length-penalty", cfg.length_penalty, "beam length penalty exponent");
}

int config_errors(const ExperimentConfig& cfg, bool check_model) {
    std::vector<std::string> errs;
    if (!cfg.synthetic && cfg.data_path.empty())
        errs.push_back("no data source: pass --data FILE or --synthetic");
    if (!cfg.data_path.empty() && !fs::exists(cfg.data_path))
        errs.push_back("data file does not exist: " + cfg.data_path);
    if (check_model) {
        ModelConfig probe = cfg.model;
        probe.vocab_size = 4;      // filled from data later
        probe.electrodes = 1;
        for (auto& e : probe.validation_errors()) errs.push_back(e);
    }
    for (auto& e : cfg.train.validation_errors()) errs.push_back(e);
    if (cfg.beam_width < 1) errs.push_back("beam width must be >= 1");
    if (errs.empty()) return 0;
    std::cerr << "configuration errors:\n";
    for (const auto& e : errs) std::cerr << "  - " << e << "\n";
    return 1;
}

void echo_resolved_config(CLI::App* cmd, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "config.resolved");
    out << cmd->config_to_str(true, false);
}

int cmd_gen_synthetic(const ExperimentConfig& cfg, const std::string& out_file) {
    SyntheticConfig sc = cfg.synth;
    sc.seed = cfg.seed;
    sc.validate();
    auto raw = gen_synthetic(sc);
    save_raw_jsonl(out_file, raw);
    std::int64_t words = 0;
    for (const auto& s : raw) words += static_cast<std::int64_t>(s.words.size());
    std::cout << "wrote " << raw.size() << " sentences (" << words << " words, vocab "
              << sc.vocab_size << ", electrodes " << sc.electrodes << ", noise " << sc.noise_std
              << ") to " << out_file << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    auto t0 = std::chrono::steady_clock::now();
    auto outcome = run_training(cfg, [](const EpochLog& e, const ParamStore&) {
        std::cout << "stage " << e.stage << " epoch " << e.epoch << "  train " << e.train_loss
                  << "  valid " << e.valid_loss << "\n";
    });
    if (outcome.data.dropped_sentences > 0)
        std::cout << "dropped " << outcome.data.dropped_sentences
                  << " sentences with missing EEG\n";
    const fs::path dir(cfg.out_dir);
    save_checkpoint((dir / "checkpoint.bin").string(), outcome.ckpt);
    save_runlog_jsonl((dir / "runlog.jsonl").string(), outcome.log);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "trained " << outcome.ckpt.config.activation
              << (outcome.ckpt.config.norm_first ? " (norm first)" : "") << " in " << secs
              << "s; checkpoint at " << (dir / "checkpoint.bin").string() << "\n";
    return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    auto ckpt = load_checkpoint(checkpoint_path);
    auto set = resolve_samples(cfg);
    if (set.electrodes != ckpt.config.electrodes) {
        std::cerr << "checkpoint/data mismatch: checkpoint expects "
                  << ckpt.config.electrodes << " electrodes, data has " << set.electrodes
                  << "\n";
        return 1;
    }
    SplitSpec spec;
    spec.seed = cfg.seed;
    auto splits = split(std::move(set.samples), spec);
    apply_vocab(ckpt.vocab, splits.test);

    auto report = evaluate_checkpoint(ckpt, splits.test, cfg.beam_width, cfg.length_penalty);
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    nlohmann::json j = metric_report_json(report);
    j["configuration"] = ckpt.config.activation;
    write_text_file(dir / "report.json", j.dump(2) + "\n");
    SweepTable one{{ckpt.config.activation, report}};
    write_text_file(dir / "report.md", metric_table_markdown(one));
    std::cout << metric_table_markdown(one);
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
    auto outcome = run_sweep(cfg, [](const std::string& msg) {
        std::cout << "[sweep] " << msg << "\n";
    });
    std::cout << "\n" << metric_table_markdown(outcome.table);
    std::cout << "sweep finished: " << outcome.succeeded << " succeeded, " << outcome.failed
              << " failed; tables in " << cfg.out_dir << "\n";
    return outcome.succeeded >= 1 ? 0 : 2;
}

int cmd_report(const std::string& out_dir) {
    auto table = collect_sweep_reports(out_dir);
    write_sweep_tables(out_dir, table);
    std::cout << metric_table_markdown(table);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EEG-to-text decoding testbed with configurable encoder activations"};
    app.require_subcommand(1);

    ExperimentConfig gen_cfg, train_cfg, eval_cfg, sweep_cfg;
    std::string gen_out, eval_checkpoint, report_dir;

    auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic interchange corpus");
    gen->set_config("--config");
    gen->add_option("--out", gen_out, "output jsonl file")->required();
    gen->add_option("--seed", gen_cfg.seed, "corpus seed");
    gen->add_option("--vocab", gen_cfg.synth.vocab_size, "vocabulary size");
    gen->add_option("--sentences", gen_cfg.synth.n_sentences, "sentence count");
    gen->add_option("--electrodes", gen_cfg.synth.electrodes, "electrode count");
    gen->add_option("--noise", gen_cfg.synth.noise_std, "recording noise stddev");
    gen->add_option("--min-len", gen_cfg.synth.min_len, "minimum sentence length");
    gen->add_option("--max-len", gen_cfg.synth.max_len, "maximum sentence length");

    auto* train = app.add_subcommand("train", "run the two-stage training protocol");
    train->set_config("--config");
    add_data_flags(train, train_cfg);
    add_model_flags(train, train_cfg.model);
    add_train_flags(train, train_cfg);
    add_seed_out_flags(train, train_cfg);

    auto* eval = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    eval->set_config("--config");
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    add_data_flags(eval, eval_cfg);
    add_eval_flags(eval, eval_cfg);
    add_seed_out_flags(eval, eval_cfg);

    auto* sweep = app.add_subcommand("sweep", "train and evaluate the activation grid");
    sweep->set_config("--config");
    add_data_flags(sweep, sweep_cfg);
    add_model_flags(sweep, sweep_cfg.model);
    add_train_flags(sweep, sweep_cfg);
    add_eval_flags(sweep, sweep_cfg);
    add_seed_out_flags(sweep, sweep_cfg);
    sweep->add_option("--rows", sweep_cfg.sweep_rows,
                      "sweep rows as ACTIVATION or ACTIVATION+norm_first (default: full grid)");
    sweep->add_option("--jobs", sweep_cfg.jobs, "parallel runs (default: hardware threads)");

    auto* report = app.add_subcommand("report", "rebuild the combined sweep table");
    report->add_option("--out", report_dir, "sweep output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            if (gen_cfg.synth.vocab_size < 10 || gen_cfg.synth.n_sentences < 1) {
                std::cerr << "configuration errors:\n  - synthetic corpus needs vocab >= 10 and "
                             ">= 1 sentences\n";
                return 1;
            }
            return cmd_gen_synthetic(gen_cfg, gen_out);
        }
        if (train->parsed()) {
            if (int rc = config_errors(train_cfg, true)) return rc;
            echo_resolved_config(train, train_cfg.out_dir);
            return cmd_train(train_cfg);
        }
        if (eval->parsed()) {
            if (int rc = config_errors(eval_cfg, false)) return rc;
            if (!fs::exists(eval_checkpoint)) {
                std::cerr << "checkpoint does not exist: " << eval_checkpoint << "\n";
                return 1;
            }
            echo_resolved_config(eval, eval_cfg.out_dir);
            return cmd_evaluate(eval_cfg, eval_checkpoint);
        }
        if (sweep->parsed()) {
            if (int rc = config_errors(sweep_cfg, true)) return rc;
            for (const auto& row : sweep_cfg.sweep_rows) {
                try {
                    parse_sweep_row(row);
                } catch (const std::exception& e) {
                    std::cerr << "configuration errors:\n  - " << e.what() << "\n";
                    return 1;
                }
            }
            echo_resolved_config(sweep, sweep_cfg.out_dir);
            return cmd_sweep(sweep_cfg);
        }
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
