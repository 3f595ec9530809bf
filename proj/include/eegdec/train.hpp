#pragma once
// Two-stage optimization: the decoder is first pre-trained as a causal
// language model on the training texts (cross-attention fed a zero context),
// then stage 1 trains the encoder side against the frozen decoder, and
// stage 2 fine-tunes everything. Plain SGD, constant learning rate,
// global-norm gradient clipping, teacher forcing during training only.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegdec/data.hpp"
#include "eegdec/model.hpp"
#include "eegdec/tape.hpp"

namespace eegdec {

struct TrainConfig {
    int epochs_per_stage = 10;
    int batch_size = 16;
    double learning_rate = 5e-5;
    std::uint64_t seed = 0;
    double grad_clip_norm = 1.0;  // <= 0 disables clipping
    int lm_pretrain_epochs = 30;

    std::vector<std::string> validation_errors() const {
        std::vector<std::string> errs;
        if (epochs_per_stage < 1) errs.push_back("epochs_per_stage must be >= 1");
        if (batch_size < 1) errs.push_back("batch_size must be >= 1");
        if (learning_rate <= 0.0) errs.push_back("learning_rate must be > 0");
        if (lm_pretrain_epochs < 0) errs.push_back("lm_pretrain_epochs must be >= 0");
        return errs;
    }
    void validate() const {
        auto errs = validation_errors();
        if (errs.empty()) return;
        std::string msg = "invalid train config:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw std::invalid_argument(msg);
    }
};

// Stage ids as they appear in run logs.
inline constexpr int STAGE_LM_PRETRAIN = 0;
inline constexpr int STAGE_ENCODER = 1;
inline constexpr int STAGE_FINETUNE = 2;

struct EpochLog {
    int stage = 0;
    int epoch = 0;  // 1-based within its stage
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double wall_time_s = 0.0;
};

struct RunLog {
    std::vector<EpochLog> epochs;

    void append_stage(const RunLog& other) {
        epochs.insert(epochs.end(), other.epochs.begin(), other.epochs.end());
    }
};

inline void save_runlog_jsonl(const std::string& path, const RunLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write run log: " + path);
    for (const auto& e : log.epochs) {
        nlohmann::json j{{"stage", e.stage},
                         {"epoch", e.epoch},
                         {"train_loss", e.train_loss},
                         {"valid_loss", e.valid_loss},
                         {"wall_time_s", e.wall_time_s}};
        out << j.dump() << '\n';
    }
}

inline RunLog load_runlog_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run log: " + path);
    RunLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        log.epochs.push_back(EpochLog{j.at("stage").get<int>(), j.at("epoch").get<int>(),
                                      j.at("train_loss").get<double>(),
                                      j.at("valid_loss").get<double>(),
                                      j.at("wall_time_s").get<double>()});
    }
    return log;
}

// ---- losses ----

// Mean negative log-likelihood over non-pad targets, as a tape node.
inline ValueId cross_entropy_loss(Tape& t, ValueId logits,
                                  const std::vector<std::int64_t>& targets, std::int64_t pad_id) {
    std::int64_t n_valid = 0;
    ValueId total = t.cross_entropy_sum(logits, targets, pad_id, &n_valid);
    if (n_valid == 0) throw std::invalid_argument("cross_entropy_loss: all targets are padding");
    return t.scale(total, 1.0 / static_cast<double>(n_valid));
}

// ---- SGD ----

inline double global_grad_norm(const GradMap& grads) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        for (std::int64_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    return std::sqrt(sq);
}

// Global-norm clip, then p <- p - lr * g for every unfrozen parameter.
inline void sgd_step(ParamStore& store, const GradMap& grads, double lr, double clip_norm) {
    const double norm = global_grad_norm(grads);
    if (!std::isfinite(norm))
        throw std::runtime_error("sgd_step: non-finite gradients (norm " + std::to_string(norm) +
                                 ")");
    const double factor = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
    for (const auto& [name, g] : grads) {
        auto it = store.entries.find(name);
        if (it == store.entries.end()) throw std::out_of_range("sgd_step: unknown param " + name);
        if (it->second.frozen) continue;
        Tensor& p = it->second.value;
        require_same_shape(p, g, "sgd_step");
        for (std::int64_t i = 0; i < p.size(); ++i) p[i] -= lr * factor * g[i];
    }
}

// ---- teacher-forced forward passes ----

namespace detail {

struct SentenceTensors {
    Tensor features;                        // [words x electrodes]
    std::vector<std::int64_t> dec_input;    // BOS t1 .. tn
    std::vector<std::int64_t> dec_targets;  // t1 .. tn EOS
};

inline SentenceTensors prepare_sentence(const SentenceSample& s, const ModelConfig& c) {
    if (s.token_ids.size() < 2 || s.token_ids.front() != Vocabulary::BOS)
        throw std::invalid_argument("sentence " + s.sentence_id +
                                    " has no encoded token ids; apply a vocabulary first");
    SentenceTensors out;
    auto words = static_cast<std::int64_t>(s.word_features.size());
    words = std::min<std::int64_t>(words, c.max_seq_len);
    out.features = Tensor({words, c.electrodes});
    for (std::int64_t w = 0; w < words; ++w) {
        const Tensor& f = s.word_features[static_cast<std::size_t>(w)];
        if (f.dim(0) != c.electrodes)
            throw ShapeError("sentence " + s.sentence_id + ": feature width " +
                             shape_str(f.shape()) + " vs configured electrodes " +
                             std::to_string(c.electrodes));
        for (std::int64_t e = 0; e < c.electrodes; ++e) out.features.at(w, e) = f[e];
    }
    auto ids = s.token_ids;
    if (static_cast<std::int64_t>(ids.size()) > c.max_seq_len + 1)
        ids.resize(static_cast<std::size_t>(c.max_seq_len + 1));
    out.dec_input.assign(ids.begin(), ids.end() - 1);
    out.dec_targets.assign(ids.begin() + 1, ids.end());
    return out;
}

struct SentenceLoss {
    double nll_sum = 0.0;
    std::int64_t n_tokens = 0;
};

// Teacher-forced loss for one sentence; accumulates unscaled gradients.
inline SentenceLoss sentence_loss(const ParamStore& store, const ModelConfig& config,
                                  const SentenceSample& sample, bool lm_only,
                                  const DropoutCtx& dropout, GradMap* grad_accum) {
    const SentenceTensors st = prepare_sentence(sample, config);
    Tape t;
    TapeParams P(t, store);
    ValueId enc;
    Tensor enc_valid;
    if (lm_only) {
        // decoder-as-LM: zero context so the decoder cannot lean on it
        enc = t.constant(Tensor({1, config.model_dim}));
        enc_valid = Tensor::filled({1}, 1.0);
    } else {
        enc_valid = Tensor::filled({st.features.rows()}, 1.0);
        enc = encoder_forward(t, P, config, st.features, enc_valid, dropout);
    }
    ValueId logits = decoder_forward(t, P, config, enc, enc_valid, st.dec_input, dropout);
    std::int64_t n_valid = 0;
    ValueId total = t.cross_entropy_sum(logits, st.dec_targets, Vocabulary::PAD, &n_valid);

    SentenceLoss out;
    out.nll_sum = t.value(total).scalar_value();
    out.n_tokens = n_valid;
    if (grad_accum) {
        auto grads = t.backward(total);
        for (auto& [name, g] : grads) {
            auto it = grad_accum->find(name);
            if (it == grad_accum->end())
                grad_accum->emplace(name, std::move(g));
            else
                accumulate(it->second, g);
        }
    }
    return out;
}

}  // namespace detail

// Token-mean loss over a sample list, eval mode (no dropout, no updates).
inline double evaluate_loss(const ParamStore& store, const ModelConfig& config,
                            const std::vector<SentenceSample>& samples, bool lm_only = false) {
    if (samples.empty()) throw std::invalid_argument("evaluate_loss: no samples");
    double nll = 0.0;
    std::int64_t tokens = 0;
    for (const auto& s : samples) {
        auto l = detail::sentence_loss(store, config, s, lm_only, {}, nullptr);
        nll += l.nll_sum;
        tokens += l.n_tokens;
    }
    return nll / static_cast<double>(tokens);
}

// Observer runs after each epoch; used for logging and freeze auditing.
using EpochObserver = std::function<void(const EpochLog&, const ParamStore&)>;

namespace detail {

// One stage of epochs over shuffled batches. Batch loss is the token-mean
// over the whole batch, so padding or batch boundaries cannot shift it.
inline RunLog run_stage(ParamStore& store, const ModelConfig& config, const TrainConfig& tc,
                        const std::vector<SentenceSample>& train,
                        const std::vector<SentenceSample>& valid, int stage, int n_epochs,
                        bool lm_only, const EpochObserver& observer) {
    RunLog log;
    for (int epoch = 1; epoch <= n_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        // batch order reseeded per epoch from the run seed
        Rng shuffle_rng = Rng(tc.seed).fork("shuffle", static_cast<std::uint64_t>(stage) * 1000 +
                                                           static_cast<std::uint64_t>(epoch));
        Rng dropout_rng = Rng(tc.seed).fork("dropout", static_cast<std::uint64_t>(stage) * 1000 +
                                                           static_cast<std::uint64_t>(epoch));
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_rng.shuffle(order);

        DropoutCtx dropout{config.dropout_rate, &dropout_rng};
        double epoch_nll = 0.0;
        std::int64_t epoch_tokens = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(tc.batch_size)) {
            const auto end =
                std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            GradMap grads;
            double batch_nll = 0.0;
            std::int64_t batch_tokens = 0;
            for (std::size_t i = start; i < end; ++i) {
                auto l = sentence_loss(store, config, train[order[i]], lm_only, dropout, &grads);
                batch_nll += l.nll_sum;
                batch_tokens += l.n_tokens;
            }
            const double batch_loss = batch_nll / static_cast<double>(batch_tokens);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged: non-finite loss in stage " +
                                         std::to_string(stage) + " epoch " +
                                         std::to_string(epoch));
            for (auto& [name, g] : grads) {
                (void)name;
                g = scale(g, 1.0 / static_cast<double>(batch_tokens));
            }
            sgd_step(store, grads, tc.learning_rate, tc.grad_clip_norm);
            epoch_nll += batch_nll;
            epoch_tokens += batch_tokens;
        }

        EpochLog e;
        e.stage = stage;
        e.epoch = epoch;
        e.train_loss = epoch_nll / static_cast<double>(epoch_tokens);
        e.valid_loss = valid.empty() ? 0.0 : evaluate_loss(store, config, valid, lm_only);
        e.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(e);
        if (observer) observer(e, store);
    }
    return log;
}

}  // namespace detail

// Decoder-only causal LM pre-training on the training texts; the encoder is
// never part of the graph, so it cannot move.
inline RunLog pretrain_decoder_lm(ParamStore& store, const ModelConfig& config,
                                  const TrainConfig& tc,
                                  const std::vector<SentenceSample>& train,
                                  const std::vector<SentenceSample>& valid,
                                  const EpochObserver& observer = nullptr) {
    if (train.empty()) throw std::invalid_argument("pretrain_decoder_lm: empty training split");
    store.set_all_frozen(false);
    return detail::run_stage(store, config, tc, train, valid, STAGE_LM_PRETRAIN,
                             tc.lm_pretrain_epochs, /*lm_only=*/true, observer);
}

// Stage 1: freeze the decoder block wholesale, train the encoder side.
inline RunLog train_stage1(ParamStore& store, const ModelConfig& config, const TrainConfig& tc,
                           const std::vector<SentenceSample>& train,
                           const std::vector<SentenceSample>& valid,
                           const EpochObserver& observer = nullptr) {
    store.set_all_frozen(false);
    store.set_frozen_prefix("dec.", true);
    return detail::run_stage(store, config, tc, train, valid, STAGE_ENCODER, tc.epochs_per_stage,
                             /*lm_only=*/false, observer);
}

// Stage 2: everything trainable.
inline RunLog train_stage2(ParamStore& store, const ModelConfig& config, const TrainConfig& tc,
                           const std::vector<SentenceSample>& train,
                           const std::vector<SentenceSample>& valid,
                           const EpochObserver& observer = nullptr) {
    store.set_all_frozen(false);
    return detail::run_stage(store, config, tc, train, valid, STAGE_FINETUNE, tc.epochs_per_stage,
                             /*lm_only=*/false, observer);
}

// The full protocol: LM pre-training, frozen-decoder stage, fine-tune stage.
inline RunLog two_stage_run(ParamStore& store, const ModelConfig& config, const TrainConfig& tc,
                            const std::vector<SentenceSample>& train,
                            const std::vector<SentenceSample>& valid,
                            const EpochObserver& observer = nullptr) {
    RunLog log = pretrain_decoder_lm(store, config, tc, train, valid, observer);
    log.append_stage(train_stage1(store, config, tc, train, valid, observer));
    log.append_stage(train_stage2(store, config, tc, train, valid, observer));
    return log;
}

}  // namespace eegdec
