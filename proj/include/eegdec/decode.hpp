#pragma once
// Greedy and beam-search generation over an abstract next-token scorer, so
// the same search runs against the real decoder and against hand-built toy
// distributions in tests. The scorer receives the full decoder input
// (starting with BOS) and returns log-probabilities for the next token.
// Generation never sees reference text.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "eegdec/data.hpp"
#include "eegdec/model.hpp"
#include "eegdec/tensor.hpp"

namespace eegdec {

using StepFn = std::function<std::vector<double>(const std::vector<std::int64_t>& prefix)>;

struct DecodeConfig {
    int beam_width = 5;
    int max_len = 32;            // generated tokens, excluding BOS
    double length_penalty = 1.0;
    std::int64_t bos = Vocabulary::BOS;
    std::int64_t eos = Vocabulary::EOS;
    std::int64_t pad = Vocabulary::PAD;
};

// Sum of token log-probs normalized by length^penalty.
inline double sequence_score(double logprob_sum, std::size_t length, double penalty) {
    if (length == 0) return -std::numeric_limits<double>::infinity();
    return logprob_sum / std::pow(static_cast<double>(length), penalty);
}

namespace detail {

struct Beam {
    std::vector<std::int64_t> tokens;  // generated, BOS excluded
    double logprob = 0.0;
    bool finished = false;
};

inline std::vector<std::int64_t> with_bos(const std::vector<std::int64_t>& tokens,
                                          std::int64_t bos) {
    std::vector<std::int64_t> prefix;
    prefix.reserve(tokens.size() + 1);
    prefix.push_back(bos);
    prefix.insert(prefix.end(), tokens.begin(), tokens.end());
    return prefix;
}

inline bool beam_before(const Beam& a, const Beam& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return a.tokens < b.tokens;  // deterministic tie-break
}

}  // namespace detail

inline std::vector<std::int64_t> greedy_decode_fn(const StepFn& step, const DecodeConfig& cfg) {
    std::vector<std::int64_t> tokens;
    for (int t = 0; t < cfg.max_len; ++t) {
        const auto logprobs = step(detail::with_bos(tokens, cfg.bos));
        std::int64_t best = -1;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (std::int64_t v = 0; v < static_cast<std::int64_t>(logprobs.size()); ++v) {
            if (v == cfg.pad || v == cfg.bos) continue;
            if (logprobs[static_cast<std::size_t>(v)] > best_lp) {
                best_lp = logprobs[static_cast<std::size_t>(v)];
                best = v;
            }
        }
        tokens.push_back(best);
        if (best == cfg.eos) break;
    }
    return tokens;
}

inline double scored_rollout(const StepFn& step, const std::vector<std::int64_t>& tokens,
                             const DecodeConfig& cfg) {
    double lp = 0.0;
    std::vector<std::int64_t> prefix{cfg.bos};
    for (auto tok : tokens) {
        const auto logprobs = step(prefix);
        lp += logprobs[static_cast<std::size_t>(tok)];
        prefix.push_back(tok);
    }
    return sequence_score(lp, tokens.size(), cfg.length_penalty);
}

// Standard beam search over summed log-probabilities; active beams are
// pruned by raw sum, finished beams compete on the length-normalized score.
// The greedy rollout is kept as a floor so the result never scores below it.
inline std::vector<std::int64_t> beam_search_fn(const StepFn& step, const DecodeConfig& cfg) {
    if (cfg.beam_width < 1) throw std::invalid_argument("beam_width must be >= 1");
    std::vector<detail::Beam> active{detail::Beam{}};
    detail::Beam best_finished;
    bool have_finished = false;

    for (int t = 0; t < cfg.max_len && !active.empty(); ++t) {
        std::vector<detail::Beam> candidates;
        candidates.reserve(active.size() * 8);
        for (const auto& beam : active) {
            const auto logprobs = step(detail::with_bos(beam.tokens, cfg.bos));
            for (std::int64_t v = 0; v < static_cast<std::int64_t>(logprobs.size()); ++v) {
                if (v == cfg.pad || v == cfg.bos) continue;
                detail::Beam next = beam;
                next.tokens.push_back(v);
                next.logprob += logprobs[static_cast<std::size_t>(v)];
                next.finished = (v == cfg.eos);
                candidates.push_back(std::move(next));
            }
        }
        std::sort(candidates.begin(), candidates.end(), detail::beam_before);
        active.clear();
        int taken = 0;
        for (const auto& c : candidates) {
            if (taken == cfg.beam_width) break;
            ++taken;
            if (c.finished) {
                const double score =
                    sequence_score(c.logprob, c.tokens.size(), cfg.length_penalty);
                if (!have_finished ||
                    score > sequence_score(best_finished.logprob, best_finished.tokens.size(),
                                           cfg.length_penalty)) {
                    best_finished = c;
                    have_finished = true;
                }
            } else {
                active.push_back(c);
            }
        }
    }

    // beams still active at max_len terminate as-is
    detail::Beam best = best_finished;
    double best_score = have_finished
                            ? sequence_score(best.logprob, best.tokens.size(), cfg.length_penalty)
                            : -std::numeric_limits<double>::infinity();
    for (const auto& b : active) {
        const double s = sequence_score(b.logprob, b.tokens.size(), cfg.length_penalty);
        if (s > best_score) {
            best = b;
            best_score = s;
        }
    }

    // greedy floor
    auto greedy = greedy_decode_fn(step, cfg);
    if (scored_rollout(step, greedy, cfg) > best_score) return greedy;
    return best.tokens;
}

// ---- model-backed decoding ----

// Next-token scorer from a trained model and a fixed encoder output.
inline StepFn make_decoder_step(const ParamStore& store, const ModelConfig& config,
                                Tensor encoder_out, Tensor encoder_valid) {
    return [&store, config, encoder_out = std::move(encoder_out),
            encoder_valid = std::move(encoder_valid)](const std::vector<std::int64_t>& prefix) {
        Tape t;
        TapeParams P(t, store);
        ValueId enc = t.constant(encoder_out);
        ValueId logits = decoder_forward(t, P, config, enc, encoder_valid, prefix);
        const Tensor& lg = t.value(logits);
        const std::int64_t row = lg.rows() - 1;
        double mx = lg.at(row, 0);
        for (std::int64_t j = 1; j < lg.cols(); ++j) mx = std::max(mx, lg.at(row, j));
        double denom = 0.0;
        for (std::int64_t j = 0; j < lg.cols(); ++j) denom += std::exp(lg.at(row, j) - mx);
        const double log_denom = std::log(denom) + mx;
        std::vector<double> out(static_cast<std::size_t>(lg.cols()));
        for (std::int64_t j = 0; j < lg.cols(); ++j)
            out[static_cast<std::size_t>(j)] = lg.at(row, j) - log_denom;
        return out;
    };
}

inline std::vector<std::int64_t> beam_search(const ParamStore& store, const ModelConfig& config,
                                             const Tensor& encoder_out, int beam_width,
                                             int max_len, double length_penalty = 1.0) {
    DecodeConfig cfg;
    cfg.beam_width = beam_width;
    cfg.max_len = std::min(max_len, config.max_seq_len - 1);
    cfg.length_penalty = length_penalty;
    Tensor valid = Tensor::filled({encoder_out.rows()}, 1.0);
    return beam_search_fn(make_decoder_step(store, config, encoder_out, valid), cfg);
}

inline std::vector<std::int64_t> greedy_decode(const ParamStore& store, const ModelConfig& config,
                                               const Tensor& encoder_out, int max_len) {
    DecodeConfig cfg;
    cfg.max_len = std::min(max_len, config.max_seq_len - 1);
    Tensor valid = Tensor::filled({encoder_out.rows()}, 1.0);
    return greedy_decode_fn(make_decoder_step(store, config, encoder_out, valid), cfg);
}

}  // namespace eegdec
