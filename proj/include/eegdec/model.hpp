#pragma once
// Encoder-decoder architecture: a stack of transformer encoder layers with a
// configurable activation and norm placement over per-word EEG features, and
// a small post-norm decoder with causal self-attention and cross-attention.
// The activation under test lives only in the encoder feed-forward blocks;
// the decoder always uses gelu.

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegdec/activations.hpp"
#include "eegdec/rng.hpp"
#include "eegdec/tape.hpp"
#include "eegdec/tensor.hpp"

namespace eegdec {

// ---- configuration ----

struct ModelConfig {
    int encoder_layers = 6;
    int model_dim = 128;  // N
    int heads = 8;        // S
    int ff_dim = 512;
    std::string activation = "relu";
    double elu_alpha = 1.0;
    double leaky_slope = 0.01;
    bool norm_first = false;
    bool heads_same_as_layers = false;
    int decoder_layers = 2;
    std::int64_t vocab_size = 0;
    std::int64_t electrodes = 0;
    int max_seq_len = 64;
    double dropout_rate = 0.1;
    double layer_norm_eps = 1e-5;

    // heads_same_as_layers overrides the head count before validation.
    ModelConfig resolved() const {
        ModelConfig c = *this;
        if (c.heads_same_as_layers) c.heads = c.encoder_layers;
        return c;
    }

    std::vector<std::string> validation_errors() const {
        std::vector<std::string> errs;
        const ModelConfig c = resolved();
        if (c.encoder_layers < 1) errs.push_back("encoder_layers must be >= 1");
        if (c.decoder_layers < 1) errs.push_back("decoder_layers must be >= 1");
        if (c.model_dim < 1) errs.push_back("model_dim must be >= 1");
        if (c.heads < 1) errs.push_back("heads must be >= 1");
        if (c.heads >= 1 && c.model_dim % c.heads != 0)
            errs.push_back("model_dim " + std::to_string(c.model_dim) +
                           " not divisible by heads " + std::to_string(c.heads));
        if (c.ff_dim < 1) errs.push_back("ff_dim must be >= 1");
        if (c.vocab_size < 4) errs.push_back("vocab_size must cover the 4 special tokens");
        if (c.electrodes < 1) errs.push_back("electrodes must be >= 1");
        if (c.max_seq_len < 2) errs.push_back("max_seq_len must be >= 2");
        if (c.dropout_rate < 0.0 || c.dropout_rate >= 1.0)
            errs.push_back("dropout_rate must be in [0, 1)");
        try {
            activation_spec();
        } catch (const std::exception& e) {
            errs.push_back(e.what());
        }
        return errs;
    }

    void validate() const {
        auto errs = validation_errors();
        if (errs.empty()) return;
        std::string msg = "invalid model config:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw std::invalid_argument(msg);
    }

    // Template spec: kind, degree and fixed params; learnable coefficients
    // live in the parameter store, one tensor per encoder layer.
    ActivationSpec activation_spec() const {
        ActivationSpec s = activation_from_name(activation);
        s.elu_alpha = elu_alpha;
        s.leaky_slope = leaky_slope;
        s.params.clear();
        if (s.has_learnable()) s.params.assign(static_cast<std::size_t>(s.param_count()), 0.0);
        s.validate();
        ActivationSpec out = s;
        out.params.clear();
        return out;
    }
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    return nlohmann::json{
        {"encoder_layers", c.encoder_layers},
        {"model_dim", c.model_dim},
        {"heads", c.heads},
        {"ff_dim", c.ff_dim},
        {"activation", c.activation},
        {"elu_alpha", c.elu_alpha},
        {"leaky_slope", c.leaky_slope},
        {"norm_first", c.norm_first},
        {"heads_same_as_layers", c.heads_same_as_layers},
        {"decoder_layers", c.decoder_layers},
        {"vocab_size", c.vocab_size},
        {"electrodes", c.electrodes},
        {"max_seq_len", c.max_seq_len},
        {"dropout_rate", c.dropout_rate},
        {"layer_norm_eps", c.layer_norm_eps},
    };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.encoder_layers = j.at("encoder_layers").get<int>();
    c.model_dim = j.at("model_dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.ff_dim = j.at("ff_dim").get<int>();
    c.activation = j.at("activation").get<std::string>();
    c.elu_alpha = j.at("elu_alpha").get<double>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.norm_first = j.at("norm_first").get<bool>();
    c.heads_same_as_layers = j.at("heads_same_as_layers").get<bool>();
    c.decoder_layers = j.at("decoder_layers").get<int>();
    c.vocab_size = j.at("vocab_size").get<std::int64_t>();
    c.electrodes = j.at("electrodes").get<std::int64_t>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
    return c;
}

// ---- parameter store ----

struct Param {
    Tensor value;
    bool frozen = false;
};

struct ParamStore {
    std::map<std::string, Param> entries;

    Tensor& at(const std::string& name) {
        auto it = entries.find(name);
        if (it == entries.end()) throw std::out_of_range("no parameter named " + name);
        return it->second.value;
    }
    const Tensor& at(const std::string& name) const {
        auto it = entries.find(name);
        if (it == entries.end()) throw std::out_of_range("no parameter named " + name);
        return it->second.value;
    }

    void insert(const std::string& name, Tensor value) {
        if (!entries.emplace(name, Param{std::move(value), false}).second)
            throw std::invalid_argument("duplicate parameter name " + name);
    }

    bool frozen(const std::string& name) const { return entries.at(name).frozen; }

    void set_frozen_prefix(const std::string& prefix, bool frozen) {
        for (auto& [name, p] : entries)
            if (name.rfind(prefix, 0) == 0) p.frozen = frozen;
    }

    void set_all_frozen(bool frozen) {
        for (auto& [name, p] : entries) p.frozen = frozen;
    }

    std::int64_t total_values() const {
        std::int64_t n = 0;
        for (const auto& [name, p] : entries) n += p.value.size();
        return n;
    }
};

// ---- initialization ----

namespace detail {

inline Tensor xavier_uniform(std::int64_t fan_in, std::int64_t fan_out, Rng rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
    return w;
}

inline void insert_attention(ParamStore& store, const std::string& prefix, int dim, Rng& root) {
    for (const auto* name : {"wq", "wk", "wv", "wo"})
        store.insert(prefix + "." + name, xavier_uniform(dim, dim, root.fork(prefix + name)));
    for (const auto* name : {"bq", "bk", "bv", "bo"})
        store.insert(prefix + "." + name, Tensor({dim}));
}

inline void insert_layer_norm(ParamStore& store, const std::string& prefix, int dim) {
    store.insert(prefix + ".gain", Tensor::filled({dim}, 1.0));
    store.insert(prefix + ".bias", Tensor({dim}));
}

inline void insert_ff(ParamStore& store, const std::string& prefix, int dim, int ff_dim, Rng& root) {
    store.insert(prefix + ".w1", xavier_uniform(dim, ff_dim, root.fork(prefix + "w1")));
    store.insert(prefix + ".b1", Tensor({ff_dim}));
    store.insert(prefix + ".w2", xavier_uniform(ff_dim, dim, root.fork(prefix + "w2")));
    store.insert(prefix + ".b2", Tensor({dim}));
}

}  // namespace detail

inline ParamStore init_model_params(const ModelConfig& config, std::uint64_t seed) {
    const ModelConfig c = config.resolved();
    c.validate();
    Rng root(seed);
    ParamStore store;

    store.insert("input_proj.weight",
                 detail::xavier_uniform(c.electrodes, c.model_dim, root.fork("input_proj")));
    store.insert("input_proj.bias", Tensor({c.model_dim}));

    const ActivationSpec act = c.activation_spec();
    for (int l = 0; l < c.encoder_layers; ++l) {
        const std::string p = "enc." + std::to_string(l);
        detail::insert_attention(store, p + ".attn", c.model_dim, root);
        detail::insert_layer_norm(store, p + ".ln1", c.model_dim);
        detail::insert_layer_norm(store, p + ".ln2", c.model_dim);
        detail::insert_ff(store, p + ".ff", c.model_dim, c.ff_dim, root);
        if (act.has_learnable()) {
            auto coeffs = init_params(act.kind, act.degree,
                                      root.fork(p + ".act").next_u64());
            store.insert(p + ".act.coeffs",
                         Tensor({static_cast<std::int64_t>(coeffs.size())}, coeffs));
        }
    }

    store.insert("dec.embed",
                 detail::xavier_uniform(c.vocab_size, c.model_dim, root.fork("dec.embed")));
    for (int l = 0; l < c.decoder_layers; ++l) {
        const std::string p = "dec." + std::to_string(l);
        detail::insert_attention(store, p + ".self", c.model_dim, root);
        detail::insert_attention(store, p + ".cross", c.model_dim, root);
        detail::insert_layer_norm(store, p + ".ln1", c.model_dim);
        detail::insert_layer_norm(store, p + ".ln2", c.model_dim);
        detail::insert_layer_norm(store, p + ".ln3", c.model_dim);
        detail::insert_ff(store, p + ".ff", c.model_dim, c.ff_dim, root);
    }
    store.insert("dec.out.weight",
                 detail::xavier_uniform(c.model_dim, c.vocab_size, root.fork("dec.out")));
    store.insert("dec.out.bias", Tensor({c.vocab_size}));
    return store;
}

// ---- positional encoding and masks ----

inline Tensor sinusoidal_positional_encoding(std::int64_t n_positions, std::int64_t dim) {
    Tensor pe({n_positions, dim});
    for (std::int64_t pos = 0; pos < n_positions; ++pos) {
        for (std::int64_t i = 0; i < dim; i += 2) {
            const double angle =
                static_cast<double>(pos) /
                std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
            pe.at(pos, i) = std::sin(angle);
            if (i + 1 < dim) pe.at(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

// [Tq x Tk] mask from a per-key validity vector.
inline Tensor key_padding_mask(std::int64_t n_queries, const Tensor& key_valid) {
    Tensor m({n_queries, key_valid.dim(0)});
    for (std::int64_t i = 0; i < n_queries; ++i)
        for (std::int64_t j = 0; j < key_valid.dim(0); ++j) m.at(i, j) = key_valid[j];
    return m;
}

inline Tensor causal_mask(std::int64_t n) {
    Tensor m({n, n});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j <= i; ++j) m.at(i, j) = 1.0;
    return m;
}

// ---- forward passes ----

// Binds store parameters to tape nodes, one node per name.
class TapeParams {
public:
    TapeParams(Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

    ValueId operator()(const std::string& name) {
        auto it = cache_.find(name);
        if (it != cache_.end()) return it->second;
        const auto& p = store_.entries.at(name);
        ValueId id = tape_.parameter(name, p.value, p.frozen);
        cache_.emplace(name, id);
        return id;
    }

private:
    Tape& tape_;
    const ParamStore& store_;
    std::map<std::string, ValueId> cache_;
};

// Inverted dropout; inactive (eval mode) when rng is null or rate is zero.
struct DropoutCtx {
    double rate = 0.0;
    Rng* rng = nullptr;
    bool active() const { return rng != nullptr && rate > 0.0; }
};

inline ValueId apply_dropout(Tape& t, ValueId x, const DropoutCtx& ctx) {
    if (!ctx.active()) return x;
    const Tensor& v = t.value(x);
    Tensor mask = Tensor::zeros_like(v);
    const double keep = 1.0 - ctx.rate;
    for (std::int64_t i = 0; i < mask.size(); ++i)
        mask[i] = ctx.rng->uniform() < keep ? 1.0 / keep : 0.0;
    return t.hadamard_const(x, mask);
}

// Scaled dot-product attention over pre-projected Q, K, V, split into heads.
// mask is [Tq x Tk] with 1 on attendable keys.
inline ValueId attention_core(Tape& t, ValueId q, ValueId k, ValueId v, int heads,
                              const Tensor& mask) {
    const std::int64_t dim = t.value(q).cols();
    if (dim % heads != 0)
        throw ShapeError("attention: dim " + std::to_string(dim) + " not divisible by " +
                         std::to_string(heads) + " heads");
    const std::int64_t head_dim = dim / heads;
    const double scaling = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<ValueId> outputs;
    outputs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        ValueId qh = t.slice_cols(q, h * head_dim, head_dim);
        ValueId kh = t.slice_cols(k, h * head_dim, head_dim);
        ValueId vh = t.slice_cols(v, h * head_dim, head_dim);
        ValueId scores = t.scale(t.matmul(qh, t.transpose(kh)), scaling);
        ValueId weights = t.masked_softmax_rows(scores, mask);
        outputs.push_back(t.matmul(weights, vh));
    }
    return heads == 1 ? outputs[0] : t.concat_cols(outputs);
}

inline ValueId multi_head_attention(Tape& t, TapeParams& P, const std::string& prefix,
                                    ValueId q_in, ValueId kv_in, int heads, const Tensor& mask) {
    ValueId q = t.add_row_vector(t.matmul(q_in, P(prefix + ".wq")), P(prefix + ".bq"));
    ValueId k = t.add_row_vector(t.matmul(kv_in, P(prefix + ".wk")), P(prefix + ".bk"));
    ValueId v = t.add_row_vector(t.matmul(kv_in, P(prefix + ".wv")), P(prefix + ".bv"));
    ValueId core = attention_core(t, q, k, v, heads, mask);
    return t.add_row_vector(t.matmul(core, P(prefix + ".wo")), P(prefix + ".bo"));
}

namespace detail {

inline ValueId feed_forward(Tape& t, TapeParams& P, const std::string& prefix, ValueId x,
                            const ActivationSpec& act, const std::string& coeff_name) {
    ValueId hidden = t.add_row_vector(t.matmul(x, P(prefix + ".w1")), P(prefix + ".b1"));
    ValueId activated = act.has_learnable() ? t.activation(hidden, act, P(coeff_name))
                                            : t.activation(hidden, act);
    return t.add_row_vector(t.matmul(activated, P(prefix + ".w2")), P(prefix + ".b2"));
}

}  // namespace detail

// Encoder: input projection + sinusoidal positions, then encoder_layers
// blocks. Post-norm (baseline): x = LN(x + Attn(x)); x = LN(x + FF(x)).
// Pre-norm: x = x + Attn(LN(x)); x = x + FF(LN(x)).
inline ValueId encoder_forward(Tape& t, TapeParams& P, const ModelConfig& config,
                               const Tensor& eeg_features, const Tensor& pad_mask,
                               const DropoutCtx& dropout = {}) {
    const ModelConfig c = config.resolved();
    if (eeg_features.ndim() != 2 || eeg_features.cols() != c.electrodes)
        throw ShapeError("encoder: feature width " + shape_str(eeg_features.shape()) +
                         " does not match input projection width " +
                         std::to_string(c.electrodes));
    const std::int64_t n_words = eeg_features.rows();
    if (pad_mask.dim(0) != n_words) throw ShapeError("encoder: pad mask length mismatch");
    if (n_words > c.max_seq_len)
        throw ShapeError("encoder: sequence length " + std::to_string(n_words) +
                         " exceeds max_seq_len " + std::to_string(c.max_seq_len));

    const ActivationSpec act = c.activation_spec();
    Tensor pe = sinusoidal_positional_encoding(c.max_seq_len, c.model_dim);
    Tensor pos({n_words, c.model_dim});
    for (std::int64_t i = 0; i < n_words; ++i)
        for (std::int64_t j = 0; j < c.model_dim; ++j) pos.at(i, j) = pe.at(i, j);

    ValueId x = t.add_row_vector(t.matmul(t.constant(eeg_features), P("input_proj.weight")),
                                 P("input_proj.bias"));
    x = t.add(x, t.constant(pos));
    x = apply_dropout(t, x, dropout);

    const Tensor attn_mask = key_padding_mask(n_words, pad_mask);
    for (int l = 0; l < c.encoder_layers; ++l) {
        const std::string p = "enc." + std::to_string(l);
        const std::string coeffs = p + ".act.coeffs";
        if (c.norm_first) {
            ValueId attn_in = t.layer_norm(x, P(p + ".ln1.gain"), P(p + ".ln1.bias"),
                                           c.layer_norm_eps);
            ValueId attn = multi_head_attention(t, P, p + ".attn", attn_in, attn_in, c.heads,
                                                attn_mask);
            x = t.add(x, apply_dropout(t, attn, dropout));
            ValueId ff_in =
                t.layer_norm(x, P(p + ".ln2.gain"), P(p + ".ln2.bias"), c.layer_norm_eps);
            ValueId ff = detail::feed_forward(t, P, p + ".ff", ff_in, act, coeffs);
            x = t.add(x, apply_dropout(t, ff, dropout));
        } else {
            ValueId attn = multi_head_attention(t, P, p + ".attn", x, x, c.heads, attn_mask);
            x = t.layer_norm(t.add(x, apply_dropout(t, attn, dropout)), P(p + ".ln1.gain"),
                             P(p + ".ln1.bias"), c.layer_norm_eps);
            ValueId ff = detail::feed_forward(t, P, p + ".ff", x, act, coeffs);
            x = t.layer_norm(t.add(x, apply_dropout(t, ff, dropout)), P(p + ".ln2.gain"),
                             P(p + ".ln2.bias"), c.layer_norm_eps);
        }
    }
    return x;
}

// Decoder: fixed post-norm blocks of causal self-attention, cross-attention
// into the encoder output, and a gelu feed-forward; returns logits over the
// vocabulary for every prefix position.
inline ValueId decoder_forward(Tape& t, TapeParams& P, const ModelConfig& config,
                               ValueId encoder_out, const Tensor& encoder_valid,
                               const std::vector<std::int64_t>& prefix_ids,
                               const DropoutCtx& dropout = {}) {
    const ModelConfig c = config.resolved();
    const auto n = static_cast<std::int64_t>(prefix_ids.size());
    if (n == 0) throw std::invalid_argument("decoder: empty prefix");
    if (n > c.max_seq_len)
        throw std::invalid_argument("decoder: prefix length " + std::to_string(n) +
                                    " exceeds max_seq_len " + std::to_string(c.max_seq_len));

    const ActivationSpec dec_act = [] {
        ActivationSpec s;
        s.kind = ActKind::gelu;
        return s;
    }();

    Tensor pe = sinusoidal_positional_encoding(c.max_seq_len, c.model_dim);
    Tensor pos({n, c.model_dim});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < c.model_dim; ++j) pos.at(i, j) = pe.at(i, j);

    ValueId x = t.select_rows(P("dec.embed"), prefix_ids);
    x = t.add(x, t.constant(pos));
    x = apply_dropout(t, x, dropout);

    const Tensor self_mask = causal_mask(n);
    const Tensor cross_mask = key_padding_mask(n, encoder_valid);
    for (int l = 0; l < c.decoder_layers; ++l) {
        const std::string p = "dec." + std::to_string(l);
        ValueId self = multi_head_attention(t, P, p + ".self", x, x, c.heads, self_mask);
        x = t.layer_norm(t.add(x, apply_dropout(t, self, dropout)), P(p + ".ln1.gain"),
                         P(p + ".ln1.bias"), c.layer_norm_eps);
        ValueId cross =
            multi_head_attention(t, P, p + ".cross", x, encoder_out, c.heads, cross_mask);
        x = t.layer_norm(t.add(x, apply_dropout(t, cross, dropout)), P(p + ".ln2.gain"),
                         P(p + ".ln2.bias"), c.layer_norm_eps);
        ValueId ff = detail::feed_forward(t, P, p + ".ff", x, dec_act, "");
        x = t.layer_norm(t.add(x, apply_dropout(t, ff, dropout)), P(p + ".ln3.gain"),
                         P(p + ".ln3.bias"), c.layer_norm_eps);
    }
    return t.add_row_vector(t.matmul(x, P("dec.out.weight")), P("dec.out.bias"));
}

// Eval-mode encoder pass returning plain tensors.
inline Tensor run_encoder(const ParamStore& store, const ModelConfig& config,
                          const Tensor& eeg_features) {
    Tape t;
    TapeParams P(t, store);
    Tensor pad_mask = Tensor::filled({eeg_features.rows()}, 1.0);
    return t.value(encoder_forward(t, P, config, eeg_features, pad_mask));
}

}  // namespace eegdec
