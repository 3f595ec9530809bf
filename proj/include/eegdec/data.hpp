#pragma once
// Data path: per-word EEG recordings averaged into 1D feature vectors,
// line-delimited interchange files, a deterministic synthetic corpus with
// known per-word signatures, word-level tokenization, and the train /
// valid / test split.
//
// Interchange format: UTF-8, one JSON object per line with fields
//   sentence_id : string
//   text        : target sentence
//   words       : array (one entry per word) of arrays of recordings,
//                 each recording an array of per-electrode values
// A word with zero recordings drops the whole sentence; the count of
// dropped sentences is reported to the caller.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eegdec/rng.hpp"
#include "eegdec/tensor.hpp"

namespace eegdec {

// ---- domain types ----

// 2D matrix of per-word EEG samples: recordings x electrodes.
struct WordEegRecording {
    Tensor samples;
};

struct RawSentence {
    std::string sentence_id;
    std::string text;
    std::vector<WordEegRecording> words;
};

struct SentenceSample {
    std::string sentence_id;
    std::string text;
    std::vector<Tensor> word_features;     // one [electrodes] vector per word
    std::vector<std::int64_t> token_ids;   // BOS ... EOS once a vocabulary is applied
};

struct MissingDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- averaging ----

inline Tensor average_word_eeg(const WordEegRecording& rec) {
    if (rec.samples.ndim() != 2 || rec.samples.rows() < 1)
        throw MissingDataError("word has no usable recordings");
    const std::int64_t r = rec.samples.rows(), e = rec.samples.cols();
    Tensor out({e});
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < e; ++j) out[j] += rec.samples.at(i, j);
    for (std::int64_t j = 0; j < e; ++j) out[j] /= static_cast<double>(r);
    return out;
}

struct SampleSet {
    std::vector<SentenceSample> samples;
    std::int64_t dropped_sentences = 0;
    std::int64_t electrodes = 0;
};

inline SampleSet samples_from_raw(const std::vector<RawSentence>& raw) {
    SampleSet out;
    for (const auto& sentence : raw) {
        SentenceSample s;
        s.sentence_id = sentence.sentence_id;
        s.text = sentence.text;
        bool usable = !sentence.words.empty();
        for (const auto& w : sentence.words) {
            if (w.samples.ndim() != 2 || w.samples.rows() < 1) {
                usable = false;
                break;
            }
            s.word_features.push_back(average_word_eeg(w));
        }
        if (!usable) {
            ++out.dropped_sentences;
            continue;
        }
        if (out.electrodes == 0) out.electrodes = s.word_features.front().dim(0);
        out.samples.push_back(std::move(s));
    }
    return out;
}

// ---- interchange files ----

inline std::vector<RawSentence> load_raw_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open data file: " + path);
    std::vector<RawSentence> out;
    std::string line;
    std::int64_t lineno = 0;
    std::int64_t electrodes = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("malformed record at line " + std::to_string(lineno) + ": " +
                                     e.what());
        }
        if (!j.contains("sentence_id") || !j.contains("text") || !j.contains("words"))
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": record needs sentence_id, text, words");
        RawSentence s;
        s.sentence_id = j.at("sentence_id").get<std::string>();
        s.text = j.at("text").get<std::string>();
        for (const auto& word : j.at("words")) {
            const auto n_rec = static_cast<std::int64_t>(word.size());
            if (n_rec == 0) {
                s.words.push_back(WordEegRecording{Tensor({0, electrodes})});
                continue;
            }
            const auto n_el = static_cast<std::int64_t>(word.at(0).size());
            if (electrodes == 0) electrodes = n_el;
            if (n_el != electrodes || n_el == 0)
                throw std::runtime_error("line " + std::to_string(lineno) +
                                         ": electrode count " + std::to_string(n_el) +
                                         " does not match dataset-wide count " +
                                         std::to_string(electrodes));
            Tensor m({n_rec, electrodes});
            for (std::int64_t r = 0; r < n_rec; ++r) {
                const auto& rec = word.at(static_cast<std::size_t>(r));
                if (static_cast<std::int64_t>(rec.size()) != electrodes)
                    throw std::runtime_error("line " + std::to_string(lineno) +
                                             ": ragged recording width");
                for (std::int64_t c = 0; c < electrodes; ++c)
                    m.at(r, c) = rec.at(static_cast<std::size_t>(c)).get<double>();
            }
            if (!m.all_finite())
                throw std::runtime_error("line " + std::to_string(lineno) +
                                         ": non-finite EEG value");
            s.words.push_back(WordEegRecording{std::move(m)});
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline SampleSet load_zuco_jsonl(const std::string& path) {
    return samples_from_raw(load_raw_jsonl(path));
}

inline void save_raw_jsonl(const std::string& path, const std::vector<RawSentence>& raw) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write data file: " + path);
    for (const auto& s : raw) {
        nlohmann::json words = nlohmann::json::array();
        for (const auto& w : s.words) {
            nlohmann::json recs = nlohmann::json::array();
            for (std::int64_t r = 0; r < w.samples.rows(); ++r) {
                nlohmann::json rec = nlohmann::json::array();
                for (std::int64_t c = 0; c < w.samples.cols(); ++c)
                    rec.push_back(w.samples.at(r, c));
                recs.push_back(std::move(rec));
            }
            words.push_back(std::move(recs));
        }
        nlohmann::json j{{"sentence_id", s.sentence_id}, {"text", s.text}, {"words", words}};
        out << j.dump() << '\n';
    }
}

// ---- synthetic corpus ----

struct SyntheticConfig {
    std::int64_t vocab_size = 30;
    std::int64_t n_sentences = 300;
    int min_len = 4;
    int max_len = 10;
    std::int64_t electrodes = 105;
    double noise_std = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        if (vocab_size < 10) throw std::invalid_argument("synthetic vocab_size must be >= 10");
        if (n_sentences < 1) throw std::invalid_argument("need at least one sentence");
        if (min_len < 1 || max_len < min_len) throw std::invalid_argument("bad length range");
        if (electrodes < 1) throw std::invalid_argument("electrodes must be >= 1");
        if (noise_std < 0.0) throw std::invalid_argument("noise_std must be >= 0");
    }
};

inline std::string synthetic_word(std::int64_t index) { return "w" + std::to_string(index); }

// Fixed latent per-word signature; every occurrence of the word emits noisy
// copies of it, so with zero noise averaging recovers it exactly. Values are
// quantized to a 2^-20 grid, which leaves enough mantissa slack that summing
// up to 4 identical copies and dividing back is exact in IEEE arithmetic.
inline Tensor synthetic_signature(const SyntheticConfig& cfg, std::int64_t word_index) {
    Rng rng = Rng(cfg.seed).fork("signature", static_cast<std::uint64_t>(word_index));
    Tensor sig({cfg.electrodes});
    for (std::int64_t i = 0; i < cfg.electrodes; ++i)
        sig[i] = std::round(rng.gaussian() * 1048576.0) / 1048576.0;
    return sig;
}

inline std::vector<RawSentence> gen_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::vector<Tensor> sigs;
    sigs.reserve(static_cast<std::size_t>(cfg.vocab_size));
    for (std::int64_t w = 0; w < cfg.vocab_size; ++w) sigs.push_back(synthetic_signature(cfg, w));

    Rng corpus = Rng(cfg.seed).fork("corpus");
    std::vector<RawSentence> out;
    out.reserve(static_cast<std::size_t>(cfg.n_sentences));
    for (std::int64_t s = 0; s < cfg.n_sentences; ++s) {
        RawSentence sentence;
        {
            std::ostringstream id;
            id << "syn-" << s;
            sentence.sentence_id = id.str();
        }
        const auto len = corpus.uniform_int(cfg.min_len, cfg.max_len);
        std::string text;
        for (std::int64_t t = 0; t < len; ++t) {
            const auto widx = corpus.uniform_int(0, cfg.vocab_size - 1);
            if (t) text += ' ';
            text += synthetic_word(widx);
            const auto n_rec = corpus.uniform_int(1, 4);
            Tensor m({n_rec, cfg.electrodes});
            for (std::int64_t r = 0; r < n_rec; ++r)
                for (std::int64_t e = 0; e < cfg.electrodes; ++e)
                    m.at(r, e) = sigs[static_cast<std::size_t>(widx)][e] +
                                 (cfg.noise_std > 0.0 ? cfg.noise_std * corpus.gaussian() : 0.0);
            sentence.words.push_back(WordEegRecording{std::move(m)});
        }
        sentence.text = std::move(text);
        out.push_back(std::move(sentence));
    }
    return out;
}

inline SampleSet gen_synthetic_samples(const SyntheticConfig& cfg) {
    return samples_from_raw(gen_synthetic(cfg));
}

// ---- tokenization and vocabulary ----

// Lowercased maximal alphanumeric runs; punctuation and whitespace separate.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

struct Vocabulary {
    static constexpr std::int64_t PAD = 0;
    static constexpr std::int64_t BOS = 1;
    static constexpr std::int64_t EOS = 2;
    static constexpr std::int64_t UNK = 3;

    std::vector<std::string> id_to_token{"<pad>", "<bos>", "<eos>", "<unk>"};
    std::map<std::string, std::int64_t> token_to_id;

    std::int64_t size() const { return static_cast<std::int64_t>(id_to_token.size()); }

    std::int64_t add(const std::string& token) {
        auto it = token_to_id.find(token);
        if (it != token_to_id.end()) return it->second;
        const std::int64_t id = size();
        id_to_token.push_back(token);
        token_to_id.emplace(token, id);
        return id;
    }

    std::int64_t id_of(const std::string& token) const {
        auto it = token_to_id.find(token);
        return it == token_to_id.end() ? UNK : it->second;
    }

    const std::string& token_of(std::int64_t id) const {
        if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
        return id_to_token[static_cast<std::size_t>(id)];
    }

    std::vector<std::int64_t> encode(const std::string& text) const {
        std::vector<std::int64_t> ids{BOS};
        for (const auto& tok : tokenize(text)) ids.push_back(id_of(tok));
        ids.push_back(EOS);
        return ids;
    }

    std::string decode(const std::vector<std::int64_t>& ids) const {
        std::string out;
        for (auto id : ids) {
            if (id == PAD || id == BOS || id == EOS) continue;
            if (!out.empty()) out += ' ';
            out += token_of(id);
        }
        return out;
    }
};

inline Vocabulary build_vocab(const std::vector<SentenceSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("build_vocab: no samples");
    Vocabulary v;
    for (const auto& s : samples)
        for (const auto& tok : tokenize(s.text)) v.add(tok);
    return v;
}

inline void apply_vocab(const Vocabulary& v, std::vector<SentenceSample>& samples) {
    for (auto& s : samples) s.token_ids = v.encode(s.text);
}

// ---- split ----

struct SplitSpec {
    double train_fraction = 0.8;
    double valid_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (std::fabs(train_fraction + valid_fraction + test_fraction - 1.0) > 1e-9)
            throw std::invalid_argument("split fractions must sum to 1");
    }
};

struct SplitResult {
    std::vector<SentenceSample> train, valid, test;
};

inline SplitResult split(std::vector<SentenceSample> samples, const SplitSpec& spec) {
    spec.validate();
    const auto n = static_cast<std::int64_t>(samples.size());
    if (n < 10) throw std::invalid_argument("split needs at least 10 samples, got " +
                                            std::to_string(n));
    Rng rng = Rng(spec.seed).fork("split");
    rng.shuffle(samples);
    const auto cut1 = static_cast<std::int64_t>(spec.train_fraction * static_cast<double>(n));
    const auto cut2 =
        static_cast<std::int64_t>((spec.train_fraction + spec.valid_fraction) * static_cast<double>(n));
    SplitResult out;
    out.train.assign(samples.begin(), samples.begin() + cut1);
    out.valid.assign(samples.begin() + cut1, samples.begin() + cut2);
    out.test.assign(samples.begin() + cut2, samples.end());
    return out;
}

}  // namespace eegdec
