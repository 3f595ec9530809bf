#pragma once
// Sequence-generation metrics: per-n BLEU (clipped modified precision with a
// corpus-level brevity penalty), a cumulative geometric-mean BLEU, and
// ROUGE-N / ROUGE-L with precision, recall and F1. All functions operate on
// token-id sequences so metric tokens always match generation tokens.
//
// BLEU is corpus-pooled; ROUGE is averaged sentence-wise. Zero denominators
// yield 0 and no smoothing is applied anywhere.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegdec/data.hpp"

namespace eegdec {

using TokenSeq = std::vector<std::int64_t>;
using NgramCounts = std::map<TokenSeq, std::int64_t>;

// All contiguous n-grams with multiplicity; shorter-than-n sequences give {}.
inline NgramCounts ngram_counts(const TokenSeq& tokens, int n) {
    if (n < 1) throw std::invalid_argument("ngram_counts: n must be >= 1");
    NgramCounts counts;
    const auto len = static_cast<std::int64_t>(tokens.size());
    for (std::int64_t i = 0; i + n <= len; ++i) {
        TokenSeq gram(tokens.begin() + i, tokens.begin() + i + n);
        ++counts[gram];
    }
    return counts;
}

inline std::int64_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    std::int64_t overlap = 0;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

inline std::int64_t total_count(const NgramCounts& c) {
    std::int64_t t = 0;
    for (const auto& [gram, count] : c) t += count;
    return t;
}

namespace detail {

struct BleuTallies {
    std::int64_t matched = 0;
    std::int64_t total = 0;
};

inline BleuTallies bleu_tallies(const std::vector<TokenSeq>& candidates,
                                const std::vector<TokenSeq>& references, int n) {
    BleuTallies t;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto cand = ngram_counts(candidates[i], n);
        auto ref = ngram_counts(references[i], n);
        t.matched += clipped_overlap(cand, ref);
        t.total += total_count(cand);
    }
    return t;
}

inline double brevity_penalty(const std::vector<TokenSeq>& candidates,
                              const std::vector<TokenSeq>& references) {
    std::int64_t cand_len = 0, ref_len = 0;
    for (const auto& c : candidates) cand_len += static_cast<std::int64_t>(c.size());
    for (const auto& r : references) ref_len += static_cast<std::int64_t>(r.size());
    if (cand_len == 0) return 0.0;
    return std::min(1.0, std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
}

inline void check_pairs(const std::vector<TokenSeq>& candidates,
                        const std::vector<TokenSeq>& references) {
    if (candidates.empty()) throw std::invalid_argument("bleu: empty candidate set");
    if (candidates.size() != references.size())
        throw std::invalid_argument("bleu: " + std::to_string(candidates.size()) +
                                    " candidates vs " + std::to_string(references.size()) +
                                    " references");
}

}  // namespace detail

// Per-n BLEU: corpus-pooled clipped precision for this n alone, times the
// corpus brevity penalty.
inline double bleu_n(const std::vector<TokenSeq>& candidates,
                     const std::vector<TokenSeq>& references, int n) {
    detail::check_pairs(candidates, references);
    const auto t = detail::bleu_tallies(candidates, references, n);
    if (t.total == 0) return 0.0;
    const double precision = static_cast<double>(t.matched) / static_cast<double>(t.total);
    return detail::brevity_penalty(candidates, references) * precision;
}

// Cumulative BLEU-n: geometric mean of the modified precisions for 1..n.
inline double bleu_cumulative(const std::vector<TokenSeq>& candidates,
                              const std::vector<TokenSeq>& references, int max_n) {
    detail::check_pairs(candidates, references);
    double log_sum = 0.0;
    for (int k = 1; k <= max_n; ++k) {
        const auto t = detail::bleu_tallies(candidates, references, k);
        if (t.matched == 0 || t.total == 0) return 0.0;
        log_sum += std::log(static_cast<double>(t.matched) / static_cast<double>(t.total));
    }
    return detail::brevity_penalty(candidates, references) *
           std::exp(log_sum / static_cast<double>(max_n));
}

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline double f1_of(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline RougeScore rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n) {
    auto cand = ngram_counts(candidate, n);
    auto ref = ngram_counts(reference, n);
    const auto overlap = static_cast<double>(clipped_overlap(cand, ref));
    const auto nc = total_count(cand), nr = total_count(ref);
    RougeScore s;
    s.precision = nc > 0 ? overlap / static_cast<double>(nc) : 0.0;
    s.recall = nr > 0 ? overlap / static_cast<double>(nr) : 0.0;
    s.f1 = f1_of(s.precision, s.recall);
    return s;
}

inline std::int64_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    const auto m = a.size(), n = b.size();
    std::vector<std::int64_t> prev(n + 1, 0), cur(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

inline RougeScore rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
    const auto l = static_cast<double>(lcs_length(candidate, reference));
    RougeScore s;
    s.precision = candidate.empty() ? 0.0 : l / static_cast<double>(candidate.size());
    s.recall = reference.empty() ? 0.0 : l / static_cast<double>(reference.size());
    s.f1 = f1_of(s.precision, s.recall);
    return s;
}

// ---- corpus-level report ----

struct MetricReport {
    std::map<int, double> bleu;                // n in 1..4 -> per-n score
    std::map<std::string, RougeScore> rouge;   // keys "1", "2", "L"
    std::int64_t n_sentences = 0;
};

// Scores candidate/reference pairs that have already been generated.
inline MetricReport score_pairs(const std::vector<TokenSeq>& candidates,
                                const std::vector<TokenSeq>& references) {
    detail::check_pairs(candidates, references);
    MetricReport report;
    report.n_sentences = static_cast<std::int64_t>(candidates.size());
    for (int n = 1; n <= 4; ++n) report.bleu[n] = bleu_n(candidates, references, n);
    const auto count = static_cast<double>(candidates.size());
    for (const auto& key : {std::string("1"), std::string("2"), std::string("L")}) {
        RougeScore acc;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            RougeScore s = key == "L" ? rouge_l(candidates[i], references[i])
                                      : rouge_n(candidates[i], references[i], key == "1" ? 1 : 2);
            acc.precision += s.precision;
            acc.recall += s.recall;
            acc.f1 += s.f1;
        }
        report.rouge[key] = {acc.precision / count, acc.recall / count, acc.f1 / count};
    }
    return report;
}

// Generation driven by a caller-supplied decode function; the reference text
// is never visible to it.
using GenerateFn = std::function<TokenSeq(const SentenceSample&)>;

inline TokenSeq strip_specials(const TokenSeq& ids) {
    TokenSeq out;
    for (auto id : ids)
        if (id != Vocabulary::PAD && id != Vocabulary::BOS && id != Vocabulary::EOS)
            out.push_back(id);
    return out;
}

inline MetricReport evaluate_corpus(const GenerateFn& generate,
                                    const std::vector<SentenceSample>& test_samples) {
    if (test_samples.empty()) throw std::invalid_argument("evaluate_corpus: empty test set");
    std::vector<TokenSeq> candidates, references;
    candidates.reserve(test_samples.size());
    references.reserve(test_samples.size());
    for (const auto& sample : test_samples) {
        candidates.push_back(strip_specials(generate(sample)));
        references.push_back(strip_specials(sample.token_ids));
    }
    return score_pairs(candidates, references);
}

// ---- rendering ----

inline std::string format_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline const std::vector<std::string>& metric_column_names() {
    static const std::vector<std::string> cols = {
        "bleu_1",    "bleu_2",    "rouge_1_p", "rouge_1_r", "rouge_1_f", "rouge_2_p",
        "rouge_2_r", "rouge_2_f", "rouge_l_p", "rouge_l_r", "rouge_l_f",
    };
    return cols;
}

inline std::vector<double> metric_column_values(const MetricReport& r) {
    return {
        r.bleu.at(1),          r.bleu.at(2),          r.rouge.at("1").precision,
        r.rouge.at("1").recall, r.rouge.at("1").f1,   r.rouge.at("2").precision,
        r.rouge.at("2").recall, r.rouge.at("2").f1,   r.rouge.at("L").precision,
        r.rouge.at("L").recall, r.rouge.at("L").f1,
    };
}

// Markdown table, one row per configuration; failed runs render as FAILED.
inline std::string metric_table_markdown(
    const std::vector<std::pair<std::string, std::optional<MetricReport>>>& rows) {
    std::ostringstream os;
    os << "| configuration |";
    for (const auto& c : metric_column_names()) os << ' ' << c << " |";
    os << '\n' << "|---|";
    for (std::size_t i = 0; i < metric_column_names().size(); ++i) os << "---|";
    os << '\n';
    for (const auto& [label, report] : rows) {
        os << "| " << label << " |";
        if (report) {
            for (double v : metric_column_values(*report)) os << ' ' << format_score(v) << " |";
        } else {
            for (std::size_t i = 0; i < metric_column_names().size(); ++i) os << " FAILED |";
        }
        os << '\n';
    }
    return os.str();
}

inline std::string metric_table_csv(
    const std::vector<std::pair<std::string, std::optional<MetricReport>>>& rows) {
    std::ostringstream os;
    os << "configuration";
    for (const auto& c : metric_column_names()) os << ',' << c;
    os << '\n';
    for (const auto& [label, report] : rows) {
        os << label;
        if (report) {
            for (double v : metric_column_values(*report)) os << ',' << format_score(v);
        } else {
            for (std::size_t i = 0; i < metric_column_names().size(); ++i) os << ",FAILED";
        }
        os << '\n';
    }
    return os.str();
}

inline nlohmann::json metric_report_json(const MetricReport& r) {
    nlohmann::json j;
    for (const auto& [n, v] : r.bleu) j["bleu"][std::to_string(n)] = v;
    for (const auto& [key, s] : r.rouge)
        j["rouge"][key] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
    j["n_sentences"] = r.n_sentences;
    return j;
}

inline MetricReport metric_report_from_json(const nlohmann::json& j) {
    MetricReport r;
    for (const auto& [key, v] : j.at("bleu").items()) r.bleu[std::stoi(key)] = v.get<double>();
    for (const auto& [key, v] : j.at("rouge").items())
        r.rouge[key] = {v.at("precision").get<double>(), v.at("recall").get<double>(),
                        v.at("f1").get<double>()};
    r.n_sentences = j.at("n_sentences").get<std::int64_t>();
    return r;
}

}  // namespace eegdec
