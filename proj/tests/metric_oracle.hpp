#pragma once
// Brute-force reference implementations for the metric tests. Deliberately
// structured differently from the library: n-grams are matched by scanning
// with used-flags instead of count maps, and the LCS is a memoized recursion
// instead of the iterative table.

#include <cstdint>
#include <vector>

namespace oracle {

using Seq = std::vector<std::int64_t>;

inline std::vector<Seq> list_ngrams(const Seq& tokens, int n) {
    std::vector<Seq> out;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
        out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                         tokens.begin() + static_cast<std::ptrdiff_t>(i) + n);
    return out;
}

// Clipped matches: each reference n-gram occurrence may be consumed once.
inline std::int64_t clipped_matches(const Seq& cand, const Seq& ref, int n) {
    auto cgrams = list_ngrams(cand, n);
    auto rgrams = list_ngrams(ref, n);
    std::vector<bool> used(rgrams.size(), false);
    std::int64_t matched = 0;
    for (const auto& g : cgrams) {
        for (std::size_t j = 0; j < rgrams.size(); ++j) {
            if (!used[j] && rgrams[j] == g) {
                used[j] = true;
                ++matched;
                break;
            }
        }
    }
    return matched;
}

inline double bleu_n(const std::vector<Seq>& cands, const std::vector<Seq>& refs, int n) {
    std::int64_t matched = 0, total = 0, clen = 0, rlen = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        matched += clipped_matches(cands[i], refs[i], n);
        total += static_cast<std::int64_t>(list_ngrams(cands[i], n).size());
        clen += static_cast<std::int64_t>(cands[i].size());
        rlen += static_cast<std::int64_t>(refs[i].size());
    }
    if (total == 0 || clen == 0) return 0.0;
    double bp = 1.0;
    if (clen < rlen) bp = std::exp(1.0 - static_cast<double>(rlen) / static_cast<double>(clen));
    return bp * static_cast<double>(matched) / static_cast<double>(total);
}

struct PRF {
    double p = 0.0, r = 0.0, f = 0.0;
};

inline PRF rouge_n(const Seq& cand, const Seq& ref, int n) {
    const auto matched = static_cast<double>(clipped_matches(cand, ref, n));
    const auto nc = static_cast<double>(list_ngrams(cand, n).size());
    const auto nr = static_cast<double>(list_ngrams(ref, n).size());
    PRF s;
    s.p = nc > 0 ? matched / nc : 0.0;
    s.r = nr > 0 ? matched / nr : 0.0;
    s.f = (s.p + s.r) > 0 ? 2.0 * s.p * s.r / (s.p + s.r) : 0.0;
    return s;
}

inline std::int64_t lcs_rec(const Seq& a, const Seq& b, std::size_t i, std::size_t j,
                            std::vector<std::int64_t>& memo) {
    if (i == a.size() || j == b.size()) return 0;
    auto& slot = memo[i * (b.size() + 1) + j];
    if (slot >= 0) return slot;
    if (a[i] == b[j])
        slot = 1 + lcs_rec(a, b, i + 1, j + 1, memo);
    else
        slot = std::max(lcs_rec(a, b, i + 1, j, memo), lcs_rec(a, b, i, j + 1, memo));
    return slot;
}

inline std::int64_t lcs(const Seq& a, const Seq& b) {
    std::vector<std::int64_t> memo((a.size() + 1) * (b.size() + 1), -1);
    return lcs_rec(a, b, 0, 0, memo);
}

inline PRF rouge_l(const Seq& cand, const Seq& ref) {
    const auto l = static_cast<double>(lcs(cand, ref));
    PRF s;
    s.p = cand.empty() ? 0.0 : l / static_cast<double>(cand.size());
    s.r = ref.empty() ? 0.0 : l / static_cast<double>(ref.size());
    s.f = (s.p + s.r) > 0 ? 2.0 * s.p * s.r / (s.p + s.r) : 0.0;
    return s;
}

}  // namespace oracle
