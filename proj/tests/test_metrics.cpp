#include <catch2/catch_amalgamated.hpp>

#include "eegdec/metrics.hpp"
#include "eegdec/rng.hpp"
#include "metric_oracle.hpp"

using namespace eegdec;
using Catch::Approx;

namespace {

TokenSeq random_seq(Rng& rng, std::int64_t vocab, std::int64_t max_len, std::int64_t min_len = 0) {
    TokenSeq s(static_cast<std::size_t>(rng.uniform_int(min_len, max_len)));
    for (auto& t : s) t = rng.uniform_int(0, vocab - 1);
    return s;
}

}  // namespace

TEST_CASE("ngram_counts with multiplicity") {
    TokenSeq aba{0, 1, 0};
    auto uni = ngram_counts(aba, 1);
    REQUIRE(uni.at({0}) == 2);
    REQUIRE(uni.at({1}) == 1);
    auto bi = ngram_counts(aba, 2);
    REQUIRE(bi.size() == 2);
    REQUIRE(bi.at({0, 1}) == 1);
    REQUIRE(bi.at({1, 0}) == 1);
    REQUIRE(ngram_counts({7}, 2).empty());
}

TEST_CASE("bleu on a perfect match is one") {
    std::vector<TokenSeq> c{{1, 2, 3, 4}};
    REQUIRE(bleu_n(c, c, 1) == Approx(1.0));
    REQUIRE(bleu_n(c, c, 2) == Approx(1.0));
    REQUIRE(bleu_cumulative(c, c, 4) == Approx(1.0).margin(1e-12));
}

TEST_CASE("bleu clips repeated candidate tokens") {
    // candidate "the the the" vs reference "the cat"
    std::vector<TokenSeq> cand{{0, 0, 0}};
    std::vector<TokenSeq> ref{{0, 1}};
    REQUIRE(bleu_n(cand, ref, 1) == Approx(1.0 / 3.0));
}

TEST_CASE("bleu of single-token pairs at n=2 is zero by convention") {
    std::vector<TokenSeq> cand{{3}, {4}};
    std::vector<TokenSeq> ref{{3}, {5}};
    REQUIRE(bleu_n(cand, ref, 2) == 0.0);
}

TEST_CASE("brevity penalty bites short candidates") {
    std::vector<TokenSeq> cand{{1}};
    std::vector<TokenSeq> ref{{1, 2, 3, 4}};
    REQUIRE(bleu_n(cand, ref, 1) == Approx(std::exp(1.0 - 4.0)));
    REQUIRE(bleu_n({{}}, ref, 1) == 0.0);
    REQUIRE_THROWS_AS(bleu_n({}, {}, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(bleu_n(cand, {}, 1), std::invalid_argument);
}

TEST_CASE("rouge_n hand cases") {
    TokenSeq same{1, 2, 3};
    auto s = rouge_n(same, same, 1);
    REQUIRE(s.precision == 1.0);
    REQUIRE(s.recall == 1.0);
    REQUIRE(s.f1 == 1.0);

    auto dis = rouge_n({1, 2}, {3, 4}, 1);
    REQUIRE(dis.precision == 0.0);
    REQUIRE(dis.recall == 0.0);
    REQUIRE(dis.f1 == 0.0);

    // candidate "a b c", reference "a c"
    auto abc = rouge_n({0, 1, 2}, {0, 2}, 1);
    REQUIRE(abc.precision == Approx(2.0 / 3.0));
    REQUIRE(abc.recall == Approx(1.0));
    REQUIRE(abc.f1 == Approx(0.8));
}

TEST_CASE("rouge_l hand cases") {
    // candidate "a b c d", reference "a c d"
    auto s = rouge_l({0, 1, 2, 3}, {0, 2, 3});
    REQUIRE(s.precision == Approx(0.75));
    REQUIRE(s.recall == Approx(1.0));
    REQUIRE(s.f1 == Approx(6.0 / 7.0));

    auto empty = rouge_l({}, {1, 2});
    REQUIRE(empty.precision == 0.0);
    REQUIRE(empty.recall == 0.0);
    REQUIRE(empty.f1 == 0.0);

    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
        auto a = random_seq(rng, 5, 10);
        auto b = random_seq(rng, 5, 10);
        REQUIRE(lcs_length(a, b) == lcs_length(b, a));
    }
}

TEST_CASE("metrics agree with the brute-force oracle") {
    Rng rng(321);
    std::vector<TokenSeq> cands, refs;
    for (int i = 0; i < 200; ++i) {
        cands.push_back(random_seq(rng, 8, 12));
        refs.push_back(random_seq(rng, 8, 12, 1));
    }
    for (int n = 1; n <= 4; ++n) {
        REQUIRE(bleu_n(cands, refs, n) == Approx(oracle::bleu_n(cands, refs, n)).margin(1e-12));
    }
    for (std::size_t i = 0; i < cands.size(); ++i) {
        for (int n : {1, 2}) {
            auto ours = rouge_n(cands[i], refs[i], n);
            auto theirs = oracle::rouge_n(cands[i], refs[i], n);
            REQUIRE(ours.precision == Approx(theirs.p).margin(1e-12));
            REQUIRE(ours.recall == Approx(theirs.r).margin(1e-12));
            REQUIRE(ours.f1 == Approx(theirs.f).margin(1e-12));
        }
        auto ours = rouge_l(cands[i], refs[i]);
        auto theirs = oracle::rouge_l(cands[i], refs[i]);
        REQUIRE(ours.precision == Approx(theirs.p).margin(1e-12));
        REQUIRE(ours.recall == Approx(theirs.r).margin(1e-12));
        REQUIRE(ours.f1 == Approx(theirs.f).margin(1e-12));
    }
}

TEST_CASE("all reported scores stay in the unit interval") {
    Rng rng(55);
    std::vector<TokenSeq> cands, refs;
    for (int i = 0; i < 40; ++i) {
        cands.push_back(random_seq(rng, 6, 9));
        refs.push_back(random_seq(rng, 6, 9, 1));
    }
    auto report = score_pairs(cands, refs);
    for (const auto& [n, v] : report.bleu) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
    for (const auto& [key, s] : report.rouge) {
        for (double v : {s.precision, s.recall, s.f1}) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
    }
    REQUIRE(report.n_sentences == 40);
}

TEST_CASE("permuting a matching candidate never improves rouge_l") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        auto ref = random_seq(rng, 6, 8, 2);
        const double identity_f = rouge_l(ref, ref).f1;
        auto shuffled = ref;
        rng.shuffle(shuffled);
        REQUIRE(rouge_l(shuffled, ref).f1 <= identity_f + 1e-12);
    }
}

TEST_CASE("evaluate_corpus via generation callback") {
    std::vector<SentenceSample> samples(3);
    samples[0].token_ids = {Vocabulary::BOS, 4, 5, 6, Vocabulary::EOS};
    samples[1].token_ids = {Vocabulary::BOS, 5, 5, Vocabulary::EOS};
    samples[2].token_ids = {Vocabulary::BOS, 6, 4, Vocabulary::EOS};

    SECTION("copying generator scores ones") {
        auto copy = [](const SentenceSample& s) { return s.token_ids; };
        auto report = evaluate_corpus(copy, samples);
        REQUIRE(report.bleu.at(1) == Approx(1.0));
        REQUIRE(report.rouge.at("L").f1 == Approx(1.0));
        REQUIRE(report.n_sentences == 3);
    }
    SECTION("constant unrelated sentence has zero bigram score") {
        auto constant = [](const SentenceSample&) { return TokenSeq{9, 9, 9}; };
        auto report = evaluate_corpus(constant, samples);
        REQUIRE(report.bleu.at(2) == 0.0);
    }
    SECTION("empty test set is an error") {
        auto copy = [](const SentenceSample& s) { return s.token_ids; };
        REQUIRE_THROWS_AS(evaluate_corpus(copy, {}), std::invalid_argument);
    }
}

TEST_CASE("metric tables render rows and failures") {
    MetricReport r;
    for (int n = 1; n <= 4; ++n) r.bleu[n] = 0.25;
    for (const auto& key : {"1", "2", "L"}) r.rouge[key] = {0.5, 0.25, 1.0 / 3.0};
    r.n_sentences = 7;

    std::vector<std::pair<std::string, std::optional<MetricReport>>> rows;
    rows.emplace_back("plain", r);
    rows.emplace_back("sine", std::nullopt);

    auto md = metric_table_markdown(rows);
    REQUIRE(md.find("| plain | 0.250000 |") != std::string::npos);
    REQUIRE(md.find("FAILED") != std::string::npos);
    REQUIRE(md.find("rouge_l_f") != std::string::npos);

    auto csv = metric_table_csv(rows);
    REQUIRE(csv.find("plain,0.250000") != std::string::npos);
    REQUIRE(csv.find("sine,FAILED") != std::string::npos);

    auto j = metric_report_json(r);
    auto back = metric_report_from_json(j);
    REQUIRE(back.bleu.at(3) == r.bleu.at(3));
    REQUIRE(back.rouge.at("L").f1 == r.rouge.at("L").f1);
    REQUIRE(back.n_sentences == 7);
}
