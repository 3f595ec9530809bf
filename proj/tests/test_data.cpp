#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "eegdec/data.hpp"

using namespace eegdec;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& stem) {
    static int counter = 0;
    return fs::temp_directory_path() / (stem + "-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(counter++) + ".jsonl");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("average_word_eeg takes column means") {
    WordEegRecording rec{Tensor::from_rows({{1, 2, 3}, {3, 4, 5}})};
    auto avg = average_word_eeg(rec);
    REQUIRE(avg.dim(0) == 3);
    REQUIRE(avg[0] == Approx(2.0));
    REQUIRE(avg[1] == Approx(3.0));
    REQUIRE(avg[2] == Approx(4.0));

    WordEegRecording single{Tensor::from_rows({{7, 8}})};
    auto one = average_word_eeg(single);
    REQUIRE(one[0] == 7.0);
    REQUIRE(one[1] == 8.0);

    WordEegRecording empty{Tensor({0, 3})};
    REQUIRE_THROWS_AS(average_word_eeg(empty), MissingDataError);
}

TEST_CASE("averaging is permutation invariant and linear") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const auto r = rng.uniform_int(1, 6);
        const auto e = rng.uniform_int(1, 8);
        Tensor m({r, e});
        for (std::int64_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-100.0, 100.0);

        auto base = average_word_eeg({m});

        // permute recordings
        std::vector<std::int64_t> perm(static_cast<std::size_t>(r));
        for (std::int64_t i = 0; i < r; ++i) perm[static_cast<std::size_t>(i)] = i;
        rng.shuffle(perm);
        Tensor shuffled({r, e});
        for (std::int64_t i = 0; i < r; ++i)
            for (std::int64_t j = 0; j < e; ++j)
                shuffled.at(i, j) = m.at(perm[static_cast<std::size_t>(i)], j);
        auto permuted = average_word_eeg({shuffled});
        for (std::int64_t j = 0; j < e; ++j)
            REQUIRE(permuted[j] == Approx(base[j]).margin(1e-12));

        // scale recordings by c
        const double c = rng.uniform(-3.0, 3.0);
        auto scaled = average_word_eeg({scale(m, c)});
        for (std::int64_t j = 0; j < e; ++j)
            REQUIRE(scaled[j] == Approx(c * base[j]).margin(1e-9));
    }
}

TEST_CASE("zero-noise synthetic corpus recovers signatures exactly") {
    SyntheticConfig cfg;
    cfg.vocab_size = 12;
    cfg.n_sentences = 40;
    cfg.electrodes = 16;
    cfg.noise_std = 0.0;
    cfg.seed = 7;
    auto raw = gen_synthetic(cfg);
    REQUIRE(raw.size() == 40);
    for (const auto& sentence : raw) {
        auto tokens = tokenize(sentence.text);
        REQUIRE(tokens.size() == sentence.words.size());
        for (std::size_t w = 0; w < tokens.size(); ++w) {
            const auto widx = std::stoll(tokens[w].substr(1));
            auto sig = synthetic_signature(cfg, widx);
            auto avg = average_word_eeg(sentence.words[w]);
            for (std::int64_t j = 0; j < cfg.electrodes; ++j) REQUIRE(avg[j] == sig[j]);
        }
    }
}

TEST_CASE("synthetic corpus is deterministic and signatures are distinct") {
    SyntheticConfig cfg;
    cfg.vocab_size = 15;
    cfg.n_sentences = 20;
    cfg.electrodes = 8;
    cfg.seed = 99;

    auto a = temp_file("synth-a");
    auto b = temp_file("synth-b");
    save_raw_jsonl(a.string(), gen_synthetic(cfg));
    save_raw_jsonl(b.string(), gen_synthetic(cfg));
    REQUIRE(slurp(a) == slurp(b));
    fs::remove(a);
    fs::remove(b);

    double min_dist = 1e300;
    for (std::int64_t i = 0; i < cfg.vocab_size; ++i) {
        auto si = synthetic_signature(cfg, i);
        for (std::int64_t j = i + 1; j < cfg.vocab_size; ++j) {
            auto sj = synthetic_signature(cfg, j);
            double d = 0.0;
            for (std::int64_t k = 0; k < cfg.electrodes; ++k)
                d += (si[k] - sj[k]) * (si[k] - sj[k]);
            min_dist = std::min(min_dist, std::sqrt(d));
        }
    }
    REQUIRE(min_dist > 0.0);
}

TEST_CASE("noisy averages converge to the signature") {
    SyntheticConfig cfg;
    cfg.vocab_size = 10;
    cfg.n_sentences = 400;
    cfg.electrodes = 8;
    cfg.noise_std = 0.2;
    cfg.seed = 1;
    auto raw = gen_synthetic(cfg);

    // collect every occurrence of word 0
    Tensor mean({cfg.electrodes});
    std::int64_t occurrences = 0;
    std::int64_t recordings = 0;
    for (const auto& sentence : raw) {
        auto tokens = tokenize(sentence.text);
        for (std::size_t w = 0; w < tokens.size(); ++w) {
            if (tokens[w] != "w0") continue;
            ++occurrences;
            recordings += sentence.words[w].samples.rows();
            accumulate(mean, average_word_eeg(sentence.words[w]));
        }
    }
    REQUIRE(occurrences > 50);
    mean = scale(mean, 1.0 / static_cast<double>(occurrences));
    const double avg_rec = static_cast<double>(recordings) / static_cast<double>(occurrences);
    const double tol = 3.0 * cfg.noise_std / std::sqrt(static_cast<double>(occurrences) * avg_rec);
    auto sig = synthetic_signature(cfg, 0);
    for (std::int64_t j = 0; j < cfg.electrodes; ++j)
        REQUIRE(mean[j] == Approx(sig[j]).margin(tol));
}

TEST_CASE("tokenizer lowercases and splits on punctuation") {
    auto toks = tokenize("The cat, sat!  On MATS.");
    REQUIRE(toks == std::vector<std::string>{"the", "cat", "sat", "on", "mats"});
    REQUIRE(tokenize("").empty());
}

TEST_CASE("vocabulary contract") {
    SentenceSample s;
    s.text = "the cat";
    auto v = build_vocab({s});
    REQUIRE(v.size() == 6);  // 4 specials + the + cat
    REQUIRE(v.id_of("the") == 4);
    REQUIRE(v.id_of("cat") == 5);

    auto ids = v.encode("the dog");
    REQUIRE(ids == std::vector<std::int64_t>{Vocabulary::BOS, 4, Vocabulary::UNK, Vocabulary::EOS});

    REQUIRE(v.decode(v.encode("The cat!")) == "the cat");
    REQUIRE_THROWS_AS(build_vocab({}), std::invalid_argument);
}

TEST_CASE("split produces the 80/10/10 partition deterministically") {
    std::vector<SentenceSample> samples(100);
    for (int i = 0; i < 100; ++i) samples[static_cast<std::size_t>(i)].sentence_id = std::to_string(i);

    SplitSpec spec;
    spec.seed = 5;
    auto r1 = split(samples, spec);
    REQUIRE(r1.train.size() == 80);
    REQUIRE(r1.valid.size() == 10);
    REQUIRE(r1.test.size() == 10);

    auto r2 = split(samples, spec);
    for (std::size_t i = 0; i < 80; ++i)
        REQUIRE(r1.train[i].sentence_id == r2.train[i].sentence_id);

    std::set<std::string> seen;
    for (const auto* part : {&r1.train, &r1.valid, &r1.test})
        for (const auto& s : *part) REQUIRE(seen.insert(s.sentence_id).second);
    REQUIRE(seen.size() == 100);

    REQUIRE_THROWS_AS(split(std::vector<SentenceSample>(5), spec), std::invalid_argument);
}

TEST_CASE("interchange round trip") {
    SyntheticConfig cfg;
    cfg.vocab_size = 10;
    cfg.n_sentences = 6;
    cfg.electrodes = 4;
    cfg.seed = 1;
    auto raw = gen_synthetic(cfg);
    auto p = temp_file("roundtrip");
    save_raw_jsonl(p.string(), raw);
    auto loaded = load_raw_jsonl(p.string());
    REQUIRE(loaded.size() == raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        REQUIRE(loaded[i].sentence_id == raw[i].sentence_id);
        REQUIRE(loaded[i].text == raw[i].text);
        REQUIRE(loaded[i].words.size() == raw[i].words.size());
        for (std::size_t w = 0; w < raw[i].words.size(); ++w) {
            const auto& a = raw[i].words[w].samples;
            const auto& b = loaded[i].words[w].samples;
            REQUIRE(a.same_shape(b));
            for (std::int64_t k = 0; k < a.size(); ++k) REQUIRE(a[k] == b[k]);
        }
    }
    fs::remove(p);
}

TEST_CASE("loader errors carry line numbers") {
    auto p = temp_file("badline");
    {
        std::ofstream out(p);
        out << R"({"sentence_id":"a","text":"x y","words":[[[1,2]],[[3,4]]]})" << "\n";
        out << "not json\n";
    }
    REQUIRE_THROWS_WITH(load_raw_jsonl(p.string()), Catch::Matchers::ContainsSubstring("line 2"));
    fs::remove(p);

    auto q = temp_file("badwidth");
    {
        std::ofstream out(q);
        out << R"({"sentence_id":"a","text":"x","words":[[[1,2]]]})" << "\n";
        out << R"({"sentence_id":"b","text":"y","words":[[[1,2,3]]]})" << "\n";
    }
    REQUIRE_THROWS_WITH(load_raw_jsonl(q.string()), Catch::Matchers::ContainsSubstring("line 2"));
    fs::remove(q);
}

TEST_CASE("empty file loads to an empty list") {
    auto p = temp_file("empty");
    std::ofstream(p).close();
    REQUIRE(load_raw_jsonl(p.string()).empty());
    fs::remove(p);
}

TEST_CASE("words without recordings drop the sentence with a count") {
    auto p = temp_file("dropped");
    {
        std::ofstream out(p);
        out << R"({"sentence_id":"a","text":"x y","words":[[[1,2]],[[3,4]]]})" << "\n";
        out << R"({"sentence_id":"b","text":"x y","words":[[[1,2]],[]]})" << "\n";
    }
    auto set = load_zuco_jsonl(p.string());
    REQUIRE(set.samples.size() == 1);
    REQUIRE(set.dropped_sentences == 1);
    REQUIRE(set.electrodes == 2);
    REQUIRE(set.samples[0].sentence_id == "a");
    fs::remove(p);
}
