#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "eegdec/checkpoint.hpp"
#include "eegdec/train.hpp"

using namespace eegdec;
using Catch::Approx;

namespace {

struct Fixture {
    ModelConfig mc;
    TrainConfig tc;
    SplitResult splits;
    Vocabulary vocab;
};

Fixture make_fixture(std::int64_t sentences = 24, std::uint64_t seed = 11) {
    SyntheticConfig sc;
    sc.vocab_size = 12;
    sc.n_sentences = sentences;
    sc.min_len = 3;
    sc.max_len = 6;
    sc.electrodes = 4;
    sc.noise_std = 0.02;
    sc.seed = seed;
    auto set = gen_synthetic_samples(sc);

    Fixture f;
    f.vocab = build_vocab(set.samples);
    apply_vocab(f.vocab, set.samples);
    SplitSpec split_spec;
    split_spec.seed = seed;
    f.splits = split(set.samples, split_spec);

    f.mc.encoder_layers = 2;
    f.mc.model_dim = 8;
    f.mc.heads = 2;
    f.mc.ff_dim = 16;
    f.mc.decoder_layers = 1;
    f.mc.vocab_size = f.vocab.size();
    f.mc.electrodes = sc.electrodes;
    f.mc.max_seq_len = 16;
    f.mc.dropout_rate = 0.1;

    f.tc.epochs_per_stage = 2;
    f.tc.batch_size = 4;
    f.tc.learning_rate = 0.01;
    f.tc.lm_pretrain_epochs = 2;
    f.tc.seed = seed;
    return f;
}

std::vector<SentenceSample> repetitive_texts(const Vocabulary& vocab, int n) {
    const std::vector<std::string> base = {"w1 w2 w3 w4", "w2 w2 w5", "w6 w1 w6 w1",
                                           "w3 w4 w5 w6", "w5 w5 w5"};
    std::vector<SentenceSample> out;
    for (int i = 0; i < n; ++i) {
        SentenceSample s;
        s.sentence_id = "rep-" + std::to_string(i);
        s.text = base[static_cast<std::size_t>(i) % base.size()];
        s.token_ids = vocab.encode(s.text);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("cross_entropy_loss analytic values") {
    Tape t;
    const std::int64_t v = 11;
    ValueId uniform_logits = t.constant(Tensor({4, v}));
    ValueId loss = cross_entropy_loss(t, uniform_logits, {1, 2, 3, Vocabulary::PAD},
                                      Vocabulary::PAD);
    REQUIRE(t.value(loss).scalar_value() == Approx(std::log(static_cast<double>(v))));

    // near-delta logits on the targets drive the loss toward zero
    Tensor sharp({2, v});
    sharp.at(0, 4) = 50.0;
    sharp.at(1, 7) = 50.0;
    Tape t2;
    ValueId l2 = cross_entropy_loss(t2, t2.constant(sharp), {4, 7}, Vocabulary::PAD);
    REQUIRE(t2.value(l2).scalar_value() == Approx(0.0).margin(1e-12));

    Tape t3;
    REQUIRE_THROWS_AS(cross_entropy_loss(t3, t3.constant(Tensor({2, v})),
                                         {Vocabulary::PAD, Vocabulary::PAD}, Vocabulary::PAD),
                      std::invalid_argument);
}

TEST_CASE("sgd_step arithmetic, freezing and clipping") {
    ParamStore store;
    store.insert("a", Tensor({1}, {1.0}));
    store.insert("b", Tensor({1}, {5.0}));
    store.entries.at("b").frozen = true;

    GradMap grads;
    grads.emplace("a", Tensor({1}, {2.0}));
    grads.emplace("b", Tensor({1}, {100.0}));
    sgd_step(store, grads, 0.5, 0.0);
    REQUIRE(store.at("a")[0] == Approx(0.0));  // 1 - 0.5 * 2
    REQUIRE(store.at("b")[0] == 5.0);          // frozen

    // gradient of norm 10 with clip 1 applies a 0.1 factor
    ParamStore s2;
    s2.insert("p", Tensor({1}, {0.0}));
    GradMap g2;
    g2.emplace("p", Tensor({1}, {10.0}));
    sgd_step(s2, g2, 1.0, 1.0);
    REQUIRE(s2.at("p")[0] == Approx(-1.0));

    GradMap bad;
    bad.emplace("p", Tensor({1}, {std::nan("")}));
    REQUIRE_THROWS_AS(sgd_step(s2, bad, 1.0, 1.0), std::runtime_error);
}

TEST_CASE("clipping never increases the gradient norm") {
    Rng rng(91);
    for (int trial = 0; trial < 20; ++trial) {
        GradMap grads;
        for (int k = 0; k < 3; ++k) {
            Tensor g({4});
            for (std::int64_t i = 0; i < 4; ++i) g[i] = rng.uniform(-5.0, 5.0);
            grads.emplace("p" + std::to_string(k), g);
        }
        const double before = global_grad_norm(grads);
        const double clip = rng.uniform(0.1, 3.0);
        const double factor = before > clip ? clip / before : 1.0;
        GradMap clipped;
        for (const auto& [name, g] : grads) clipped.emplace(name, scale(g, factor));
        REQUIRE(global_grad_norm(clipped) <= before + 1e-12);
        REQUIRE(global_grad_norm(clipped) <= clip + 1e-9);
    }
}

TEST_CASE("lm pretraining leaves the encoder untouched and learns") {
    auto f = make_fixture();
    auto store = init_model_params(f.mc, 3);
    auto texts = repetitive_texts(f.vocab, 50);

    const std::string encoder_before =
        serialize_params(store, "enc.") + serialize_params(store, "input_proj.");
    TrainConfig tc = f.tc;
    tc.learning_rate = 0.05;
    tc.lm_pretrain_epochs = 8;

    const double initial = evaluate_loss(store, f.mc, texts, /*lm_only=*/true);
    auto log = pretrain_decoder_lm(store, f.mc, tc, texts, {}, nullptr);
    const double final_loss = evaluate_loss(store, f.mc, texts, /*lm_only=*/true);

    REQUIRE(log.epochs.size() == 8);
    REQUIRE(serialize_params(store, "enc.") + serialize_params(store, "input_proj.") ==
            encoder_before);
    REQUIRE(final_loss < initial);
    REQUIRE(final_loss < std::log(static_cast<double>(f.mc.vocab_size)));
}

TEST_CASE("stage 1 freezes the decoder bitwise, stage 2 moves it") {
    auto f = make_fixture();
    auto store = init_model_params(f.mc, 5);
    pretrain_decoder_lm(store, f.mc, f.tc, f.splits.train, {}, nullptr);

    const std::string decoder_frozen = serialize_params(store, "dec.");
    std::vector<std::string> decoder_at_epochs;
    auto observer = [&](const EpochLog& e, const ParamStore& s) {
        if (e.stage == STAGE_ENCODER) decoder_at_epochs.push_back(serialize_params(s, "dec."));
    };
    train_stage1(store, f.mc, f.tc, f.splits.train, f.splits.valid, observer);
    REQUIRE(decoder_at_epochs.size() == 2);
    for (const auto& bytes : decoder_at_epochs) REQUIRE(bytes == decoder_frozen);

    // encoder must have moved in stage 1
    auto store2 = init_model_params(f.mc, 5);
    pretrain_decoder_lm(store2, f.mc, f.tc, f.splits.train, {}, nullptr);
    REQUIRE(serialize_params(store, "enc.") != serialize_params(store2, "enc."));

    train_stage2(store, f.mc, f.tc, f.splits.train, f.splits.valid, nullptr);
    REQUIRE(serialize_params(store, "dec.") != decoder_frozen);
}

TEST_CASE("two-stage run logs the full protocol") {
    auto f = make_fixture(16);
    f.tc.epochs_per_stage = 3;
    f.tc.lm_pretrain_epochs = 2;
    auto store = init_model_params(f.mc, 7);
    auto log = two_stage_run(store, f.mc, f.tc, f.splits.train, f.splits.valid, nullptr);

    int lm = 0, s1 = 0, s2 = 0;
    int expected_epoch[3] = {1, 1, 1};
    for (const auto& e : log.epochs) {
        REQUIRE(std::isfinite(e.train_loss));
        REQUIRE(std::isfinite(e.valid_loss));
        REQUIRE(e.epoch == expected_epoch[e.stage]);  // contiguous within stage
        ++expected_epoch[e.stage];
        if (e.stage == STAGE_LM_PRETRAIN) ++lm;
        if (e.stage == STAGE_ENCODER) ++s1;
        if (e.stage == STAGE_FINETUNE) ++s2;
    }
    REQUIRE(lm == 2);
    REQUIRE(s1 == 3);
    REQUIRE(s2 == 3);

    // default protocol: 10 + 10 stage epochs
    TrainConfig defaults;
    REQUIRE(defaults.epochs_per_stage * 2 == 20);
    REQUIRE(defaults.batch_size == 16);
    REQUIRE(defaults.learning_rate == 5e-5);
}

TEST_CASE("identical seeds give identical runs") {
    auto f = make_fixture(20, 13);
    auto run = [&]() {
        auto store = init_model_params(f.mc, 17);
        auto log = two_stage_run(store, f.mc, f.tc, f.splits.train, f.splits.valid, nullptr);
        return std::make_pair(serialize_params(store, ""), log);
    };
    auto [params_a, log_a] = run();
    auto [params_b, log_b] = run();
    REQUIRE(params_a == params_b);
    REQUIRE(log_a.epochs.size() == log_b.epochs.size());
    for (std::size_t i = 0; i < log_a.epochs.size(); ++i) {
        REQUIRE(log_a.epochs[i].train_loss == log_b.epochs[i].train_loss);
        REQUIRE(log_a.epochs[i].valid_loss == log_b.epochs[i].valid_loss);
    }
}

TEST_CASE("learnable activation coefficients move during stage 1") {
    auto f = make_fixture();
    f.mc.activation = "poly3";
    auto store = init_model_params(f.mc, 19);
    pretrain_decoder_lm(store, f.mc, f.tc, f.splits.train, {}, nullptr);

    std::vector<Tensor> before;
    for (int l = 0; l < f.mc.encoder_layers; ++l)
        before.push_back(store.at("enc." + std::to_string(l) + ".act.coeffs"));

    train_stage1(store, f.mc, f.tc, f.splits.train, f.splits.valid, nullptr);

    double max_delta = 0.0;
    for (int l = 0; l < f.mc.encoder_layers; ++l) {
        const Tensor& after = store.at("enc." + std::to_string(l) + ".act.coeffs");
        for (std::int64_t i = 0; i < after.size(); ++i)
            max_delta = std::max(max_delta,
                                 std::fabs(after[i] - before[static_cast<std::size_t>(l)][i]));
    }
    REQUIRE(max_delta > 1e-6);
}

TEST_CASE("run log serializes to jsonl and back") {
    RunLog log;
    log.epochs.push_back({STAGE_LM_PRETRAIN, 1, 2.5, 2.6, 0.01});
    log.epochs.push_back({STAGE_ENCODER, 1, 2.0, 2.1, 0.02});
    auto path = std::filesystem::temp_directory_path() / "eegdec-runlog-test.jsonl";
    save_runlog_jsonl(path.string(), log);
    auto loaded = load_runlog_jsonl(path.string());
    std::filesystem::remove(path);
    REQUIRE(loaded.epochs.size() == 2);
    REQUIRE(loaded.epochs[1].stage == STAGE_ENCODER);
    REQUIRE(loaded.epochs[0].train_loss == 2.5);
    REQUIRE(loaded.epochs[1].valid_loss == 2.1);
}
