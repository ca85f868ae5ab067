#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "support/fixtures.h"
#include "unlearn/errors.h"
#include "unlearn/model.h"
#include "unlearn/tiny_lm.h"

using namespace unlearn;

namespace {

using fixtures::tiny;

// Four-token vocabulary with every weight zeroed so all logits are equal.
ModelHandle uniform_model() { return fixtures::zeroed_model(0); }

}  // namespace

TEST_CASE("uniform model gives uniform distributions") {
    auto h = uniform_model();
    TokenSpan span{{2, 3, 1, 0}, {0, 1, 1, 1}, "u"};
    const auto dists = per_token_distributions(h, span);
    REQUIRE(dists.size() == 3);
    for (const auto& d : dists) {
        REQUIRE(d.size() == 4);
        for (double p : d) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
    }
    TokenSpan single{{2, 3}, {0, 1}, "s"};
    CHECK(sequence_log_prob(h, single) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("sequence_log_prob sums log-probabilities of realised tokens") {
    auto h = uniform_model();
    tiny(h).tensor("head.b")[2] = std::log(3.0);
    TokenSpan span{{3, 2, 2}, {0, 1, 1}, "two"};
    CHECK(sequence_log_prob(h, span) == doctest::Approx(std::log(0.25)).epsilon(1e-12));

    tiny(h).tensor("head.b")[2] = 60.0;
    CHECK(sequence_log_prob(h, span) == doctest::Approx(0.0).epsilon(1e-12));

    TokenSpan none{{3, 2, 2}, {0, 0, 0}, "none"};
    CHECK_THROWS_AS(sequence_log_prob(h, none), ContractError);
}

TEST_CASE("property: distributions are normalised and agree with sequence_log_prob") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        auto h = fixtures::tiny_model(static_cast<std::uint64_t>(trial), 6);
        const auto span = fixtures::random_span(rng, h->vocab_size(), 2, 8);
        const auto dists = per_token_distributions(h, span);
        CHECK(dists.size() == span.masked_count());
        double total = 0.0;
        std::size_t k = 0;
        for (std::size_t t = 0; t < span.tokens.size(); ++t) {
            if (!span.loss_mask[t]) continue;
            double sum = 0.0;
            for (double p : dists[k]) {
                CHECK(p >= 0.0);
                sum += p;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            total += std::log(dists[k][static_cast<std::size_t>(span.tokens[t])]);
            ++k;
        }
        CHECK(sequence_log_prob(h, span) == doctest::Approx(total).epsilon(1e-9));
    }
}

TEST_CASE("seeded initialisation is reproducible") {
    auto a = fixtures::tiny_model(5);
    auto b = fixtures::tiny_model(5);
    auto c = fixtures::tiny_model(6);
    const auto pa = a->parameters(), pb = b->parameters(), pc = c->parameters();
    CHECK(std::equal(pa.begin(), pa.end(), pb.begin()));
    CHECK_FALSE(std::equal(pa.begin(), pa.end(), pc.begin()));
    CHECK(a->parameter_count() < 1000);
}

TEST_CASE("hidden_states shape, determinism and range") {
    auto h = fixtures::tiny_model(3);
    TokenSpan span{{2, 4, 5, 6, 3}, {0, 0, 1, 1, 1}, "h"};
    const auto first = hidden_states(h, span, 1);
    const auto second = hidden_states(h, span, 1);
    REQUIRE(first.size() == 3);
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].size() == h->hidden_width());
        CHECK(first[i] == second[i]);
    }
    CHECK_THROWS_AS(hidden_states(h, span, h->layer_count()), IndexError);
}

TEST_CASE("spans longer than the context window are rejected") {
    auto h = fixtures::tiny_model(3);
    TokenSpan span;
    for (int i = 0; i < 9; ++i) {
        span.tokens.push_back(4);
        span.loss_mask.push_back(i > 0);
    }
    CHECK_THROWS_AS(per_token_distributions(h, span), LengthError);
    CHECK_THROWS_AS(sequence_log_prob(h, span), LengthError);
}

TEST_CASE("backward matches finite differences for logit and hidden upstreams") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        auto h = fixtures::tiny_model(static_cast<std::uint64_t>(100 + trial));
        const auto span = fixtures::random_span(rng, h->vocab_size(), 3, 8);
        const std::size_t T = span.tokens.size();
        UpstreamGrad up;
        up.logits.resize(T * h->vocab_size());
        for (auto& v : up.logits) v = normal(rng);
        up.hidden.resize(h->layer_count());
        up.hidden[0].resize(T * h->hidden_width());
        for (auto& v : up.hidden[0]) v = normal(rng);

        auto f = [&]() {
            const auto pass = h->forward(span.tokens);
            double s = 0.0;
            const auto lg = pass->logits();
            for (std::size_t i = 0; i < lg.size(); ++i) s += up.logits[i] * lg[i];
            const auto hid = pass->hidden(0);
            for (std::size_t i = 0; i < hid.size(); ++i) s += up.hidden[0][i] * hid[i];
            return s;
        };
        std::vector<double> grad(h->parameter_count(), 0.0);
        const auto pass = h->forward(span.tokens);
        h->backward(*pass, up, grad);
        const auto result = fixtures::check_gradient(h.mutable_parameters(), grad, f, 1e-5);
        INFO("worst parameter " << result.worst_index << " analytic " << result.analytic << " numeric "
                                << result.numeric);
        CHECK(result.max_rel < 1e-5);
    }
}

TEST_CASE("truncated passes support hidden-only backward") {
    std::mt19937_64 rng(23);
    auto h = fixtures::tiny_model(8);
    const auto span = fixtures::random_span(rng, h->vocab_size(), 4, 8);
    const std::size_t T = span.tokens.size();
    UpstreamGrad up;
    up.hidden.resize(1);
    up.hidden[0].assign(T * h->hidden_width(), 0.3);
    auto f = [&]() {
        const auto pass = h->forward(span.tokens, 1);
        double s = 0.0;
        for (double v : pass->hidden(0)) s += 0.3 * v;
        return s;
    };
    const auto pass = h->forward(span.tokens, 1);
    CHECK_FALSE(pass->has_logits());
    CHECK_THROWS_AS(pass->logits(), ContractError);
    std::vector<double> grad(h->parameter_count(), 0.0);
    h->backward(*pass, up, grad);
    CHECK(fixtures::check_gradient(h.mutable_parameters(), grad, f, 1e-5).max_rel < 1e-5);

    UpstreamGrad bad;
    bad.logits.assign(T * h->vocab_size(), 1.0);
    CHECK_THROWS_AS(h->backward(*pass, bad, grad), ContractError);
}

TEST_CASE("cached greedy decoding matches full recomputation") {
    const auto tok = fixtures::small_tokenizer(12);
    TinyLmSpec spec;
    spec.embed_dim = 8;
    spec.n_heads = 2;
    spec.context_window = 16;
    spec.init_std = 0.8;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        spec.seed = seed;
        TinyLm model(spec, tok);
        const std::vector<TokenId> prompt = {2, 5, 7};
        const auto fast = model.greedy_continue(prompt, 20, tok.eos_id());
        const auto slow = model.CausalLm::greedy_continue(prompt, 20, tok.eos_id());
        CHECK(fast == slow);
        CHECK(prompt.size() + fast.size() <= spec.context_window);
    }
}

TEST_CASE("greedy_decode stops at eos, caps length and is deterministic") {
    auto h = uniform_model();
    tiny(h).tensor("head.b")[3] = 5.0;
    CHECK(greedy_decode(h, "<bos>", 10).empty());

    auto g = fixtures::tiny_model(4, 6);
    tiny(g).tensor("head.b")[3] = -50.0;
    const auto text = greedy_decode(g, "<bos> w1 w2", 3);
    CHECK(Tokenizer::pieces(text).size() == 3);
    CHECK(greedy_decode(g, "<bos> w1 w2", 3) == text);
}

TEST_CASE("greedy ties go to the lowest token id") {
    auto h = uniform_model();
    const std::vector<TokenId> prompt = {2};
    CHECK(h->greedy_continue(prompt, 1, 3) == std::vector<TokenId>{0});
}

TEST_CASE("frozen snapshots are isolated and reject updates") {
    auto h = fixtures::tiny_model(12);
    auto ref = snapshot_frozen_reference(h);
    CHECK(ref.frozen());
    TokenSpan span{{2, 4, 5, 6}, {0, 1, 1, 1}, "f"};
    const double before = sequence_log_prob(ref, span);
    CHECK(before == sequence_log_prob(h, span));
    std::vector<double> delta(h->parameter_count(), 0.01);
    h.update(delta);
    CHECK(sequence_log_prob(ref, span) == before);
    CHECK(sequence_log_prob(h, span) != before);
    CHECK_THROWS_AS(ref.update(delta), FrozenModelError);
    CHECK_THROWS_AS(ref.mutable_parameters(), FrozenModelError);
    CHECK_THROWS_AS(snapshot_frozen_reference(ref), ContractError);
}

TEST_CASE("checkpoints round-trip exactly") {
    auto h = fixtures::tiny_model(21);
    const auto dir = std::filesystem::temp_directory_path() / "unlearn_ckpt_test";
    std::filesystem::remove_all(dir);
    save_checkpoint(h, dir);
    auto loaded = load_checkpoint(dir, ModelMode::frozen);
    CHECK(loaded.frozen());
    const auto a = h->parameters(), b = loaded->parameters();
    REQUIRE(a.size() == b.size());
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
    CHECK(loaded->tokenizer().vocabulary() == h->tokenizer().vocabulary());
    CHECK_THROWS_AS(load_checkpoint(dir / "nope"), NotFoundError);
}

TEST_CASE("make_span masks only the response and closing eos") {
    const auto tok = Tokenizer::build({"question answer words here"}, {"<bos>"});
    const auto span = make_span(tok, "<bos> question", "answer words", "id");
    CHECK(span.tokens.size() == 5);
    CHECK(span.loss_mask == std::vector<std::uint8_t>{0, 0, 1, 1, 1});
    CHECK(span.tokens.back() == tok.eos_id());
    CHECK(span.masked_count() == 3);
}
