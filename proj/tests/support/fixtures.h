#pragma once

// Shared helpers for the unit and acceptance tests: tiny models, random
// spans and a central finite-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "unlearn/model.h"
#include "unlearn/tiny_lm.h"

namespace fixtures {

inline unlearn::Tokenizer small_tokenizer(std::size_t n_words) {
    std::vector<std::string> vocab = {"<pad>", "<unk>", "<bos>", "<eos>"};
    for (std::size_t i = 0; i < n_words; ++i) {
        vocab.push_back("w" + std::to_string(i));
    }
    return unlearn::Tokenizer::from_vocabulary(vocab);
}

// About 470 parameters with the defaults; large init so gradients are not
// dominated by rounding in the finite-difference check.
inline unlearn::ModelHandle tiny_model(std::uint64_t seed, std::size_t n_words = 6, std::size_t dim = 4,
                                       std::size_t layers = 2, double init_std = 0.5) {
    unlearn::TinyLmSpec spec;
    spec.embed_dim = dim;
    spec.n_layers = layers;
    spec.n_heads = 2;
    spec.context_window = 8;
    spec.mlp_width = 2 * dim;
    spec.seed = seed;
    spec.init_std = init_std;
    return unlearn::ModelHandle(std::make_unique<unlearn::TinyLm>(spec, small_tokenizer(n_words)));
}

inline unlearn::TinyLm& tiny(unlearn::ModelHandle& h) {
    return dynamic_cast<unlearn::TinyLm&>(const_cast<unlearn::CausalLm&>(h.model()));
}

// Every weight zeroed (layer-norm gains 1): logits equal head.b at every
// position and block outputs equal the input embeddings.
inline unlearn::ModelHandle zeroed_model(std::size_t n_words = 0, std::size_t dim = 4) {
    auto h = tiny_model(1, n_words, dim);
    for (auto& p : h.mutable_parameters()) p = 0.0;
    for (const auto& name : tiny(h).tensor_names()) {
        if (name.ends_with(".g")) {
            for (auto& g : tiny(h).tensor(name)) g = 1.0;
        }
    }
    return h;
}

// Span of random length in [min_len, max_len] with a prompt of at least one
// token and a non-empty masked suffix.
inline unlearn::TokenSpan random_span(std::mt19937_64& rng, std::size_t vocab, std::size_t min_len,
                                      std::size_t max_len, const std::string& id = "s") {
    std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
    const std::size_t len = len_dist(rng);
    std::uniform_int_distribution<std::size_t> prompt_dist(1, len - 1);
    const std::size_t prompt = prompt_dist(rng);
    std::uniform_int_distribution<int> tok(2, static_cast<int>(vocab) - 1);
    unlearn::TokenSpan span;
    span.example_id = id;
    for (std::size_t t = 0; t < len; ++t) {
        span.tokens.push_back(tok(rng));
        span.loss_mask.push_back(t >= prompt ? 1 : 0);
    }
    return span;
}

struct GradCheck {
    double max_rel = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Compares an analytic gradient against central differences of f over every
// parameter. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradient(std::span<double> params, std::span<const double> analytic,
                                const std::function<double()>& f, double step = 1e-4, double floor = 1e-4) {
    GradCheck out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = f();
        params[i] = saved - step;
        const double down = f();
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
        const double rel = std::abs(analytic[i] - numeric) / scale;
        if (rel > out.max_rel) {
            out = GradCheck{rel, i, analytic[i], numeric};
        }
    }
    return out;
}

// Runs loss(grad) once for the analytic gradient, then checks it against
// central differences of loss({}).
template <class Loss>
GradCheck check_loss_gradient(unlearn::ModelHandle& model, Loss&& loss, double step = 1e-4) {
    std::vector<double> grad(model->parameter_count(), 0.0);
    loss(std::span<double>(grad));
    return check_gradient(model.mutable_parameters(), grad, [&]() { return loss(std::span<double>{}); }, step);
}

}  // namespace fixtures
