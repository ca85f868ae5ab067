#include "unlearn/model.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "unlearn/errors.h"
#include "unlearn/kernels.h"
#include "unlearn/tiny_lm.h"

namespace unlearn {

std::size_t TokenSpan::masked_count() const {
    return static_cast<std::size_t>(std::count(loss_mask.begin(), loss_mask.end(), std::uint8_t{1}));
}

TokenSpan make_span(const Tokenizer& tokenizer, const std::string& prompt, const std::string& response,
                    std::string example_id) {
    TokenSpan span;
    span.example_id = std::move(example_id);
    span.tokens = tokenizer.encode(prompt);
    if (span.tokens.empty()) {
        throw ContractError("prompt encodes to no tokens");
    }
    span.loss_mask.assign(span.tokens.size(), 0);
    for (TokenId id : tokenizer.encode(response)) {
        span.tokens.push_back(id);
        span.loss_mask.push_back(1);
    }
    span.tokens.push_back(tokenizer.eos_id());
    span.loss_mask.push_back(1);
    return span;
}

std::vector<TokenId> CausalLm::greedy_continue(std::span<const TokenId> prompt, std::size_t max_new,
                                               TokenId stop) const {
    std::vector<TokenId> seq(prompt.begin(), prompt.end());
    std::vector<TokenId> out;
    const std::size_t V = vocab_size();
    if (seq.size() > context_window()) {
        throw LengthError("prompt of " + std::to_string(seq.size()) + " tokens exceeds context window");
    }
    while (out.size() < max_new && seq.size() < context_window()) {
        const auto pass = forward(seq);
        const auto row = pass->logits().subspan((seq.size() - 1) * V, V);
        const auto best = static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == stop) {
            break;
        }
        out.push_back(best);
        seq.push_back(best);
    }
    return out;
}

ModelHandle::ModelHandle(std::unique_ptr<CausalLm> model, ModelMode mode) : model_(std::move(model)), mode_(mode) {
    if (!model_) {
        throw ContractError("model handle needs a model");
    }
}

std::span<double> ModelHandle::mutable_parameters() {
    if (frozen()) {
        throw FrozenModelError("frozen model parameters cannot be modified");
    }
    return model_->mutable_parameters();
}

void ModelHandle::update(std::span<const double> delta) {
    auto params = mutable_parameters();
    if (delta.size() != params.size()) {
        throw ContractError("update size does not match parameter count");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] += delta[i];
    }
}

ModelHandle ModelHandle::clone() const { return ModelHandle(model_->clone(), mode_); }

ModelHandle snapshot_frozen_reference(const ModelHandle& model) {
    if (model.frozen()) {
        throw ContractError("cannot snapshot a handle that is already frozen");
    }
    return ModelHandle(model->clone(), ModelMode::frozen);
}

void validate_span(const CausalLm& model, const TokenSpan& span) {
    if (span.tokens.size() != span.loss_mask.size()) {
        throw ContractError("token and mask lengths differ");
    }
    if (span.tokens.empty()) {
        throw LengthError("empty span");
    }
    if (span.tokens.size() > model.context_window()) {
        throw LengthError("example " + span.example_id + " has " + std::to_string(span.tokens.size()) +
                          " tokens, context window is " + std::to_string(model.context_window()));
    }
    if (span.loss_mask[0] != 0) {
        throw ContractError("the first token cannot be a training target");
    }
}

std::vector<std::vector<double>> per_token_distributions(const ModelHandle& model, const TokenSpan& span) {
    validate_span(model.model(), span);
    const auto pass = model->forward(span.tokens);
    const std::size_t V = model->vocab_size();
    const auto logits = pass->logits();
    std::vector<std::vector<double>> out;
    for (std::size_t t = 1; t < span.tokens.size(); ++t) {
        if (span.loss_mask[t] == 0) {
            continue;
        }
        std::vector<double> row(logits.begin() + static_cast<long>((t - 1) * V),
                                logits.begin() + static_cast<long>(t * V));
        kernels::softmax_rows(1, V, row);
        out.push_back(std::move(row));
    }
    return out;
}

double sequence_log_prob(const ModelHandle& model, const TokenSpan& span) {
    validate_span(model.model(), span);
    if (span.masked_count() == 0) {
        throw ContractError("span " + span.example_id + " has no masked positions");
    }
    const auto pass = model->forward(span.tokens);
    const std::size_t V = model->vocab_size();
    const auto logits = pass->logits();
    std::vector<double> lp(V);
    double total = 0.0;
    for (std::size_t t = 1; t < span.tokens.size(); ++t) {
        if (span.loss_mask[t] == 0) {
            continue;
        }
        kernels::log_softmax(logits.subspan((t - 1) * V, V), lp);
        total += lp[static_cast<std::size_t>(span.tokens[t])];
    }
    return total;
}

std::vector<std::vector<double>> hidden_states(const ModelHandle& model, const TokenSpan& span,
                                               std::size_t layer) {
    validate_span(model.model(), span);
    if (layer >= model->layer_count()) {
        throw IndexError("layer " + std::to_string(layer) + " out of range; model has " +
                         std::to_string(model->layer_count()) + " layers");
    }
    const auto pass = model->forward(span.tokens, layer + 1);
    const std::size_t D = model->hidden_width();
    const auto h = pass->hidden(layer);
    std::vector<std::vector<double>> out;
    for (std::size_t t = 0; t < span.tokens.size(); ++t) {
        if (span.loss_mask[t] != 0) {
            out.emplace_back(h.begin() + static_cast<long>(t * D), h.begin() + static_cast<long>((t + 1) * D));
        }
    }
    return out;
}

std::string greedy_decode(const ModelHandle& model, const std::string& prompt, std::size_t max_new_tokens) {
    const Tokenizer& tok = model->tokenizer();
    const auto ids = tok.encode(prompt);
    const auto out = model->greedy_continue(ids, max_new_tokens, tok.eos_id());
    return tok.decode(out);
}

void save_checkpoint(const ModelHandle& model, const std::filesystem::path& dir) { model->save(dir); }

ModelHandle load_checkpoint(const std::filesystem::path& dir, ModelMode mode) {
    std::ifstream in(dir / "spec.json");
    if (!in) {
        throw NotFoundError("no checkpoint at " + dir.string());
    }
    const auto spec = nlohmann::json::parse(in, nullptr, false);
    if (spec.is_discarded()) {
        throw ConfigError("malformed checkpoint spec at " + dir.string());
    }
    const std::string kind = spec.value("kind", "");
    if (kind == "tiny_lm") {
        return ModelHandle(TinyLm::load(dir), mode);
    }
    throw ConfigError("unknown model kind '" + kind + "' at " + dir.string());
}

}  // namespace unlearn
