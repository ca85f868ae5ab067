#include "unlearn/tokenizer.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "unlearn/errors.h"

namespace unlearn {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

// Punctuation that attaches to the preceding word when decoding.
bool attaches_left(const std::string& piece) {
    return piece.size() == 1 && std::string_view(".,?!:;)'%").find(piece[0]) != std::string_view::npos;
}

}  // namespace

std::vector<std::string> Tokenizer::pieces(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c) != 0) {
            ++i;
            continue;
        }
        if (c == '<') {
            const auto close = text.find('>', i);
            if (close != std::string_view::npos) {
                const auto inner = text.substr(i + 1, close - i - 1);
                const bool special = !inner.empty() && std::all_of(inner.begin(), inner.end(), [](char ch) {
                    return std::isalnum(static_cast<unsigned char>(ch)) != 0 || ch == '_';
                });
                if (special) {
                    std::string piece(text.substr(i, close - i + 1));
                    std::transform(piece.begin(), piece.end(), piece.begin(),
                                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
                    out.push_back(std::move(piece));
                    i = close + 1;
                    continue;
                }
            }
        }
        if (is_word_char(c)) {
            std::string word;
            while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) {
                word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
                ++i;
            }
            out.push_back(std::move(word));
            continue;
        }
        out.emplace_back(1, static_cast<char>(c));
        ++i;
    }
    return out;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& texts,
                           const std::vector<std::string>& extra_specials) {
    std::vector<std::string> vocab = {std::string(kPad), std::string(kUnk), std::string(kBos),
                                      std::string(kEos)};
    for (const auto& s : extra_specials) {
        if (std::find(vocab.begin(), vocab.end(), s) == vocab.end()) {
            vocab.push_back(s);
        }
    }
    std::set<std::string> seen(vocab.begin(), vocab.end());
    std::set<std::string> words;
    for (const auto& text : texts) {
        for (auto& piece : pieces(text)) {
            if (!seen.contains(piece)) {
                words.insert(std::move(piece));
            }
        }
    }
    vocab.insert(vocab.end(), words.begin(), words.end());
    return from_vocabulary(std::move(vocab));
}

Tokenizer Tokenizer::from_vocabulary(std::vector<std::string> vocabulary) {
    if (vocabulary.size() < 4 || vocabulary[0] != kPad || vocabulary[1] != kUnk || vocabulary[2] != kBos ||
        vocabulary[3] != kEos) {
        throw ContractError("vocabulary must start with <pad> <unk> <bos> <eos>");
    }
    Tokenizer tok;
    tok.vocabulary_ = std::move(vocabulary);
    for (std::size_t i = 0; i < tok.vocabulary_.size(); ++i) {
        if (!tok.index_.emplace(tok.vocabulary_[i], static_cast<TokenId>(i)).second) {
            throw ContractError("duplicate vocabulary entry '" + tok.vocabulary_[i] + "'");
        }
    }
    return tok;
}

Tokenizer Tokenizer::load(const std::filesystem::path& vocab_file) {
    std::ifstream in(vocab_file);
    if (!in) {
        throw NotFoundError("cannot open vocabulary " + vocab_file.string());
    }
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        vocab.push_back(line);
    }
    return from_vocabulary(std::move(vocab));
}

void Tokenizer::save(const std::filesystem::path& vocab_file) const {
    std::ofstream out(vocab_file);
    if (!out) {
        throw NotFoundError("cannot write vocabulary " + vocab_file.string());
    }
    for (const auto& t : vocabulary_) {
        out << t << "\n";
    }
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const auto& piece : pieces(text)) {
        ids.push_back(id_of(piece));
    }
    return ids;
}

std::string Tokenizer::decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId id : ids) {
        const std::string& piece = token(id);
        if (!out.empty() && !attaches_left(piece)) {
            out.push_back(' ');
        }
        out += piece;
    }
    return out;
}

const std::string& Tokenizer::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= vocabulary_.size()) {
        throw IndexError("token id " + std::to_string(id) + " outside vocabulary");
    }
    return vocabulary_[static_cast<std::size_t>(id)];
}

TokenId Tokenizer::id_of(std::string_view piece) const {
    const auto it = index_.find(std::string(piece));
    return it == index_.end() ? unk_id() : it->second;
}

}  // namespace unlearn
