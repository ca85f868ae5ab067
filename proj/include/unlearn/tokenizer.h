#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace unlearn {

using TokenId = std::int32_t;

// Word-level codec. Text is lowercased and split into words, single
// punctuation characters and bracketed special tokens such as "<eos>".
class Tokenizer {
public:
    static constexpr std::string_view kPad = "<pad>";
    static constexpr std::string_view kUnk = "<unk>";
    static constexpr std::string_view kBos = "<bos>";
    static constexpr std::string_view kEos = "<eos>";

    // Builds a vocabulary over every piece found in texts. Special tokens
    // <pad>, <unk>, <bos>, <eos> always take ids 0..3; extra_specials follow.
    static Tokenizer build(const std::vector<std::string>& texts,
                           const std::vector<std::string>& extra_specials = {});
    static Tokenizer from_vocabulary(std::vector<std::string> vocabulary);
    static Tokenizer load(const std::filesystem::path& vocab_file);
    void save(const std::filesystem::path& vocab_file) const;

    // Splits text into pieces without mapping them to ids.
    static std::vector<std::string> pieces(std::string_view text);

    std::vector<TokenId> encode(std::string_view text) const;
    std::string decode(const std::vector<TokenId>& ids) const;

    std::size_t size() const noexcept { return vocabulary_.size(); }
    const std::string& token(TokenId id) const;
    TokenId id_of(std::string_view piece) const;
    const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }

    TokenId pad_id() const noexcept { return 0; }
    TokenId unk_id() const noexcept { return 1; }
    TokenId bos_id() const noexcept { return 2; }
    TokenId eos_id() const noexcept { return 3; }

private:
    std::vector<std::string> vocabulary_;
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace unlearn
