#include "ringlm/tokenizer.hpp"

#include <string>

#include "ringlm/error.hpp"

namespace ringlm {

std::vector<TokenId> tokenize(std::string_view text) {
    std::vector<TokenId> ids;
    ids.reserve(text.size());
    for (unsigned char byte : text) {
        ids.push_back(static_cast<TokenId>(byte));
    }
    return ids;
}

std::string detokenize(std::span<const TokenId> ids, std::uint32_t vocab_size) {
    std::string out;
    out.reserve(ids.size());
    for (TokenId id : ids) {
        if (id >= vocab_size) {
            throw TokenError("token id " + std::to_string(id) + " out of range for vocab " +
                             std::to_string(vocab_size));
        }
        if (id < 256) {
            out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
        } else {
            out += "<|" + std::to_string(id) + "|>";
        }
    }
    return out;
}

} // namespace ringlm
