#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ringlm {

using TokenId = std::uint32_t;

// Byte-level tokenizer: token id == byte value (0..255). Ids 256 and above
// are reserved; models may still use a larger vocabulary, in which case
// reserved ids render as "<|id|>" when decoding to text.
std::vector<TokenId> tokenize(std::string_view text);

// Inverse of tokenize for ids < 256; reserved ids render as "<|id|>".
// Throws TokenError when an id is >= vocab_size.
std::string detokenize(std::span<const TokenId> ids, std::uint32_t vocab_size);

} // namespace ringlm
