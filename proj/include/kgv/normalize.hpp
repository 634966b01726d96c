#pragma once

#include <string>
#include <string_view>

namespace kgv {

// Canonical entity key: NFC, lowercase, trimmed, internal whitespace collapsed,
// leading/trailing punctuation removed ($ and % kept), and a leading
// "the"/"a"/"an" dropped. Deterministic for a given surface.
std::string normalize_entity(std::string_view surface);

// NFC + Unicode lowercase without any other rewriting.
std::string unicode_lower(std::string_view text);

}  // namespace kgv
