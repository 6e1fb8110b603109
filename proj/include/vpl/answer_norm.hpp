#pragma once

#include <string>
#include <string_view>

namespace vpl {

// Canonical answer-string form: ASCII lowercase, whitespace runs collapsed to
// one space, no leading/trailing whitespace, no trailing periods. Idempotent.
std::string normalize_answer(std::string_view raw);

}  // namespace vpl
