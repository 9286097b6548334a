#include "l4/text_pattern.hpp"

#include <fmt/format.h>

#include "l4/error.hpp"

namespace l4 {

TextPattern::TextPattern(std::string source) : source_(std::move(source)) {
  if (source_.rfind("re:", 0) == 0) {
    try {
      regex_ = std::make_shared<const std::regex>(source_.substr(3), std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::kValidationError,
                  fmt::format("invalid pattern '{}': {}", source_, e.what()));
    }
  } else {
    needle_ = source_;
  }
  if (source_.empty() || (regex_ == nullptr && needle_.empty())) {
    throw Error(ErrorCode::kValidationError, "empty pattern");
  }
}

bool TextPattern::matches(std::string_view text) const {
  if (regex_) return std::regex_search(text.begin(), text.end(), *regex_);
  return text.find(needle_) != std::string_view::npos;
}

}  // namespace l4
