#pragma once

#include <memory>
#include <regex>
#include <string>
#include <string_view>

namespace l4 {

// A pattern matched against template text. Plain text is a case-sensitive
// substring match; text prefixed with "re:" is an ECMAScript regex searched
// anywhere in the subject.
class TextPattern {
 public:
  TextPattern() = default;
  explicit TextPattern(std::string source);

  bool matches(std::string_view text) const;

  const std::string& source() const noexcept { return source_; }
  bool is_regex() const noexcept { return regex_ != nullptr; }

  friend bool operator==(const TextPattern& a, const TextPattern& b) {
    return a.source_ == b.source_;
  }

 private:
  std::string source_;
  std::string needle_;
  std::shared_ptr<const std::regex> regex_;
};

}  // namespace l4
