#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace articnav {

// Coarse failure categories. The CLI prints the category name as the first
// token of its one-line error message.
enum class ErrorCategory {
  invalid_argument,
  malformed_route,
  parse,
  unsupported_version,
  layout_mismatch,
  corrupt_file,
  file_not_found,
  io,
  non_finite,
  episode_finished,
  no_oscillation,
  empty_buffer,
};

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace articnav
