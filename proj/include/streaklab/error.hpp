#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace streaklab {

// Error conditions surfaced by the library. The CLI maps these onto exit
// codes (usage errors vs. data/limit errors); library users can switch on
// the code instead of parsing messages.
enum class errc {
  empty_input,
  invalid_character,
  too_long,
  run_too_long,
  empty_list,
  k_too_large,
  invalid_range,
  pattern_too_long,
  zero_defined_draws,
  parse_error,
  empty_file,
  all_undefined,
  policy_unsupported,
  bad_argument,
};

class Error : public std::runtime_error {
public:
  Error(errc code, std::string message, std::size_t where = 0)
      : std::runtime_error(std::move(message)), code_(code), where_(where) {}

  errc code() const { return code_; }

  // 1-based character position or line number when the condition has one,
  // 0 otherwise.
  std::size_t where() const { return where_; }

private:
  errc code_;
  std::size_t where_;
};

} // namespace streaklab
