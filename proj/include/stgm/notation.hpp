#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stgm {

/// Syntax or semantic error in arrow / arrow-and-lag text.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, std::string token);
  int line() const { return line_; }
  const std::string& token() const { return token_; }

 private:
  int line_;
  std::string token_;
};

/// One line of arrow notation: a path coefficient (heads == 1) or an
/// exogenous SD / covariance entry (heads == 2).
struct PathTerm {
  std::string from;
  std::string to;
  int heads = 1;
  int lag = 0;
  /// Parameter label; empty when the term is fixed (`NA`).
  std::optional<std::string> param;
  /// Fixed value, or the start value of the parameter.
  double value = 0.0;

  bool fixed() const { return !param.has_value(); }
  bool is_variance() const { return heads == 2 && from == to; }
  bool operator==(const PathTerm&) const = default;
};

struct RamParam {
  std::string label;
  double start = 0.0;
  bool operator==(const RamParam&) const = default;
};

/// Reticular action model: the validated edge list behind P and G.
struct RamModel {
  std::vector<PathTerm> terms;
  std::vector<std::string> variables;
  std::vector<RamParam> params;
  int max_lag = 0;
  /// True for arrow-and-lag models (formatted with a lag column).
  bool dynamic = false;
  /// Legal-but-unusual constructs (lagged covariances).
  std::vector<std::string> notes;

  std::size_t variable_index(std::string_view name) const;
  std::optional<std::size_t> param_index(std::string_view label) const;
  /// Parameter index of a term, or nullopt when the term is fixed.
  std::optional<std::size_t> term_param(const PathTerm& t) const;

  bool operator==(const RamModel& o) const {
    return terms == o.terms && variables == o.variables && params == o.params && max_lag == o.max_lag &&
           dynamic == o.dynamic;
  }
};

inline constexpr double kDefaultPathStart = 0.01;
inline constexpr double kDefaultVarianceStart = 1.0;

/// Arrow notation: `lhs -> rhs, param[, start]` or `lhs <-> rhs, ...`.
RamModel parse_sem(std::string_view text, const std::vector<std::string>& variables);

/// Arrow-and-lag notation: `lhs -> rhs, lag, param[, start]`.
RamModel parse_dsem(std::string_view text, const std::vector<std::string>& variables);

/// Appends a lag-0 `X <-> X` SD term for every variable lacking one.
/// Idempotent.
RamModel augment_defaults(RamModel ram);

/// Canonical text; parsing it again reproduces `ram` term for term.
std::string format_ram(const RamModel& ram);

/// Label given to the default SD parameter of `variable`.
std::string default_variance_label(std::string_view variable);

}  // namespace stgm
