#include "stgm/notation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "stgm/format.hpp"

namespace stgm {

ParseError::ParseError(const std::string& message, int line, std::string token)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message +
                                        (token.empty() ? "" : " ('" + token + "')")
                                  : message),
      line_(line),
      token_(std::move(token)) {}

std::size_t RamModel::variable_index(std::string_view name) const {
  auto it = std::find(variables.begin(), variables.end(), name);
  if (it == variables.end()) throw ParseError("unknown variable", 0, std::string(name));
  return static_cast<std::size_t>(it - variables.begin());
}

std::optional<std::size_t> RamModel::param_index(std::string_view label) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].label == label) return i;
  return std::nullopt;
}

std::optional<std::size_t> RamModel::term_param(const PathTerm& t) const {
  if (!t.param) return std::nullopt;
  return param_index(*t.param);
}

std::string default_variance_label(std::string_view variable) {
  return "sd[" + std::string(variable) + "]";
}

namespace {

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  if (s.find_first_of(", \t\r\n") != std::string_view::npos) return false;
  if (s.find("->") != std::string_view::npos || s.find("<-") != std::string_view::npos) return false;
  return true;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  // one trailing comma is tolerated
  if (out.size() > 1 && out.back().empty()) out.pop_back();
  return out;
}

RamModel parse_impl(std::string_view text, const std::vector<std::string>& variables, bool dynamic) {
  {
    std::set<std::string> seen;
    for (const auto& v : variables) {
      if (!valid_name(v)) throw ParseError("invalid variable name", 0, v);
      if (!seen.insert(v).second) throw ParseError("duplicate variable name", 0, v);
    }
  }
  RamModel ram;
  ram.variables = variables;
  ram.dynamic = dynamic;

  std::set<std::tuple<int, std::string, std::string, int>> seen_terms;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    auto fields = split_fields(line);
    for (auto f : fields)
      if (f.empty()) throw ParseError("empty field", line_no, std::string(line));

    PathTerm term;
    std::string_view arrow_field = fields[0];
    std::size_t arrow_pos = arrow_field.find("<->");
    std::size_t arrow_len = 3;
    if (arrow_pos != std::string_view::npos) {
      term.heads = 2;
    } else {
      arrow_pos = arrow_field.find("->");
      arrow_len = 2;
      term.heads = 1;
      if (arrow_pos == std::string_view::npos)
        throw ParseError("expected '->' or '<->'", line_no, std::string(arrow_field));
    }
    std::string_view lhs = trim(arrow_field.substr(0, arrow_pos));
    std::string_view rhs = trim(arrow_field.substr(arrow_pos + arrow_len));
    if (!valid_name(lhs)) throw ParseError("malformed left-hand side", line_no, std::string(lhs));
    if (!valid_name(rhs)) throw ParseError("malformed right-hand side", line_no, std::string(rhs));
    for (auto name : {lhs, rhs})
      if (std::find(variables.begin(), variables.end(), name) == variables.end())
        throw ParseError("unknown variable", line_no, std::string(name));
    term.from = std::string(lhs);
    term.to = std::string(rhs);

    std::size_t expected_min = dynamic ? 3 : 2;
    if (fields.size() < expected_min || fields.size() > expected_min + 1)
      throw ParseError(dynamic ? "expected 'lhs -> rhs, lag, param[, start]'" : "expected 'lhs -> rhs, param[, start]'",
                       line_no, std::string(line));

    std::size_t next = 1;
    if (dynamic) {
      std::string_view lag_text = fields[next++];
      long lag = 0;
      auto res = std::from_chars(lag_text.data(), lag_text.data() + lag_text.size(), lag);
      if (res.ec != std::errc() || res.ptr != lag_text.data() + lag_text.size())
        throw ParseError("lag must be a nonnegative integer", line_no, std::string(lag_text));
      if (lag < 0) throw ParseError("lag must be a nonnegative integer", line_no, std::string(lag_text));
      term.lag = static_cast<int>(lag);
    }
    std::string_view param_text = fields[next++];
    if (!valid_name(param_text)) throw ParseError("malformed parameter label", line_no, std::string(param_text));
    std::optional<double> start;
    if (next < fields.size()) {
      start = parse_double(fields[next]);
      if (!start || !std::isfinite(*start))
        throw ParseError("start value is not a finite number", line_no, std::string(fields[next]));
    }

    if (term.heads == 2 && term.lag == 0 && term.to < term.from) std::swap(term.from, term.to);

    auto key = std::make_tuple(term.heads, term.from, term.to, term.lag);
    if (!seen_terms.insert(key).second) {
      if (term.is_variance() && term.lag == 0)
        throw ParseError("duplicate two-headed self-term for variable " + term.from, line_no, std::string(line));
      throw ParseError("duplicate term", line_no, std::string(line));
    }

    if (param_text == "NA") {
      if (!start) throw ParseError("fixed (NA) term requires a start value", line_no, std::string(line));
      term.param.reset();
      term.value = *start;
    } else {
      std::string label(param_text);
      auto idx = ram.param_index(label);
      if (!idx) {
        double s = start ? *start : (term.is_variance() ? kDefaultVarianceStart : kDefaultPathStart);
        ram.params.push_back({label, s});
        idx = ram.params.size() - 1;
      }
      term.param = label;
      term.value = ram.params[*idx].start;
    }
    if (term.heads == 2 && term.lag > 0)
      ram.notes.push_back("line " + std::to_string(line_no) + ": lagged covariance " + term.from + " <-> " +
                          term.to + " at lag " + std::to_string(term.lag));
    ram.max_lag = std::max(ram.max_lag, term.lag);
    ram.terms.push_back(std::move(term));
  }
  return augment_defaults(std::move(ram));
}

}  // namespace

RamModel augment_defaults(RamModel ram) {
  for (const auto& v : ram.variables) {
    bool has = std::any_of(ram.terms.begin(), ram.terms.end(), [&](const PathTerm& t) {
      return t.heads == 2 && t.lag == 0 && t.from == v && t.to == v;
    });
    if (has) continue;
    std::string label = default_variance_label(v);
    while (ram.param_index(label)) label += "'";
    ram.params.push_back({label, kDefaultVarianceStart});
    ram.terms.push_back(PathTerm{v, v, 2, 0, label, kDefaultVarianceStart});
  }
  return ram;
}

RamModel parse_sem(std::string_view text, const std::vector<std::string>& variables) {
  return parse_impl(text, variables, false);
}

RamModel parse_dsem(std::string_view text, const std::vector<std::string>& variables) {
  return parse_impl(text, variables, true);
}

std::string format_ram(const RamModel& ram) {
  std::ostringstream out;
  for (const auto& t : ram.terms) {
    out << t.from << (t.heads == 2 ? " <-> " : " -> ") << t.to << ", ";
    if (ram.dynamic) out << t.lag << ", ";
    out << (t.param ? *t.param : std::string("NA")) << ", " << format_double(t.value) << '\n';
  }
  return out.str();
}

}  // namespace stgm
