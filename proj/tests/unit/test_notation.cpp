#include <doctest.h>

#include <random>

#include "stgm/notation.hpp"
#include "support.hpp"

using namespace stgm;

TEST_SUITE("notation") {
  TEST_CASE("simple path model with explicit variances") {
    auto ram = parse_sem("X -> Y, beta_1, 1\nX <-> X, sigma_X, 1\nY <-> Y, sigma_Y, 1\n", {"X", "Y"});
    CHECK(ram.terms.size() == 3);
    CHECK(ram.params.size() == 3);
    CHECK(ram.terms[0].heads == 1);
    CHECK(ram.terms[0].from == "X");
    CHECK(ram.terms[0].to == "Y");
    CHECK(ram.terms[0].value == 1.0);
    CHECK(ram.max_lag == 0);
  }

  TEST_CASE("empty text gets one default variance") {
    auto ram = parse_sem("", {"X"});
    REQUIRE(ram.terms.size() == 1);
    CHECK(ram.terms[0].is_variance());
    CHECK(ram.terms[0].param == default_variance_label("X"));
    CHECK(ram.params[0].start == kDefaultVarianceStart);
  }

  TEST_CASE("three paths plus three default variances") {
    auto ram = parse_sem("X -> Y, b1\nY -> Z, b2\nX -> Z, b3\n", {"X", "Y", "Z"});
    CHECK(ram.terms.size() == 6);
    CHECK(ram.params.size() == 6);
    CHECK(ram.params[0].start == kDefaultPathStart);
  }

  TEST_CASE("cross-lagged model") {
    auto ram = parse_dsem("X -> X, 1, b_xx\nY -> Y, 1, b_yy\nX -> Y, 1, b_xy\nY -> X, 1, b_yx\n", {"X", "Y"});
    CHECK(ram.terms.size() == 6);
    CHECK(ram.max_lag == 1);
    int variances = 0;
    for (const auto& t : ram.terms)
      if (t.is_variance()) {
        ++variances;
        CHECK(t.lag == 0);
      }
    CHECK(variances == 2);
  }

  TEST_CASE("factor model block") {
    auto ram = parse_dsem(
        "F -> F, 1, NA, 1\nF -> X, 0, l1, 1\nF -> Y, 0, l2, 1\nF <-> F, 0, NA, 1\nX <-> X, 0, NA, 0\nY <-> Y, 0, NA, 0\n",
        {"F", "X", "Y"});
    CHECK(ram.terms.size() == 6);
    CHECK(ram.params.size() == 2);
    CHECK(ram.terms[0].fixed());
    CHECK(ram.terms[0].value == 1.0);
  }

  TEST_CASE("random walk") {
    auto ram = parse_dsem("X -> X, 1, NA, 1", {"X"});
    CHECK(ram.terms.size() == 2);
    CHECK(ram.terms[0].fixed());
    CHECK(ram.params.size() == 1);
  }

  TEST_CASE("comments, CRLF, whitespace and trailing comma") {
    auto ram = parse_sem("# header\r\n  X   ->  Y ,  b , 0.5 ,\r\n\r\n", {"X", "Y"});
    CHECK(ram.terms.size() == 3);
    CHECK(ram.terms[0].value == 0.5);
  }

  TEST_CASE("shared labels resolve to one parameter") {
    auto ram = parse_sem("X -> Y, b, 0.3\nY -> Z, b\n", {"X", "Y", "Z"});
    CHECK(ram.params.size() == 4);
    CHECK(ram.term_param(ram.terms[0]) == ram.term_param(ram.terms[1]));
    CHECK(ram.terms[1].value == 0.3);
  }

  TEST_CASE("two-headed terms are ordered") {
    auto ram = parse_sem("Y <-> X, c, 0.2\n", {"X", "Y"});
    CHECK(ram.terms[0].from == "X");
    CHECK(ram.terms[0].to == "Y");
    CHECK_THROWS_AS(parse_sem("Y <-> X, c\nX <-> Y, d\n", {"X", "Y"}), ParseError);
  }

  TEST_CASE("lagged covariance is accepted with a note") {
    auto ram = parse_dsem("X <-> Y, 1, c, 0.1\n", {"X", "Y"});
    CHECK(ram.notes.size() == 1);
  }

  TEST_CASE("errors carry line numbers") {
    try {
      parse_sem("X -> Y, b\nX => Y, c\n", {"X", "Y"});
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_sem("X -> Q, b", {"X", "Y"}), ParseError);
    CHECK_THROWS_AS(parse_sem("X <-> X, a\nX <-> X, b\n", {"X"}), ParseError);
    CHECK_THROWS_AS(parse_sem("X -> Y, NA", {"X", "Y"}), ParseError);
    CHECK_THROWS_AS(parse_dsem("X -> Y, -1, b", {"X", "Y"}), ParseError);
    CHECK_THROWS_AS(parse_dsem("X -> Y, 1.5, b", {"X", "Y"}), ParseError);
    CHECK_THROWS_AS(parse_sem("X -> Y, b, abc", {"X", "Y"}), ParseError);
    CHECK_THROWS_AS(parse_sem("X -> Y", {"X", "Y"}), ParseError);
    CHECK_THROWS_AS(parse_sem("X -> Y, na, 1", {"x"}), ParseError);
  }

  TEST_CASE("augmentation is idempotent") {
    auto ram = parse_sem("X -> Y, b", {"X", "Y"});
    CHECK(augment_defaults(ram) == ram);
  }

  TEST_CASE("label collision with the default name") {
    auto ram = parse_sem("X -> Y, sd[Y]", {"X", "Y"});
    CHECK(ram.params.size() == 3);
    CHECK(ram.param_index("sd[Y]'").has_value());
  }

  TEST_CASE("format then parse reproduces the model") {
    auto ram = parse_sem("X -> Y, beta_1, 1\nX <-> X, sigma_X, 1\nY <-> Y, sigma_Y, 1\n", {"X", "Y"});
    auto text = format_ram(ram);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    CHECK(parse_sem(text, ram.variables) == ram);
    auto defaults = parse_sem("", {"A"});
    CHECK(format_ram(defaults).find("A <-> A") != std::string::npos);
  }

  TEST_CASE("round trip property over random models") {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 200; ++rep) {
      const int C = 1 + static_cast<int>(rng() % 5);
      const bool dynamic = rep % 2 == 0;
      auto r = support::random_ram(rng, C, 2, dynamic);
      // sprinkle fixed terms
      std::string text = format_ram(r.ram);
      if (rng() % 2) text += support::var_names(C)[C - 1] + " -> " + support::var_names(C)[0] + (dynamic ? ", 3" : "") +
                             ", NA, 0.25\n";
      auto ram = dynamic ? parse_dsem(text, r.ram.variables) : parse_sem(text, r.ram.variables);
      auto again = dynamic ? parse_dsem(format_ram(ram), ram.variables) : parse_sem(format_ram(ram), ram.variables);
      CHECK(again == ram);
    }
  }
}
