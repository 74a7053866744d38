#include "stgm/design.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "stgm/format.hpp"

namespace stgm {

// ---------------------------------------------------------------- formula

namespace {

std::vector<std::string_view> split_top_level(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (depth < 0) throw ModelError("formula: unbalanced parentheses");
    if (s[i] == sep && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (depth != 0) throw ModelError("formula: unbalanced parentheses");
  out.push_back(trim(s.substr(start)));
  return out;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.')) return false;
  return true;
}

int parse_int(std::string_view s, std::string_view term) {
  s = trim(s);
  if (s.starts_with("k=") || s.starts_with("k =")) s = trim(s.substr(s.find('=') + 1));
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ModelError("formula: expected an integer in term " + std::string(term));
  return v;
}

}  // namespace

Formula parse_formula(std::string_view text) {
  Formula f;
  f.text = std::string(trim(text));
  auto tilde = text.find('~');
  if (tilde == std::string_view::npos) throw ModelError("formula: missing '~'");
  f.response = std::string(trim(text.substr(0, tilde)));
  if (!is_identifier(f.response)) throw ModelError("formula: malformed response '" + f.response + "'");
  bool saw_one = false, saw_zero = false;
  for (auto term : split_top_level(text.substr(tilde + 1), '+')) {
    if (term.empty()) throw ModelError("formula: empty term");
    FormulaTerm t;
    if (term == "1") {
      t.kind = FormulaTerm::Kind::Intercept;
      saw_one = true;
    } else if (term == "0" || term == "-1") {
      t.kind = FormulaTerm::Kind::NoIntercept;
      saw_zero = true;
    } else if (is_identifier(term)) {
      t.kind = FormulaTerm::Kind::Numeric;
      t.column = std::string(term);
    } else {
      auto open = term.find('(');
      if (open == std::string_view::npos || term.back() != ')')
        throw ModelError("formula: unsupported term '" + std::string(term) + "'");
      std::string_view fn = trim(term.substr(0, open));
      auto args = split_top_level(term.substr(open + 1, term.size() - open - 2), ',');
      if (args.empty() || !is_identifier(args[0]))
        throw ModelError("formula: malformed term '" + std::string(term) + "'");
      t.column = std::string(args[0]);
      if (fn == "factor" && args.size() == 1) {
        t.kind = FormulaTerm::Kind::Factor;
      } else if (fn == "offset" && args.size() == 1) {
        t.kind = FormulaTerm::Kind::Offset;
      } else if (fn == "poly" && args.size() == 2) {
        t.kind = FormulaTerm::Kind::Poly;
        t.k = parse_int(args[1], term);
        if (t.k < 1) throw ModelError("formula: poly() degree must be at least 1");
      } else if (fn == "s" && (args.size() == 1 || args.size() == 2)) {
        t.kind = FormulaTerm::Kind::Smooth;
        t.k = args.size() == 2 ? parse_int(args[1], term) : 10;
        if (t.k < 3) throw ModelError("formula: s() needs k >= 3 in term '" + std::string(term) + "'");
      } else {
        throw ModelError("formula: unsupported term '" + std::string(term) + "'");
      }
    }
    f.terms.push_back(std::move(t));
  }
  if (saw_one && saw_zero) throw ModelError("formula: both '1' and '0' given");
  f.intercept = !saw_zero;
  return f;
}

// ---------------------------------------------------------------- splines

Eigen::MatrixXd bspline_basis(std::span<const double> x, const std::vector<double>& knots, int degree) {
  const int m = static_cast<int>(knots.size());
  const int k = m - degree - 1;
  if (k < 1) throw ModelError("bspline_basis: too few knots");
  const double lo = knots[degree];
  const double hi = knots[k];
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Index>(x.size()), k);
  std::vector<double> left(degree + 1), right(degree + 1), n(degree + 1);
  for (std::size_t r = 0; r < x.size(); ++r) {
    double xv = x[r];
    if (xv < lo || xv > hi) throw ModelError("bspline_basis: value outside the knot range");
    int span = k - 1;
    if (xv < hi) {
      span = degree;
      while (span < k - 1 && xv >= knots[span + 1]) ++span;
    }
    n[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[j] = xv - knots[span + 1 - j];
      right[j] = knots[span + j] - xv;
      double saved = 0.0;
      for (int q = 0; q < j; ++q) {
        double denom = right[q + 1] + left[j - q];
        double temp = denom != 0.0 ? n[q] / denom : 0.0;
        n[q] = saved + right[q + 1] * temp;
        saved = left[j - q] * temp;
      }
      n[j] = saved;
    }
    for (int j = 0; j <= degree; ++j) out(static_cast<Index>(r), span - degree + j) = n[j];
  }
  return out;
}

Eigen::MatrixXd second_difference_penalty(int k) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(std::max(k - 2, 0), k);
  for (int i = 0; i + 2 < k; ++i) {
    d(i, i) = 1.0;
    d(i, i + 1) = -2.0;
    d(i, i + 2) = 1.0;
  }
  return d.transpose() * d;
}

double smoother_logpdf(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& penalty, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ModelError("smoother_logpdf: lambda must be positive");
  if (penalty.rows() != gamma.size()) throw ModelError("smoother_logpdf: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(penalty, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cut = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  double rank = 0.0, logdet = 0.0;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev[i] > cut) {
      rank += 1.0;
      logdet += std::log(ev[i]);
    }
  const double quad = gamma.dot(penalty * gamma);
  return 0.5 * rank * std::log(lambda) - 0.5 * lambda * quad + 0.5 * logdet -
         0.5 * rank * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------- design

struct Design::Encoder {
  FormulaTerm term;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  // factor
  std::vector<std::string> levels;
  std::vector<double> numeric_levels;
  bool numeric_factor = false;
  bool drop_first = false;
  // poly: three-term recurrence coefficients
  std::vector<double> alpha;
  std::vector<double> norm2;
  // smooth
  SmoothBasis smooth;

  Index x_cols() const { return static_cast<Index>(x_names.size()); }
  Index z_cols() const { return static_cast<Index>(z_names.size()); }

  std::size_t level_of(const Column& c, std::size_t r) const {
    if (numeric_factor) {
      if (!c.numeric) throw ModelError("factor(" + c.name + "): column type differs from training data");
      auto it = std::find(numeric_levels.begin(), numeric_levels.end(), c.numbers[r]);
      if (it == numeric_levels.end())
        throw ModelError("factor(" + c.name + "): unknown level '" + c.text[r] + "'");
      return static_cast<std::size_t>(it - numeric_levels.begin());
    }
    auto it = std::find(levels.begin(), levels.end(), c.text[r]);
    if (it == levels.end()) throw ModelError("factor(" + c.name + "): unknown level '" + c.text[r] + "'");
    return static_cast<std::size_t>(it - levels.begin());
  }

  Eigen::MatrixXd poly_columns(const std::vector<double>& x) const {
    const int deg = term.k;
    const Index n = static_cast<Index>(x.size());
    Eigen::MatrixXd p(n, deg + 1);
    p.col(0).setOnes();
    for (Index i = 0; i < n; ++i) p(i, 1) = x[i] - alpha[0];
    for (int d = 1; d < deg; ++d)
      for (Index i = 0; i < n; ++i)
        p(i, d + 1) = (x[i] - alpha[d]) * p(i, d) - (norm2[d + 1] / norm2[d]) * p(i, d - 1);
    Eigen::MatrixXd out(n, deg);
    for (int d = 1; d <= deg; ++d) out.col(d - 1) = p.col(d) / std::sqrt(norm2[d + 1]);
    return out;
  }

  Eigen::MatrixXd centered_spline(const std::vector<double>& x) const {
    const double tol = 1e-10 * std::max(1.0, smooth.upper - smooth.lower);
    std::vector<double> xc(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < smooth.lower - tol || x[i] > smooth.upper + tol)
        throw ModelError(smooth.name + ": value " + format_double(x[i]) + " outside the fitted range [" +
                         format_double(smooth.lower) + ", " + format_double(smooth.upper) + "]");
      xc[i] = std::clamp(x[i], smooth.lower, smooth.upper);
    }
    Eigen::MatrixXd b = bspline_basis(xc, smooth.knots, smooth.degree);
    b.rowwise() -= smooth.center;
    return b;
  }
};

Design::Design(std::string_view formula_text, const DataTable& data) : formula_(parse_formula(formula_text)) {
  bool full_rank_factor_used = formula_.intercept;
  if (formula_.intercept) {
    auto e = std::make_shared<Encoder>();
    e->term.kind = FormulaTerm::Kind::Intercept;
    e->x_names = {"(Intercept)"};
    encoders_.push_back(e);
  }
  std::set<std::string> seen;
  for (const auto& t : formula_.terms) {
    if (t.kind == FormulaTerm::Kind::Intercept || t.kind == FormulaTerm::Kind::NoIntercept) continue;
    std::string key = std::to_string(static_cast<int>(t.kind)) + ":" + t.column;
    if (!seen.insert(key).second) throw ModelError("formula: duplicate term for column " + t.column);
    auto e = std::make_shared<Encoder>();
    e->term = t;
    const Column& col = data.column(t.column);
    switch (t.kind) {
      case FormulaTerm::Kind::Numeric:
        data.numeric(t.column);
        e->x_names = {t.column};
        break;
      case FormulaTerm::Kind::Offset:
        data.numeric(t.column);
        break;
      case FormulaTerm::Kind::Factor: {
        data.text(t.column);
        e->numeric_factor = col.numeric;
        if (col.numeric) {
          std::set<double> lv(col.numbers.begin(), col.numbers.end());
          e->numeric_levels.assign(lv.begin(), lv.end());
          for (double v : e->numeric_levels) {
            auto it = std::find(col.numbers.begin(), col.numbers.end(), v);
            e->levels.push_back(col.text[static_cast<std::size_t>(it - col.numbers.begin())]);
          }
        } else {
          std::set<std::string> lv(col.text.begin(), col.text.end());
          e->levels.assign(lv.begin(), lv.end());
        }
        e->drop_first = full_rank_factor_used;
        full_rank_factor_used = true;
        for (std::size_t l = e->drop_first ? 1 : 0; l < e->levels.size(); ++l)
          e->x_names.push_back("factor(" + t.column + ")" + e->levels[l]);
        break;
      }
      case FormulaTerm::Kind::Poly: {
        const auto& x = data.numeric(t.column);
        std::set<double> distinct(x.begin(), x.end());
        if (static_cast<int>(distinct.size()) <= t.k)
          throw ModelError("poly(" + t.column + ", " + std::to_string(t.k) + "): too few distinct values");
        const double n = static_cast<double>(x.size());
        std::vector<double> prev(x.size(), 0.0), cur(x.size(), 1.0);
        e->norm2 = {1.0, n};
        for (int d = 0; d < t.k; ++d) {
          double num = 0.0;
          for (std::size_t i = 0; i < x.size(); ++i) num += x[i] * cur[i] * cur[i];
          double a = num / e->norm2[d + 1];
          e->alpha.push_back(a);
          std::vector<double> next(x.size());
          double ratio = d == 0 ? 0.0 : e->norm2[d + 1] / e->norm2[d];
          double nn = 0.0;
          for (std::size_t i = 0; i < x.size(); ++i) {
            next[i] = (x[i] - a) * cur[i] - ratio * prev[i];
            nn += next[i] * next[i];
          }
          e->norm2.push_back(nn);
          prev.swap(cur);
          cur.swap(next);
        }
        for (int d = 1; d <= t.k; ++d) e->x_names.push_back("poly(" + t.column + "," + std::to_string(t.k) + ")" + std::to_string(d));
        break;
      }
      case FormulaTerm::Kind::Smooth: {
        const auto& x = data.numeric(t.column);
        SmoothBasis& sb = e->smooth;
        sb.name = "s(" + t.column + ")";
        sb.column = t.column;
        sb.k = t.k;
        sb.degree = std::min(3, t.k - 1);
        sb.lower = *std::min_element(x.begin(), x.end());
        sb.upper = *std::max_element(x.begin(), x.end());
        if (!(sb.upper > sb.lower)) throw ModelError(sb.name + ": covariate has no spread");
        const int interior = sb.k - sb.degree - 1;
        for (int i = 0; i <= sb.degree; ++i) sb.knots.push_back(sb.lower);
        for (int i = 1; i <= interior; ++i)
          sb.knots.push_back(sb.lower + (sb.upper - sb.lower) * i / static_cast<double>(interior + 1));
        for (int i = 0; i <= sb.degree; ++i) sb.knots.push_back(sb.upper);
        Eigen::MatrixXd b = bspline_basis(x, sb.knots, sb.degree);
        sb.center = b.colwise().mean();
        sb.penalty = second_difference_penalty(sb.k);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sb.penalty);
        // eigenvalues ascending: the first two span {constant, linear}
        sb.range_basis = eig.eigenvectors().rightCols(sb.k - 2);
        sb.range_eigenvalues = eig.eigenvalues().tail(sb.k - 2);
        e->x_names = {sb.name + ".linear"};
        for (int j = 0; j < sb.k - 2; ++j) e->z_names.push_back(sb.name + "." + std::to_string(j + 1));
        break;
      }
      default:
        break;
    }
    encoders_.push_back(e);
  }
  training_ = apply(data);

  if (training_.X.cols() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(training_.X);
    if (qr.rank() < training_.X.cols())
      training_.warnings.push_back("design matrix X is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                                   std::to_string(training_.X.cols()) + " columns)");
  }
}

DesignBlocks Design::apply(const DataTable& data) const {
  const Index n = static_cast<Index>(data.rows());
  Index jx = 0, kz = 0;
  for (const auto& e : encoders_) {
    jx += e->x_cols();
    kz += e->z_cols();
  }
  DesignBlocks out;
  out.X = Eigen::MatrixXd::Zero(n, jx);
  out.offset = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd zdense = Eigen::MatrixXd::Zero(n, kz);
  Index xc = 0, zc = 0;
  for (const auto& e : encoders_) {
    const auto& t = e->term;
    switch (t.kind) {
      case FormulaTerm::Kind::Intercept:
        out.X.col(xc).setOnes();
        break;
      case FormulaTerm::Kind::Numeric: {
        const auto& x = data.numeric(t.column);
        for (Index i = 0; i < n; ++i) out.X(i, xc) = x[i];
        break;
      }
      case FormulaTerm::Kind::Offset: {
        const auto& x = data.numeric(t.column);
        for (Index i = 0; i < n; ++i) out.offset[i] += x[i];
        break;
      }
      case FormulaTerm::Kind::Factor: {
        data.text(t.column);
        const Column& c = data.column(t.column);
        for (Index i = 0; i < n; ++i) {
          std::size_t level = e->level_of(c, static_cast<std::size_t>(i));
          if (e->drop_first && level == 0) continue;
          out.X(i, xc + static_cast<Index>(level) - (e->drop_first ? 1 : 0)) = 1.0;
        }
        break;
      }
      case FormulaTerm::Kind::Poly:
        out.X.middleCols(xc, t.k) = e->poly_columns(data.numeric(t.column));
        break;
      case FormulaTerm::Kind::Smooth: {
        const SmoothBasis& sb = e->smooth;
        Eigen::MatrixXd b = e->centered_spline(data.numeric(t.column));
        Eigen::VectorXd idx = Eigen::VectorXd::LinSpaced(sb.k, 0.0, sb.k - 1.0);
        out.X.col(xc) = b * idx;
        zdense.middleCols(zc, sb.k - 2) = b * sb.range_basis;
        PenaltyBlock pb;
        pb.name = sb.name;
        pb.start = zc;
        pb.size = sb.k - 2;
        pb.rank = pb.size;
        pb.penalty = SparseSymMatrix::diagonal(sb.range_eigenvalues).matrix();
        out.penalties.push_back(std::move(pb));
        out.smooths.push_back(sb);
        break;
      }
      default:
        break;
    }
    for (const auto& name : e->x_names) out.x_names.push_back(name);
    for (const auto& name : e->z_names) out.z_names.push_back(name);
    xc += e->x_cols();
    zc += e->z_cols();
  }
  out.Z = zdense.sparseView(0.0, 0.0);
  out.Z.makeCompressed();
  return out;
}

DesignBlocks build_design(std::string_view formula, const DataTable& data) {
  return Design(formula, data).training();
}

}  // namespace stgm
