#include "stgm/laplace.hpp"

#include <cmath>
#include <numbers>

#include "stgm/kernels.hpp"

namespace stgm {

HessianFactor::HessianFactor(const SparseMatrix& h, const Permutation& perm) : perm_(perm) {
  if (perm_.size() != h.rows()) perm_.setIdentity(h.rows());
  SparseMatrix hp;
  hp = h.selfadjointView<Eigen::Lower>().twistedBy(perm_);
  ldlt_.compute(hp);
  pd_ = ldlt_.info() == Eigen::Success && (ldlt_.vectorD().array() > 0.0).all();
}

double HessianFactor::logdet() const {
  if (!pd_) throw NumericalError("inner Hessian is not positive definite");
  return ldlt_.vectorD().array().log().sum();
}

Eigen::MatrixXd HessianFactor::solve(const Eigen::MatrixXd& rhs) const {
  if (!pd_) throw NumericalError("inner Hessian is not positive definite");
  Eigen::MatrixXd prhs = perm_ * rhs;
  Eigen::MatrixXd x = ldlt_.solve(prhs);
  return perm_.inverse() * x;
}

namespace {

struct Inner {
  const Model& model;
  const Assembled& a;
  SparseMatrix M;
  SparseMatrix Mt;
  Eigen::VectorXd eta0;
  std::vector<Family> families;
  SparseMatrix qabs;
  kernels::RowInputs in;
  int threads;

  Inner(const Model& m, const Assembled& as, int th) : model(m), a(as), threads(th) {
    M = model.loading(model.rows(), a);
    Mt = M.transpose();
    eta0 = model.fixed_predictor(model.rows(), a);
    qabs = a.Q.matrix().cwiseAbs();
    for (Index c = 0; c < model.num_vars(); ++c) families.push_back(model.family(c));
    in.families = &families;
    in.var = &model.rows().var;
    in.y = &model.response();
    in.dispersion = &a.dispersion;
  }

  kernels::RowTerms rows(const Eigen::VectorXd& u) const {
    Eigen::VectorXd eta = eta0;
    if (u.size() > 0) eta += M * u;
    return kernels::family_rows(in, eta, threads);
  }

  double objective(const Eigen::VectorXd& u, const kernels::RowTerms& rt) const {
    return rt.total + 0.5 * u.dot(a.Q.matrix() * u);
  }

  // size of the summed terms, which sets the rounding level of the objective
  double magnitude(const Eigen::VectorXd& u, const kernels::RowTerms& rt) const {
    const Eigen::VectorXd au = u.cwiseAbs();
    return std::abs(rt.total) + 0.5 * au.dot(qabs * au);
  }

  SparseMatrix hessian(const kernels::RowTerms& rt) const {
    SparseMatrix dm = rt.d2.asDiagonal() * M;
    SparseMatrix h = Mt * dm;
    return a.Q.matrix() + h;
  }
};

}  // namespace

double joint_nll(const Model& model, const Assembled& a, const Eigen::VectorXd& u, bool include_data) {
  if (!model.has_response() && include_data) throw ModelError("model has no response");
  const double n_u = static_cast<double>(model.num_random());
  double prior = 0.5 * u.dot(a.Q.matrix() * u) - 0.5 * a.logdet_q + 0.5 * n_u * std::log(2.0 * std::numbers::pi);
  if (!include_data) return prior;
  Inner inner(model, a, 1);
  return inner.rows(u).total + prior;
}

LaplaceResult laplace_marginal(const Model& model, const Assembled& a, const Eigen::VectorXd* start,
                               const LaplaceOptions& options) {
  if (!model.has_response()) throw ModelError("model has no response");
  LaplaceResult res;
  const Index n_u = model.num_random();
  Inner inner(model, a, options.threads);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n_u);
  if (start && start->size() == n_u && start->allFinite()) u = *start;

  kernels::RowTerms rt = inner.rows(u);
  double f = inner.objective(u, rt);
  if (n_u > 0) {
    bool stalled = false;
    int stalls = 0;
    bool precision_floor = false;
    for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
      Eigen::VectorXd g = a.Q.matrix() * u + inner.Mt * rt.d1;
      res.gradient_max = g.lpNorm<Eigen::Infinity>();
      if (!std::isfinite(res.gradient_max)) break;
      if (res.gradient_max < options.tolerance) {
        res.converged = true;
        break;
      }
      SparseMatrix h = inner.hessian(rt);
      bool accepted = false;
      // undamped first, then multiply the diagonal by (1 + 10^k)
      for (int k = -1; k <= 6 && !accepted; ++k) {
        SparseMatrix hd = h;
        if (k >= 0) {
          const double factor = 1.0 + std::pow(10.0, k);
          for (Index j = 0; j < n_u; ++j) {
            double& d = hd.coeffRef(j, j);
            d = std::max(std::abs(d), 1e-8) * factor;
          }
        }
        HessianFactor fac(hd, model.ordering());
        if (!fac.positive_definite()) continue;
        Eigen::VectorXd step = -fac.solve(g);
        // predicted decrease below working precision of f
        if (k < 0 && -0.5 * g.dot(step) < 1e-13 * std::max(1.0, std::abs(f))) {
          precision_floor = true;
          break;
        }
        double t = 1.0;
        for (int half = 0; half < 40; ++half, t *= 0.5) {
          Eigen::VectorXd un = u + t * step;
          kernels::RowTerms rn = inner.rows(un);
          double fn = inner.objective(un, rn);
          if (std::isfinite(fn) && fn <= f + 1e-14 * std::max(1.0, std::abs(f))) {
            stalled = !(fn < f) && k < 0;
            u = std::move(un);
            rt = std::move(rn);
            f = fn;
            accepted = true;
            break;
          }
        }
        // a full Newton step that cannot decrease f, with a predicted decrease inside its rounding
        if (!accepted && k < 0 && -0.5 * g.dot(step) < 1e-12 * inner.magnitude(u, rt)) {
          precision_floor = true;
          break;
        }
      }
      if (precision_floor) {
        res.converged = true;
        break;
      }
      if (!accepted) {
        res.message = "inner Newton could not decrease the objective";
        break;
      }
      stalls = stalled ? stalls + 1 : 0;
      if (stalled && (res.gradient_max < 1e3 * options.tolerance || stalls >= 2)) {
        // no further progress possible at working precision
        res.converged = true;
        break;
      }
    }
    if (!res.converged && res.message.empty()) res.message = "inner Newton reached the iteration limit";
  } else {
    res.converged = true;
  }

  auto fac = std::make_shared<HessianFactor>(inner.hessian(rt), model.ordering());
  if (!fac->positive_definite()) {
    res.message = "inner Hessian is not positive definite at the mode";
    res.mode = u;
    return res;
  }
  res.logdet_h = fac->logdet();
  res.hessian = fac;
  res.mode = std::move(u);
  res.barrier = rt.invalid > 0;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  res.joint = f - 0.5 * a.logdet_q + 0.5 * static_cast<double>(n_u) * log2pi;
  res.value = res.joint + 0.5 * res.logdet_h - 0.5 * static_cast<double>(n_u) * log2pi;
  res.ok = std::isfinite(res.value);
  return res;
}

LaplaceResult laplace_marginal(const Model& model, const Eigen::VectorXd& theta, const Eigen::VectorXd* start,
                               const LaplaceOptions& options) {
  Assembled a = model.assemble(theta);
  return laplace_marginal(model, a, start, options);
}

double laplace_value(const Model& model, const Eigen::VectorXd& theta, const Eigen::VectorXd* start,
                     const LaplaceOptions& options) {
  try {
    LaplaceResult r = laplace_marginal(model, theta, start, options);
    return r.ok ? r.value : std::numeric_limits<double>::infinity();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const ModelError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace stgm
