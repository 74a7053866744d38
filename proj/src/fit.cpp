#include "stgm/fit.hpp"

#include <cmath>
#include <limits>

namespace stgm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void finish(const Model& model, FitResult& r, const LaplaceResult& lr) {
  const auto& layout = model.layout();
  r.names = layout.free_names();
  r.transforms.clear();
  for (auto i : layout.free_indices()) r.transforms.push_back(layout.params()[i].transform);
  r.natural = layout.natural(r.theta);
  r.estimate.resize(r.theta.size());
  r.se = Eigen::VectorXd::Constant(r.theta.size(), kNaN);
  for (Index k = 0; k < r.theta.size(); ++k) {
    r.estimate[k] = to_natural(r.transforms[static_cast<std::size_t>(k)], r.theta[k]);
    if (r.has_covariance && r.covariance(k, k) >= 0.0)
      r.se[k] = std::abs(natural_derivative(r.transforms[static_cast<std::size_t>(k)], r.theta[k])) *
                std::sqrt(r.covariance(k, k));
  }
  r.mode = lr.mode;
  r.inner_hessian = lr.hessian;
  r.nll = lr.value;
  r.log_lik = -lr.value;
  r.k = static_cast<int>(r.theta.size());
  r.aic = 2.0 * lr.value + 2.0 * r.k;
  r.warnings = model.warnings();
  if (lr.barrier) r.warnings.push_back("some means are numerically invalid at the estimate");
  if (!lr.converged) r.warnings.push_back("inner optimization did not converge: " + lr.message);
}

bool invert_pd(const Eigen::MatrixXd& h, Eigen::MatrixXd& out) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) return false;
  out = llt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
  return out.allFinite();
}

}  // namespace

FitResult fit_model(const Model& model, const FitOptions& options) {
  if (!model.has_response()) throw ModelError("cannot fit a model without a response");
  FitResult r;
  const auto& layout = model.layout();
  Eigen::VectorXd x0 = layout.start();
  Eigen::VectorXd center = Eigen::VectorXd::Zero(model.num_random());

  LaplaceResult first = laplace_marginal(model, x0, &center, options.laplace);
  if (!first.ok) throw NumericalError("negative log likelihood is not finite at the start values");
  center = first.mode;

  kernels::Objective f = [&](const Eigen::VectorXd& x) { return laplace_value(model, x, &center, options.laplace); };
  OptimizerOptions oo = options.optimizer;
  oo.on_accept = [&](const Eigen::VectorXd& x) {
    LaplaceResult lr;
    try {
      lr = laplace_marginal(model, x, &center, options.laplace);
    } catch (const std::runtime_error&) {
      return;
    }
    if (lr.ok) center = lr.mode;
  };
  OptimizerResult opt = minimize_bfgs(f, x0, oo);
  r.theta = opt.x;
  r.iterations = opt.iterations;
  r.evaluations = opt.evaluations;
  r.converged = opt.converged;
  r.message = opt.message;
  Eigen::VectorXd grad = opt.gradient;
  double value = opt.value;

  if (options.compute_se && r.theta.size() > 0) {
    Eigen::MatrixXd h = kernels::fd_hessian(f, r.theta, value, options.hessian_step, oo.threads);
    Eigen::MatrixXd cov;
    bool pd = invert_pd(h, cov);
    // Newton polish when the quasi-Newton iterations stopped short
    for (int polish = 0; pd && polish < 5 && grad.lpNorm<Eigen::Infinity>() >= 0.1 * oo.gradient_tolerance;
         ++polish) {
      Eigen::VectorXd step = -cov * grad;
      bool moved = false;
      for (double t = 1.0; t > 1e-4; t *= 0.5) {
        Eigen::VectorXd xn = r.theta + t * step;
        double fn = f(xn);
        if (std::isfinite(fn) && fn <= value) {
          r.theta = xn;
          value = fn;
          moved = true;
          break;
        }
      }
      if (!moved) break;
      oo.on_accept(r.theta);
      grad = kernels::fd_gradient(f, r.theta, oo.fd_step, oo.threads);
      h = kernels::fd_hessian(f, r.theta, value, options.hessian_step, oo.threads);
      pd = invert_pd(h, cov);
    }
    if (grad.lpNorm<Eigen::Infinity>() < oo.gradient_tolerance) {
      r.converged = true;
      r.message.clear();
    }
    if (pd) {
      r.covariance = cov;
      r.has_covariance = true;
    } else {
      r.warnings.push_back("outer Hessian is not positive definite; standard errors unavailable");
    }
  }
  r.gradient_max = grad.size() ? grad.lpNorm<Eigen::Infinity>() : 0.0;

  LaplaceResult lr = laplace_marginal(model, r.theta, &center, options.laplace);
  auto extra = r.warnings;
  finish(model, r, lr);
  r.warnings.insert(r.warnings.end(), extra.begin(), extra.end());
  if (!r.converged) r.warnings.push_back("outer optimization did not converge: " + r.message);
  return r;
}

FitResult restore_fit(const Model& model, const Eigen::VectorXd& theta, const Eigen::MatrixXd& covariance,
                      const LaplaceOptions& options) {
  FitResult r;
  r.theta = theta;
  if (covariance.size() > 0) {
    if (covariance.rows() != theta.size() || covariance.cols() != theta.size())
      throw ModelError("covariance has the wrong dimension");
    r.covariance = covariance;
    r.has_covariance = true;
  }
  LaplaceResult lr = laplace_marginal(model, theta, nullptr, options);
  if (!lr.ok) throw NumericalError("cannot evaluate the model at the stored parameters");
  r.converged = true;
  finish(model, r, lr);
  return r;
}

namespace {

Prediction predict_encoded(const Model& model, const FitResult& fit, const EncodedRows& enc) {
  Assembled a = model.assemble(fit.theta);
  const Index n = enc.size();
  Prediction p;
  p.errors = enc.errors;
  p.errors.resize(static_cast<std::size_t>(n));
  p.fixed = enc.design.X * a.alpha;
  p.offset = enc.design.offset;
  SparseMatrix m = model.loading(enc, a);
  auto part = [&](Index offset, Index size) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(model.num_random());
    if (size > 0) u.segment(offset, size) = fit.mode.segment(offset, size);
    return Eigen::VectorXd(m * u);
  };
  const Index S = model.num_sites(), C = model.num_vars(), T = model.num_times();
  p.omega = model.has_omega() ? part(model.omega_offset(), S * C) : Eigen::VectorXd::Zero(n);
  p.epsilon = model.has_epsilon() ? part(model.epsilon_offset(), S * C * T) : Eigen::VectorXd::Zero(n);
  p.smooth = part(model.gamma_offset(), model.num_random() - model.gamma_offset());
  p.link = p.fixed + p.smooth + p.omega + p.epsilon + p.offset;
  p.response.resize(n);
  for (Index i = 0; i < n; ++i) {
    if (!enc.ok(i)) {
      ++p.failed;
      for (auto* v : {&p.link, &p.response, &p.fixed, &p.smooth, &p.omega, &p.epsilon, &p.offset}) (*v)[i] = kNaN;
      continue;
    }
    p.response[i] = model.family(enc.var[static_cast<std::size_t>(i)]).inverse_link(p.link[i]);
  }
  return p;
}

double dmu_deta(const Family& f, double eta) {
  switch (f.link) {
    case Link::Identity: return 1.0;
    case Link::Log: return std::exp(eta);
    case Link::Logit: {
      double p = f.inverse_link(eta);
      return p * (1.0 - p);
    }
  }
  return 1.0;
}

}  // namespace

Prediction predict(const Model& model, const FitResult& fit, const DataTable& rows) {
  return predict_encoded(model, fit, model.encode(rows, true));
}

Prediction fitted(const Model& model, const FitResult& fit) { return predict_encoded(model, fit, model.rows()); }

Eigen::VectorXd residuals(const Model& model, const FitResult& fit, ResidualKind kind) {
  if (!model.has_response()) throw ModelError("model has no response");
  Prediction p = fitted(model, fit);
  Assembled a = model.assemble(fit.theta);
  const Eigen::VectorXd& y = model.response();
  Eigen::VectorXd out(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const Index c = model.rows().var[static_cast<std::size_t>(i)];
    const Family& f = model.family(c);
    const double mu = p.response[i];
    if (kind == ResidualKind::Response) {
      out[i] = y[i] - mu;
      continue;
    }
    double d = std::sqrt(std::max(0.0, unit_deviance(f, y[i], mu)));
    if (f.distribution == Distribution::Gaussian) d /= a.dispersion[c];
    if (f.distribution == Distribution::Gamma) d *= std::sqrt(a.dispersion[c]);
    out[i] = y[i] > mu ? d : (y[i] < mu ? -d : 0.0);
  }
  return out;
}

IntegratedOutput integrate_output(const Model& model, const FitResult& fit, const DataTable& grid,
                                  const std::vector<double>& weights, const FitOptions& options) {
  if (weights.size() != grid.rows()) throw ModelError("one weight per grid row is required");
  EncodedRows enc = model.encode(grid, true);
  IntegratedOutput out;
  out.errors = enc.errors;
  for (Index i = 0; i < enc.size(); ++i)
    if (enc.ok(i)) ++out.rows_used;
  if (out.rows_used == 0) throw ModelError("no grid row could be evaluated");

  auto phi = [&](const Assembled& a, const Eigen::VectorXd& u, Eigen::VectorXd* grad_u) {
    SparseMatrix m = model.loading(enc, a);
    Eigen::VectorXd eta = model.fixed_predictor(enc, a);
    if (u.size()) eta += m * u;
    double total = 0.0;
    Eigen::VectorXd dw = Eigen::VectorXd::Zero(enc.size());
    for (Index i = 0; i < enc.size(); ++i) {
      if (!enc.ok(i)) continue;
      const Family& f = model.family(enc.var[static_cast<std::size_t>(i)]);
      total += weights[static_cast<std::size_t>(i)] * f.inverse_link(eta[i]);
      dw[i] = weights[static_cast<std::size_t>(i)] * dmu_deta(f, eta[i]);
    }
    if (grad_u) *grad_u = m.transpose() * dw;
    return total;
  };

  Assembled a = model.assemble(fit.theta);
  Eigen::VectorXd g;
  out.estimate = phi(a, fit.mode, &g);
  double var = 0.0;
  if (g.size() > 0 && fit.inner_hessian) var += g.dot(fit.inner_hessian->solve(g).col(0));
  if (fit.has_covariance && fit.theta.size() > 0) {
    Eigen::VectorXd j(fit.theta.size());
    for (Index k = 0; k < fit.theta.size(); ++k) {
      const double h = kernels::fd_step(fit.theta[k], options.optimizer.fd_step);
      double vals[2];
      for (int sgn = 0; sgn < 2; ++sgn) {
        Eigen::VectorXd x = fit.theta;
        x[k] += sgn == 0 ? h : -h;
        Assembled ax = model.assemble(x);
        LaplaceResult lr = laplace_marginal(model, ax, &fit.mode, options.laplace);
        if (!lr.ok) throw NumericalError("inner problem failed while propagating parameter uncertainty");
        vals[sgn] = phi(ax, lr.mode, nullptr);
      }
      j[k] = (vals[0] - vals[1]) / (2.0 * h);
    }
    var += j.dot(fit.covariance * j);
  }
  out.se = std::sqrt(std::max(0.0, var));
  return out;
}

}  // namespace stgm
