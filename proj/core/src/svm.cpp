#include "probekit/svm.hpp"

#include <cmath>
#include <limits>

#include "probekit/errors.hpp"
#include "probekit/log.hpp"

namespace probekit {

double Kernel::operator()(const Vector& u, const Vector& v) const {
  if (type == Type::Rbf) return std::exp(-gamma * (u - v).squaredNorm());
  return std::pow(u.dot(v) + coef, degree);
}

Vector Kernel::gradient(const Vector& sv, const Vector& x) const {
  if (type == Type::Rbf) return 2.0 * gamma * (sv - x) * std::exp(-gamma * (sv - x).squaredNorm());
  return degree * std::pow(sv.dot(x) + coef, degree - 1) * sv;
}

KernelSvm::KernelSvm(Kernel kernel, Matrix support_vectors, Vector coef, double bias, bool regression)
    : kernel_(kernel),
      support_vectors_(std::move(support_vectors)),
      coef_(std::move(coef)),
      bias_(bias),
      regression_(regression) {
  if (support_vectors_.rows() != coef_.size()) throw PreconditionError("svm: coefficient count mismatch");
}

double KernelSvm::decision_function(const Vector& x) const {
  check_input(x);
  double f = bias_;
  for (Eigen::Index i = 0; i < support_vectors_.rows(); ++i) {
    f += coef_[i] * kernel_(support_vectors_.row(i).transpose(), x);
  }
  return f;
}

RawEvaluation KernelSvm::evaluate_raw(const Vector& x, bool with_jacobian) const {
  check_input(x);
  double f = bias_;
  Vector grad = Vector::Zero(input_dim());
  for (Eigen::Index i = 0; i < support_vectors_.rows(); ++i) {
    const Vector sv = support_vectors_.row(i).transpose();
    if (kernel_.type == Kernel::Type::Rbf) {
      const Vector diff = sv - x;
      const double k = std::exp(-kernel_.gamma * diff.squaredNorm());
      f += coef_[i] * k;
      if (with_jacobian) grad += coef_[i] * 2.0 * kernel_.gamma * k * diff;
    } else {
      const double base = sv.dot(x) + kernel_.coef;
      f += coef_[i] * std::pow(base, kernel_.degree);
      if (with_jacobian) grad += coef_[i] * kernel_.degree * std::pow(base, kernel_.degree - 1) * sv;
    }
  }
  RawEvaluation r;
  if (regression_) {
    r.value = Vector::Constant(1, f);
    if (with_jacobian) r.jacobian = grad.transpose();
  } else {
    r.value = Vector::Zero(2);
    r.value[1] = f;
    if (with_jacobian) {
      r.jacobian = Matrix::Zero(2, input_dim());
      r.jacobian.row(1) = grad.transpose();
    }
  }
  return r;
}

std::optional<ParamVector> KernelSvm::params() const {
  const int m = static_cast<int>(coef_.size());
  Vector theta(m + 1);
  theta << coef_, bias_;
  return ParamVector(std::move(theta), {{"dual_coef", 0, m}, {"bias", m, 1}});
}

std::shared_ptr<const Predictor> KernelSvm::with_params(const ParamVector& params) const {
  if (params.size() != coef_.size() + 1) throw PreconditionError("svm: parameter length");
  return std::make_shared<KernelSvm>(kernel_, support_vectors_, params.theta().head(coef_.size()),
                                     params.theta()[coef_.size()], regression_);
}

nlohmann::json KernelSvm::to_json() const {
  nlohmann::json kernel = {{"type", kernel_.type == Kernel::Type::Rbf ? "rbf" : "poly"},
                           {"gamma", kernel_.gamma},
                           {"degree", kernel_.degree},
                           {"coef", kernel_.coef}};
  std::vector<double> sv(support_vectors_.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      sv.data(), support_vectors_.rows(), support_vectors_.cols()) = support_vectors_;
  return {{"kind", to_string(kind())},
          {"input_dim", input_dim()},
          {"regression", regression_},
          {"kernel", kernel},
          {"support_vectors", sv},
          {"dual_coef", std::vector<double>(coef_.data(), coef_.data() + coef_.size())},
          {"bias", bias_}};
}

namespace {

constexpr double kTau = 1e-12;

// Kernel rows, cached in full for small problems and computed on demand otherwise.
class KernelRows {
 public:
  KernelRows(const Kernel& kernel, const Matrix& x) : kernel_(kernel), x_(x) {
    const Eigen::Index n = x_.rows();
    diag_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) diag_[i] = kernel_(x_.row(i).transpose(), x_.row(i).transpose());
    if (n <= 3000) {
      full_.resize(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
          full_(i, j) = full_(j, i) = kernel_(x_.row(i).transpose(), x_.row(j).transpose());
        }
      }
    }
  }

  Vector row(Eigen::Index i) const {
    if (full_.size() > 0) return full_.row(i).transpose();
    Vector r(x_.rows());
    const Vector xi = x_.row(i).transpose();
    for (Eigen::Index j = 0; j < x_.rows(); ++j) r[j] = kernel_(xi, x_.row(j).transpose());
    return r;
  }
  double diag(Eigen::Index i) const { return diag_[i]; }

 private:
  const Kernel& kernel_;
  const Matrix& x_;
  Matrix full_;
  Vector diag_;
};

struct SmoResult {
  Vector alpha;
  double rho = 0.0;
  double violation = 0.0;
  long iterations = 0;
};

// Solves min 1/2 a'Qa + p'a  s.t. y'a = const, 0 <= a <= C with
// Q_ij = y_i y_j K(idx_i, idx_j). Working-set selection uses second-order
// information (maximal gain pair among violating pairs).
SmoResult solve_smo(const KernelRows& kernel, const std::vector<Eigen::Index>& index, const Vector& y,
                    const Vector& p, double C, double eps, long max_iter) {
  const Eigen::Index l = y.size();
  Vector alpha = Vector::Zero(l);
  Vector grad = p;
  Vector qd(l);
  for (Eigen::Index t = 0; t < l; ++t) qd[t] = kernel.diag(index[t]);
  auto q_row = [&](Eigen::Index i) {
    const Vector k = kernel.row(index[i]);
    Vector q(l);
    for (Eigen::Index t = 0; t < l; ++t) q[t] = y[i] * y[t] * k[index[t]];
    return q;
  };
  auto upper = [&](Eigen::Index t) { return alpha[t] >= C; };
  auto lower = [&](Eigen::Index t) { return alpha[t] <= 0; };

  SmoResult res;
  const double inf = std::numeric_limits<double>::infinity();
  long iter = 0;
  for (;; ++iter) {
    double gmax = -inf, gmax2 = -inf;
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < l; ++t) {
      if (y[t] > 0) {
        if (!upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = t;
        }
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i = t;
      }
    }
    Eigen::Index j = -1;
    double obj_min = inf;
    Vector qi;
    if (i >= 0) qi = q_row(i);
    for (Eigen::Index t = 0; t < l && i >= 0; ++t) {
      if (y[t] > 0) {
        if (lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0) {
          const double quad = qd[i] + qd[t] - 2.0 * y[i] * qi[t];
          const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= obj_min) {
            j = t;
            obj_min = obj;
          }
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          const double quad = qd[i] + qd[t] + 2.0 * y[i] * qi[t];
          const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= obj_min) {
            j = t;
            obj_min = obj;
          }
        }
      }
    }
    res.violation = (i >= 0) ? gmax + gmax2 : 0.0;
    if (i < 0 || j < 0 || gmax + gmax2 < eps) break;
    if (iter >= max_iter) {
      throw ConvergenceError("svm: SMO did not converge in " + std::to_string(max_iter) +
                                 " iterations (max KKT violation " + std::to_string(gmax + gmax2) + ")",
                             gmax + gmax2);
    }

    const Vector qj = q_row(j);
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = qd[i] + qd[j] + 2.0 * qi[j];
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = qd[i] + qd[j] - 2.0 * qi[j];
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    grad += qi * dai + qj * daj;
  }

  // Offset: average y*G over free variables, else the midpoint of the feasible interval.
  double ub = inf, lb = -inf, sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < l; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  res.rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  res.alpha = std::move(alpha);
  res.iterations = iter;
  return res;
}

}  // namespace

std::shared_ptr<const KernelSvm> fit_kernel_svm(const Dataset& data, const SvmOptions& options) {
  if (!(options.C > 0)) throw PreconditionError("svm: C must be positive");
  if (!(options.tolerance > 0)) throw PreconditionError("svm: tolerance must be positive");
  if (options.kernel.type == Kernel::Type::Rbf && !(options.kernel.gamma > 0)) {
    throw PreconditionError("svm: rbf gamma must be positive");
  }
  if (options.kernel.type == Kernel::Type::Polynomial && options.kernel.degree < 1) {
    throw PreconditionError("svm: polynomial degree must be >= 1");
  }
  if (!data.has_labels() || data.empty()) throw PreconditionError("svm: labelled data required");
  const Matrix x = data.feature_matrix();
  const Vector labels = data.label_vector();
  const Eigen::Index n = x.rows();
  KernelRows rows(options.kernel, x);

  Vector coef;
  double rho = 0.0;
  SmoResult res;
  if (!options.regression) {
    if (data.num_classes() != 2) throw ArityError("svm: classification needs binary labels");
    Vector y(n);
    std::vector<Eigen::Index> index(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      y[i] = labels[i] > 0.5 ? 1.0 : -1.0;
      index[i] = i;
    }
    res = solve_smo(rows, index, y, Vector::Constant(n, -1.0), options.C, options.tolerance, options.max_iterations);
    coef = res.alpha.cwiseProduct(y);
  } else {
    if (!(options.epsilon >= 0)) throw PreconditionError("svm: epsilon must be non-negative");
    Vector y(2 * n), p(2 * n);
    std::vector<Eigen::Index> index(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      y[i] = 1.0;
      y[i + n] = -1.0;
      p[i] = options.epsilon - labels[i];
      p[i + n] = options.epsilon + labels[i];
      index[i] = index[i + n] = i;
    }
    res = solve_smo(rows, index, y, p, options.C, options.tolerance, options.max_iterations);
    coef = res.alpha.head(n) - res.alpha.tail(n);
  }
  rho = res.rho;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (coef[i] != 0.0) keep.push_back(i);
  }
  Matrix sv(static_cast<Eigen::Index>(keep.size()), x.cols());
  Vector sv_coef(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    sv.row(static_cast<Eigen::Index>(k)) = x.row(keep[k]);
    sv_coef[static_cast<Eigen::Index>(k)] = coef[keep[k]];
  }
  log().debug("svm: {} support vectors, {} SMO iterations, KKT violation {:.2e}", keep.size(), res.iterations,
              res.violation);
  auto model = std::make_shared<KernelSvm>(options.kernel, std::move(sv), std::move(sv_coef), -rho,
                                           options.regression);
  model->max_kkt_violation = res.violation;
  model->iterations = res.iterations;
  return model;
}

}  // namespace probekit
