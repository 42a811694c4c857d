#ifndef STABTUNE_LOGREG_HPP
#define STABTUNE_LOGREG_HPP

// Logistic regression on a fixed support (Newton/IRLS) and best-subset
// (L0-constrained) logistic regression by greedy forward selection with
// single-feature swap local search.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "stabtune/core.hpp"

namespace stabtune {

struct SolverOptions {
  double ridge = 1e-6;          // added to the diagonal of the weighted normal equations
  std::size_t max_iter = 50;    // Newton/IRLS iteration cap
  double tol_grad = 1e-6;       // score-equation norm for convergence
  double tol_swap = 1e-8;       // minimal loss improvement, relative to the null-model loss
  bool screen_candidates = true;  // abandon search candidates that cannot beat the incumbent
};

struct SparseModel {
  FeatureSet support;
  std::vector<double> coefficients;  // original feature scale, aligned with support
  double intercept = 0.0;
  bool converged = true;
  // Infimum of the training negative log-likelihood (sum over rows) over the
  // support's coefficients; 0 when the support separates the classes.
  double loss = 0.0;
  bool separated = false;
  std::size_t iterations = 0;
};

namespace detail {

[[nodiscard]] inline double log1pexp(double t) noexcept {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

[[nodiscard]] inline double sigmoid(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// Column-standardized copy of a dataset shared by every fit on it.
class Design {
public:
  explicit Design(const Dataset& data) : n_(data.n()), p_(data.p()) {
    data.validate();
    z_ = data.x;
    mean_ = z_.colwise().mean().transpose();
    scale_.resize(static_cast<Eigen::Index>(p_));
    constant_.assign(p_, false);
    for (Eigen::Index j = 0; j < z_.cols(); ++j) {
      z_.col(j).array() -= mean_(j);
      const double sd = std::sqrt(z_.col(j).squaredNorm() / static_cast<double>(n_));
      if (!(sd > 1e-12 * (1.0 + std::abs(mean_(j))))) {
        constant_[static_cast<std::size_t>(j)] = true;
        scale_(j) = 1.0;
        z_.col(j).setZero();
      } else {
        scale_(j) = sd;
        z_.col(j) /= sd;
      }
    }
    y_.resize(static_cast<Eigen::Index>(n_));
    double positives = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      y_(static_cast<Eigen::Index>(i)) = data.y[i];
      positives += data.y[i];
    }
    const double rate = positives / static_cast<double>(n_);
    null_loss_ = 0.0;
    if (rate > 0.0 && rate < 1.0)
      null_loss_ = -static_cast<double>(n_) * (rate * std::log(rate) + (1 - rate) * std::log1p(-rate));
  }

  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t p() const noexcept { return p_; }
  [[nodiscard]] const Eigen::MatrixXd& z() const noexcept { return z_; }
  [[nodiscard]] const Eigen::VectorXd& y() const noexcept { return y_; }
  [[nodiscard]] bool constant(Index j) const { return constant_[j]; }
  [[nodiscard]] double null_loss() const noexcept { return null_loss_; }
  [[nodiscard]] bool single_class() const noexcept { return null_loss_ == 0.0; }

  /// Model on the original scale from standardized coefficients.
  [[nodiscard]] SparseModel to_model(const std::vector<Index>& support,
                                     const Eigen::VectorXd& beta) const {
    std::vector<std::pair<Index, double>> pairs;
    pairs.reserve(support.size());
    double intercept = beta(0);
    for (std::size_t a = 0; a < support.size(); ++a) {
      const auto j = static_cast<Eigen::Index>(support[a]);
      double coef = constant_[support[a]] ? 0.0 : beta(static_cast<Eigen::Index>(a) + 1) / scale_(j);
      intercept -= coef * mean_(j);
      pairs.emplace_back(support[a], coef);
    }
    std::sort(pairs.begin(), pairs.end());
    SparseModel model;
    std::vector<Index> indices;
    for (const auto& [j, c] : pairs) {
      indices.push_back(j);
      model.coefficients.push_back(c);
    }
    model.support = FeatureSet(std::move(indices));
    model.intercept = intercept;
    return model;
  }

private:
  std::size_t n_, p_;
  Eigen::MatrixXd z_;
  Eigen::VectorXd mean_, scale_, y_;
  std::vector<bool> constant_;
  double null_loss_ = 0.0;
};

struct FitOutcome {
  Eigen::VectorXd beta;  // [intercept, coefficients in support order]
  double loss = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool separated = false;
  bool screened_out = false;
  std::size_t iterations = 0;
};

/// Damped Newton (IRLS) for the logistic log-likelihood on a standardized
/// support. Once the linear predictor classifies every row correctly the
/// support separates the classes, the likelihood has no finite maximizer and
/// the fit stops with loss 0 (the infimum). With `bar` set, a fit stops early
/// once its loss cannot fall below bar: the current loss minus twice the
/// Newton decrement stays at or above it.
inline FitOutcome newton_fit(const Design& design, std::span<const Index> support,
                             Eigen::VectorXd beta, const SolverOptions& opts,
                             std::optional<double> bar = std::nullopt) {
  const auto n = static_cast<Eigen::Index>(design.n());
  const auto s = static_cast<Eigen::Index>(support.size()) + 1;
  Eigen::MatrixXd a(n, s);
  a.col(0).setOnes();
  for (Eigen::Index c = 1; c < s; ++c)
    a.col(c) = design.z().col(static_cast<Eigen::Index>(support[static_cast<std::size_t>(c - 1)]));
  const Eigen::VectorXd& y = design.y();
  auto separates = [&](const Eigen::VectorXd& eta) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (y(i) > 0.5 ? !(eta(i) > 0.0) : !(eta(i) < 0.0)) return false;
    return true;
  };

  auto loss_of = [&](const Eigen::VectorXd& eta) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += log1pexp(eta(i)) - y(i) * eta(i);
    return total;
  };

  FitOutcome out;
  Eigen::VectorXd eta = a * beta;
  double loss = loss_of(eta);
  Eigen::VectorXd mu(n), sqrt_w(n), grad(s), delta(s), beta_new(s), eta_new(n);
  Eigen::MatrixXd weighted(n, s), hessian(s, s);
  Eigen::LLT<Eigen::MatrixXd> llt(s);

  std::size_t it = 0;
  for (; it < opts.max_iter; ++it) {
    if (separates(eta)) {
      out.separated = true;
      loss = 0.0;
      break;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = sigmoid(eta(i));
      sqrt_w(i) = std::sqrt(mu(i) * (1.0 - mu(i)));
    }
    grad.noalias() = a.transpose() * (mu - y);
    if (grad.norm() <= opts.tol_grad) {
      out.converged = true;
      break;
    }
    weighted = a.array().colwise() * sqrt_w.array();
    hessian.setZero();
    hessian.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
    hessian.diagonal().array() += opts.ridge;
    llt.compute(hessian.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success) throw NumericalError("degenerate design");
    delta = llt.solve(grad);
    const double decrement = grad.dot(delta);
    if (bar && loss - 2.0 * decrement >= *bar) {
      out.screened_out = true;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    const double slack = 1e-13 * (1.0 + std::abs(loss));
    for (int halvings = 0; halvings < 40; ++halvings, step *= 0.5) {
      beta_new = beta - step * delta;
      eta_new.noalias() = a * beta_new;
      const double candidate = loss_of(eta_new);
      if (candidate <= loss - 1e-4 * step * decrement + slack) {
        beta.swap(beta_new);
        eta.swap(eta_new);
        loss = candidate;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.iterations = it;
  out.beta = std::move(beta);
  out.loss = loss;
  return out;
}

inline FitOutcome cold_fit(const Design& design, std::span<const Index> support,
                           const SolverOptions& opts) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(support.size()) + 1);
  return newton_fit(design, support, std::move(beta), opts);
}

inline SparseModel fit_on_design(const Design& design, const FeatureSet& support,
                                 const SolverOptions& opts) {
  support.validate(design.p());
  if (support.size() >= design.n())
    throw InvalidArgument("fit_logistic: support size must be smaller than n");
  const auto outcome = cold_fit(design, support.indices(), opts);
  SparseModel model = design.to_model(support.indices(), outcome.beta);
  model.converged = outcome.converged;
  model.separated = outcome.separated;
  model.loss = outcome.loss;
  model.iterations = outcome.iterations;
  return model;
}

/// Newton decrement of appending one feature to a fitted base support,
/// evaluated at the base optimum with the new coefficient at zero. Matches
/// the first screening test of newton_fit without building each trial design.
class AppendScreen {
public:
  AppendScreen(const Design& design, std::span<const Index> base, const Eigen::VectorXd& beta,
               const SolverOptions& opts)
      : design_(design), ridge_(opts.ridge) {
    const auto n = static_cast<Eigen::Index>(design.n());
    const auto s = static_cast<Eigen::Index>(base.size()) + 1;
    a_.resize(n, s);
    a_.col(0).setOnes();
    for (Eigen::Index c = 1; c < s; ++c)
      a_.col(c) = design.z().col(static_cast<Eigen::Index>(base[static_cast<std::size_t>(c - 1)]));
    const Eigen::VectorXd eta = a_ * beta;
    const Eigen::VectorXd& y = design.y();
    residual_.resize(n);
    w_.resize(n);
    loss_ = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = sigmoid(eta(i));
      residual_(i) = mu - y(i);
      w_(i) = mu * (1.0 - mu);
      loss_ += log1pexp(eta(i)) - y(i) * eta(i);
    }
    const Eigen::VectorXd g0 = a_.transpose() * residual_;
    Eigen::MatrixXd h0 = a_.transpose() * (a_.array().colwise() * w_.array()).matrix();
    h0.diagonal().array() += ridge_;
    llt_.compute(h0);
    ok_ = llt_.info() == Eigen::Success;
    if (ok_) {
      u_ = llt_.solve(g0);
      base_decrement_ = g0.dot(u_);
      base_grad_sq_ = g0.squaredNorm();
    }
  }

  [[nodiscard]] bool usable() const noexcept { return ok_; }
  [[nodiscard]] double loss() const noexcept { return loss_; }

  /// True when newton_fit on base + {l} would stop at its first screening test.
  [[nodiscard]] bool rejects(Index l, double bar, double tol_grad) const {
    const auto zl = design_.z().col(static_cast<Eigen::Index>(l));
    const double gl = zl.dot(residual_);
    if (base_grad_sq_ + gl * gl <= tol_grad * tol_grad) return true;  // converged at a loss >= bar
    const Eigen::VectorXd wz = (zl.array() * w_.array()).matrix();
    const Eigen::VectorXd h = a_.transpose() * wz;
    const double c = zl.dot(wz) + ridge_;
    const Eigen::VectorXd v = llt_.solve(h);
    const double schur = c - h.dot(v);
    if (!(schur > 0.0)) return false;
    const double r = gl - h.dot(u_);
    const double decrement = base_decrement_ + r * r / schur;
    return loss_ - 2.0 * decrement >= bar;
  }

private:
  const Design& design_;
  double ridge_;
  Eigen::MatrixXd a_;
  Eigen::VectorXd residual_, w_, u_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double loss_ = 0.0, base_decrement_ = 0.0, base_grad_sq_ = 0.0;
  bool ok_ = false;
};

/// Greedy forward + swap search state. supports()[k] is the search result
/// for support size bound k.
class L0Path {
public:
  L0Path(const Design& design, const SolverOptions& opts)
      : design_(design), opts_(opts),
        tau_(opts.tol_swap * design.null_loss()),
        in_support_(design.p(), false) {
    current_ = newton_fit(design_, {}, Eigen::VectorXd::Zero(1), opts_);
    history_.push_back({});
  }

  void extend_to(std::size_t k_max) {
    while (history_.size() <= k_max) {
      if (!stalled_ && !design_.single_class() && add_best_feature()) swap_search();
      else stalled_ = true;
      auto sorted = order_;
      std::sort(sorted.begin(), sorted.end());
      history_.push_back(std::move(sorted));
    }
  }

  [[nodiscard]] const std::vector<std::vector<Index>>& supports() const noexcept { return history_; }

private:
  bool acceptable(const FitOutcome& f, double bar) const {
    return !f.screened_out && f.loss < bar;
  }

  std::optional<double> screen_bar(double bar) const {
    if (!opts_.screen_candidates) return std::nullopt;
    return bar;
  }

  bool add_best_feature() {
    const double bar = current_.loss - tau_;
    if (bar <= 0.0) return false;
    std::optional<FitOutcome> best;
    Index best_feature = 0;
    std::vector<Index> trial = order_;
    trial.push_back(0);
    Eigen::VectorXd warm(current_.beta.size() + 1);
    warm.head(current_.beta.size()) = current_.beta;
    warm(warm.size() - 1) = 0.0;
    std::optional<AppendScreen> screen;
    if (opts_.screen_candidates) screen.emplace(design_, order_, current_.beta, opts_);
    for (Index l = 0; l < design_.p(); ++l) {
      if (in_support_[l] || design_.constant(l)) continue;
      const double limit = best ? std::min(bar, best->loss) : bar;
      if (screen && screen->usable() && screen->rejects(l, limit, opts_.tol_grad)) continue;
      trial.back() = l;
      auto fit = newton_fit(design_, trial, warm, opts_, screen_bar(limit));
      if (acceptable(fit, limit)) {
        best = std::move(fit);
        best_feature = l;
      }
    }
    if (!best) return false;
    order_.push_back(best_feature);
    in_support_[best_feature] = true;
    current_ = std::move(*best);
    return true;
  }

  void swap_search() {
    for (;;) {
      const double bar = current_.loss - tau_;
      if (bar <= 0.0) return;
      std::optional<FitOutcome> best;
      std::size_t best_slot = 0;
      Index best_in = 0;
      std::vector<std::size_t> slots(order_.size());
      std::iota(slots.begin(), slots.end(), std::size_t{0});
      std::sort(slots.begin(), slots.end(),
                [&](std::size_t a, std::size_t b) { return order_[a] < order_[b]; });
      const auto s = static_cast<Eigen::Index>(order_.size());
      for (std::size_t slot : slots) {
        // refit without `slot`, then try each incoming feature appended last
        std::vector<Index> trial;
        trial.reserve(order_.size());
        Eigen::VectorXd warm(s);
        warm(0) = current_.beta(0);
        Eigen::Index w = 1;
        for (std::size_t a = 0; a < order_.size(); ++a) {
          if (a == slot) continue;
          trial.push_back(order_[a]);
          warm(w++) = current_.beta(static_cast<Eigen::Index>(a) + 1);
        }
        const auto dropped = newton_fit(design_, trial, std::move(warm), opts_);
        std::optional<AppendScreen> screen;
        if (opts_.screen_candidates) screen.emplace(design_, trial, dropped.beta, opts_);
        Eigen::VectorXd start(s + 1);
        start.head(s) = dropped.beta;
        start(s) = 0.0;
        trial.push_back(0);
        for (Index l = 0; l < design_.p(); ++l) {
          if (in_support_[l] || design_.constant(l)) continue;
          const double limit = best ? std::min(bar, best->loss) : bar;
          if (screen && screen->usable() && screen->rejects(l, limit, opts_.tol_grad)) continue;
          trial.back() = l;
          auto fit = newton_fit(design_, trial, start, opts_, screen_bar(limit));
          if (acceptable(fit, limit)) {
            best = std::move(fit);
            best_slot = slot;
            best_in = l;
          }
        }
      }
      if (!best) return;
      in_support_[order_[best_slot]] = false;
      order_.erase(order_.begin() + static_cast<std::ptrdiff_t>(best_slot));
      order_.push_back(best_in);
      in_support_[best_in] = true;
      current_ = std::move(*best);
    }
  }

  const Design& design_;
  SolverOptions opts_;
  double tau_;
  std::vector<bool> in_support_;
  std::vector<Index> order_;  // current support, aligned with current_.beta
  FitOutcome current_;
  bool stalled_ = false;
  std::vector<std::vector<Index>> history_;
};

}  // namespace detail

/// Maximum-likelihood logistic regression restricted to `support`.
[[nodiscard]] inline SparseModel fit_logistic(const Dataset& data, const FeatureSet& support,
                                              const SolverOptions& opts = {}) {
  const detail::Design design(data);
  return detail::fit_on_design(design, support, opts);
}

/// Search results for every support bound 0..k_max; element k equals
/// fit_l0(data, k). Each step adds the best single feature to the previous
/// solution, then swaps features until no single swap improves the loss by
/// more than tol_swap times the null-model loss, so the loss never increases
/// with k.
[[nodiscard]] inline std::vector<SparseModel> fit_l0_path(const Dataset& data, std::size_t k_max,
                                                          const SolverOptions& opts = {}) {
  const detail::Design design(data);
  if (k_max > std::min(design.p(), design.n() < 2 ? 0 : design.n() - 2))
    throw InvalidArgument("fit_l0: support too large (k must be <= min(p, n - 2))");
  detail::L0Path path(design, opts);
  path.extend_to(k_max);
  std::vector<SparseModel> models;
  models.reserve(k_max + 1);
  for (std::size_t k = 0; k <= k_max; ++k) {
    const auto& support = path.supports()[k];
    if (k > 0 && support == path.supports()[k - 1]) {
      models.push_back(models.back());
      continue;
    }
    models.push_back(detail::fit_on_design(design, FeatureSet(support), opts));
  }
  return models;
}

/// Best-subset logistic regression with at most k features (heuristic search).
[[nodiscard]] inline SparseModel fit_l0(const Dataset& data, std::size_t k,
                                        const SolverOptions& opts = {}) {
  return fit_l0_path(data, k, opts).back();
}

namespace detail {

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace detail

/// Exact best subset of size <= k by enumeration; ties go to the
/// lexicographically smallest support.
[[nodiscard]] inline SparseModel fit_l0_exhaustive(const Dataset& data, std::size_t k,
                                                   const SolverOptions& opts = {},
                                                   double budget = 1e6) {
  const detail::Design design(data);
  const std::size_t p = design.p();
  if (k > std::min(p, design.n() < 2 ? 0 : design.n() - 2))
    throw InvalidArgument("fit_l0_exhaustive: support too large (k must be <= min(p, n - 2))");
  double total = 0.0;
  for (std::size_t s = 0; s <= k; ++s) total += detail::binomial(p, s);
  if (total > budget) throw InvalidArgument("fit_l0_exhaustive: combinatorial budget exceeded");

  std::optional<std::pair<double, std::vector<Index>>> best;
  std::vector<Index> combo;
  auto consider = [&] {
    const auto fit = detail::cold_fit(design, combo, opts);
    if (!best || fit.loss < best->first || (fit.loss == best->first && combo < best->second))
      best = std::make_pair(fit.loss, combo);
  };
  for (std::size_t s = 0; s <= k; ++s) {
    combo.resize(s);
    std::iota(combo.begin(), combo.end(), Index{0});
    for (;;) {
      consider();
      // next combination in lexicographic order
      std::size_t i = s;
      while (i > 0 && combo[i - 1] == p - s + i - 1) --i;
      if (i == 0) break;
      ++combo[i - 1];
      for (std::size_t j = i; j < s; ++j) combo[j] = combo[j - 1] + 1;
    }
  }
  return detail::fit_on_design(design, FeatureSet(best->second), opts);
}

/// Linear predictor of one row (length p).
[[nodiscard]] inline double linear_predictor(const SparseModel& model,
                                             const Eigen::Ref<const Eigen::VectorXd>& x_row) {
  double eta = model.intercept;
  for (std::size_t a = 0; a < model.support.size(); ++a)
    eta += model.coefficients[a] * x_row(static_cast<Eigen::Index>(model.support[a]));
  return eta;
}

/// 1 when the linear predictor is >= 0 (probability >= 0.5), else 0.
[[nodiscard]] inline int predict_class(const SparseModel& model,
                                       const Eigen::Ref<const Eigen::VectorXd>& x_row) {
  return linear_predictor(model, x_row) >= 0.0 ? 1 : 0;
}

[[nodiscard]] inline std::size_t correct_predictions(const SparseModel& model, const Dataset& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Eigen::VectorXd row = data.x.row(static_cast<Eigen::Index>(i)).transpose();
    if (predict_class(model, row) == data.y[i]) ++correct;
  }
  return correct;
}

[[nodiscard]] inline double accuracy(const SparseModel& model, const Dataset& data) {
  if (data.n() == 0) throw InvalidArgument("accuracy: empty dataset");
  return static_cast<double>(correct_predictions(model, data)) / static_cast<double>(data.n());
}

/// Negative log-likelihood of a model on a dataset (original scale).
[[nodiscard]] inline double logistic_loss(const SparseModel& model, const Dataset& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Eigen::VectorXd row = data.x.row(static_cast<Eigen::Index>(i)).transpose();
    const double eta = linear_predictor(model, row);
    total += detail::log1pexp(eta) - data.y[i] * eta;
  }
  return total;
}

}  // namespace stabtune

#endif  // STABTUNE_LOGREG_HPP
