#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dymon/errors.hpp"
#include "dymon/matrix.hpp"
#include "dymon/mmd.hpp"

namespace dymon {

// Exact 1-D Wasserstein-1 between equal-size empirical distributions:
// mean absolute difference of sorted samples. Unequal sizes are resampled
// uniformly (seeded) down to the smaller count.
inline double emd_1d(std::vector<double> a, std::vector<double> b,
                     std::uint64_t seed = 0) {
  if (a.empty() || b.empty()) throw config_error("emd_1d: empty input");
  auto resample = [&](std::vector<double>& v, std::size_t n) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = v[rng.uniform_index(v.size())];
    v = std::move(out);
  };
  if (a.size() > b.size()) resample(a, b.size());
  if (b.size() > a.size()) resample(b, a.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double mse(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw dimension_error("mse: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a.data()[i] - b.data()[i];
    s += diff * diff;
  }
  return s / static_cast<double>(a.size());
}

// --- Gaussian HMM, Baum-Welch ----------------------------------------------

struct GaussianHmm {
  std::size_t n_states = 0;
  std::vector<double> pi;             // initial distribution
  Matrix transition;                  // n x n, rows sum to 1
  std::vector<double> emission_mean;  // per state
  std::vector<double> emission_std;
  std::vector<double> loglik_curve;   // per EM iteration

  void validate() const {
    double s = std::accumulate(pi.begin(), pi.end(), 0.0);
    if (std::fabs(s - 1.0) > 1e-9)
      throw config_error("GaussianHmm: pi must sum to 1");
    for (std::size_t i = 0; i < n_states; ++i) {
      double r = 0.0;
      for (std::size_t j = 0; j < n_states; ++j) r += transition(i, j);
      if (std::fabs(r - 1.0) > 1e-9)
        throw config_error("GaussianHmm: transition rows must sum to 1");
      if (emission_std[i] <= 0.0)
        throw config_error("GaussianHmm: emission stds must be > 0");
    }
  }
};

namespace detail {

inline double gauss_pdf(double x, double mean, double std) {
  const double z = (x - mean) / std;
  return std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * 3.14159265358979323846));
}

}  // namespace detail

inline GaussianHmm hmm_fit(const std::vector<double>& data,
                           std::size_t n_states, std::size_t n_iters,
                           std::uint64_t seed) {
  if (n_states < 1) throw config_error("hmm_fit: need n_states >= 1");
  if (data.size() < 10 * n_states)
    throw config_error("hmm_fit: chain too short for requested states");
  const std::size_t t_len = data.size(), k = n_states;
  Rng rng(seed);

  GaussianHmm hmm;
  hmm.n_states = k;
  hmm.pi.assign(k, 1.0 / static_cast<double>(k));
  hmm.transition = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      hmm.transition(i, j) =
          i == j ? 0.8 : 0.2 / static_cast<double>(std::max<std::size_t>(k - 1, 1));
  if (k == 1) hmm.transition(0, 0) = 1.0;
  // emission means from data quantiles
  std::vector<double> sorted = data;
  std::sort(sorted.begin(), sorted.end());
  double mean_all = 0.0, var_all = 0.0;
  for (double v : data) mean_all += v;
  mean_all /= static_cast<double>(t_len);
  for (double v : data) var_all += (v - mean_all) * (v - mean_all);
  var_all /= static_cast<double>(t_len);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t q = static_cast<std::size_t>(
        (i + 0.5) / static_cast<double>(k) * static_cast<double>(t_len));
    hmm.emission_mean.push_back(sorted[std::min(q, t_len - 1)]);
    hmm.emission_std.push_back(std::max(std::sqrt(var_all) / k, 1e-3));
  }

  Matrix alpha(t_len, k), beta(t_len, k), gamma(t_len, k), emis(t_len, k);
  std::vector<double> scale(t_len);
  for (std::size_t iter = 0; iter < n_iters; ++iter) {
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t i = 0; i < k; ++i)
        emis(t, i) = std::max(detail::gauss_pdf(data[t], hmm.emission_mean[i],
                                                hmm.emission_std[i]),
                              1e-300);
    // scaled forward pass
    double ll = 0.0;
    for (std::size_t i = 0; i < k; ++i) alpha(0, i) = hmm.pi[i] * emis(0, i);
    for (std::size_t t = 0; t < t_len; ++t) {
      if (t > 0)
        for (std::size_t j = 0; j < k; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < k; ++i)
            s += alpha(t - 1, i) * hmm.transition(i, j);
          alpha(t, j) = s * emis(t, j);
        }
      double c = 0.0;
      for (std::size_t i = 0; i < k; ++i) c += alpha(t, i);
      if (c <= 0.0) throw numeric_error("hmm_fit: forward pass underflow");
      scale[t] = c;
      for (std::size_t i = 0; i < k; ++i) alpha(t, i) /= c;
      ll += std::log(c);
    }
    hmm.loglik_curve.push_back(ll);
    // scaled backward pass
    for (std::size_t i = 0; i < k; ++i) beta(t_len - 1, i) = 1.0;
    for (std::size_t t = t_len - 1; t-- > 0;) {
      for (std::size_t i = 0; i < k; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j)
          s += hmm.transition(i, j) * emis(t + 1, j) * beta(t + 1, j);
        beta(t, i) = s / scale[t + 1];
      }
    }
    for (std::size_t t = 0; t < t_len; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        gamma(t, i) = alpha(t, i) * beta(t, i);
        s += gamma(t, i);
      }
      for (std::size_t i = 0; i < k; ++i) gamma(t, i) /= s;
    }
    // M-step
    Matrix xi_sum(k, k);
    for (std::size_t t = 0; t + 1 < t_len; ++t)
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
          xi_sum(i, j) += alpha(t, i) * hmm.transition(i, j) *
                          emis(t + 1, j) * beta(t + 1, j) / scale[t + 1];
    for (std::size_t i = 0; i < k; ++i) hmm.pi[i] = gamma(0, i);
    for (std::size_t i = 0; i < k; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < k; ++j) row += xi_sum(i, j);
      if (row > 0.0)
        for (std::size_t j = 0; j < k; ++j)
          hmm.transition(i, j) = xi_sum(i, j) / row;
    }
    for (std::size_t i = 0; i < k; ++i) {
      double mass = 0.0, mu = 0.0;
      for (std::size_t t = 0; t < t_len; ++t) {
        mass += gamma(t, i);
        mu += gamma(t, i) * data[t];
      }
      if (mass < 1e-8) {
        // dead state: restart it at a random data point
        hmm.emission_mean[i] = data[rng.uniform_index(t_len)];
        hmm.emission_std[i] = std::max(std::sqrt(var_all), 1e-3);
        continue;
      }
      mu /= mass;
      double var = 0.0;
      for (std::size_t t = 0; t < t_len; ++t)
        var += gamma(t, i) * (data[t] - mu) * (data[t] - mu);
      var /= mass;
      hmm.emission_mean[i] = mu;
      hmm.emission_std[i] = std::max(std::sqrt(var), 1e-3);
    }
  }
  hmm.validate();
  return hmm;
}

inline std::vector<double> hmm_sample(const GaussianHmm& hmm, std::size_t n,
                                      std::uint64_t seed) {
  hmm.validate();
  Rng rng(seed);
  auto draw_categorical = [&](const double* p, std::size_t k) {
    double u = rng.uniform();
    for (std::size_t i = 0; i < k; ++i) {
      if (u < p[i]) return i;
      u -= p[i];
    }
    return k - 1;
  };
  std::vector<double> out(n);
  std::size_t state = draw_categorical(hmm.pi.data(), hmm.n_states);
  for (std::size_t t = 0; t < n; ++t) {
    out[t] = hmm.emission_mean[state] + hmm.emission_std[state] * rng.normal();
    state = draw_categorical(hmm.transition.row(state), hmm.n_states);
  }
  return out;
}

// --- linear-Gaussian state space model, EM ---------------------------------

struct KalmanModel {
  Matrix a;        // latent transition (n x n)
  Matrix c;        // observation (p x n)
  Matrix q;        // process noise covariance
  Matrix r;        // observation noise covariance
  Matrix mu0;      // initial mean (n x 1)
  Matrix p0;       // initial covariance
  std::vector<double> loglik_curve;
  std::size_t psd_clamp_count = 0;
};

namespace detail {

inline Matrix add(const Matrix& a, const Matrix& b, double sb = 1.0) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += sb * b.data()[i];
  return c;
}

inline Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// symmetrize and keep the diagonal away from zero
inline void enforce_psd(Matrix& m, std::size_t* clamp_count) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = m(j, i) = avg;
    }
  for (std::size_t i = 0; i < m.rows(); ++i)
    if (m(i, i) < 1e-12) {
      m(i, i) = 1e-12;
      if (clamp_count) ++*clamp_count;
    }
}

// lower-triangular Cholesky with diagonal jitter fallback
inline Matrix cholesky(Matrix m) {
  const std::size_t n = m.rows();
  for (int attempt = 0; attempt < 4; ++attempt) {
    Matrix l(n, n);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = m(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
        if (i == j) {
          if (s <= 0.0) {
            ok = false;
            break;
          }
          l(i, i) = std::sqrt(s);
        } else {
          l(i, j) = s / l(j, j);
        }
      }
    }
    if (ok) return l;
    for (std::size_t i = 0; i < n; ++i) m(i, i) += 1e-10 * (attempt + 1) * 10;
  }
  throw numeric_error("cholesky: matrix not positive definite");
}

}  // namespace detail

inline KalmanModel kalman_fit_em(const Matrix& data, std::size_t latent_dim,
                                 std::size_t n_iters) {
  const std::size_t t_len = data.rows(), p = data.cols(), n = latent_dim;
  if (t_len < 20) throw config_error("kalman_fit_em: need at least 20 samples");
  if (n < 1) throw config_error("kalman_fit_em: latent_dim must be >= 1");

  KalmanModel km;
  km.a = detail::identity(n);
  for (std::size_t i = 0; i < n; ++i) km.a(i, i) = 0.9;
  km.c = Matrix(p, n);
  for (std::size_t i = 0; i < std::min(p, n); ++i) km.c(i, i) = 1.0;
  km.q = detail::identity(n);
  km.r = detail::identity(p);
  km.mu0 = Matrix(n, 1);
  km.p0 = detail::identity(n);

  for (std::size_t iter = 0; iter < n_iters; ++iter) {
    // E-step: Kalman filter
    std::vector<Matrix> mu_f(t_len), p_f(t_len), mu_pred(t_len), p_pred(t_len);
    double ll = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      if (t == 0) {
        mu_pred[t] = km.mu0;
        p_pred[t] = km.p0;
      } else {
        mu_pred[t] = matmul(km.a, mu_f[t - 1]);
        p_pred[t] = detail::add(
            matmul(matmul(km.a, p_f[t - 1]), transpose(km.a)), km.q);
      }
      Matrix y(p, 1);
      for (std::size_t i = 0; i < p; ++i) y(i, 0) = data(t, i);
      const Matrix innov = detail::add(y, matmul(km.c, mu_pred[t]), -1.0);
      const Matrix s = detail::add(
          matmul(matmul(km.c, p_pred[t]), transpose(km.c)), km.r);
      const Matrix s_inv = inverse(s);
      const Matrix gain = matmul(matmul(p_pred[t], transpose(km.c)), s_inv);
      mu_f[t] = detail::add(mu_pred[t], matmul(gain, innov));
      p_f[t] = matmul(detail::add(detail::identity(n),
                                  matmul(gain, km.c), -1.0),
                      p_pred[t]);
      // innovation log-likelihood; det via Cholesky
      const Matrix l = detail::cholesky(s);
      double logdet = 0.0;
      for (std::size_t i = 0; i < p; ++i) logdet += 2.0 * std::log(l(i, i));
      const double quad = matmul(matmul(transpose(innov), s_inv), innov)(0, 0);
      ll += -0.5 * (logdet + quad +
                    p * std::log(2.0 * 3.14159265358979323846));
    }
    km.loglik_curve.push_back(ll);
    // RTS smoother
    std::vector<Matrix> mu_s(t_len), p_s(t_len), j(t_len);
    mu_s[t_len - 1] = mu_f[t_len - 1];
    p_s[t_len - 1] = p_f[t_len - 1];
    for (std::size_t t = t_len - 1; t-- > 0;) {
      j[t] = matmul(matmul(p_f[t], transpose(km.a)), inverse(p_pred[t + 1]));
      mu_s[t] = detail::add(
          mu_f[t],
          matmul(j[t], detail::add(mu_s[t + 1], mu_pred[t + 1], -1.0)));
      p_s[t] = detail::add(
          p_f[t], matmul(matmul(j[t],
                                detail::add(p_s[t + 1], p_pred[t + 1], -1.0)),
                         transpose(j[t])));
    }
    // smoothed second moments
    std::vector<Matrix> e_xx(t_len), e_xprev(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
      e_xx[t] = detail::add(p_s[t], matmul(mu_s[t], transpose(mu_s[t])));
      if (t > 0)
        e_xprev[t] = detail::add(matmul(p_s[t], transpose(j[t - 1])),
                                 matmul(mu_s[t], transpose(mu_s[t - 1])));
    }
    // M-step
    Matrix sum_xx(n, n), sum_prev(n, n), sum_cross(n, n);
    for (std::size_t t = 1; t < t_len; ++t) {
      sum_cross = detail::add(sum_cross, e_xprev[t]);
      sum_prev = detail::add(sum_prev, e_xx[t - 1]);
      sum_xx = detail::add(sum_xx, e_xx[t]);
    }
    km.a = matmul(sum_cross, inverse(sum_prev));
    Matrix q_new = detail::add(
        sum_xx, matmul(km.a, transpose(sum_cross)), -1.0);
    for (std::size_t i = 0; i < q_new.size(); ++i)
      q_new.data()[i] /= static_cast<double>(t_len - 1);
    detail::enforce_psd(q_new, &km.psd_clamp_count);
    km.q = q_new;

    Matrix sum_yx(p, n), sum_xx_all(n, n), sum_yy(p, p);
    for (std::size_t t = 0; t < t_len; ++t) {
      Matrix y(p, 1);
      for (std::size_t i = 0; i < p; ++i) y(i, 0) = data(t, i);
      sum_yx = detail::add(sum_yx, matmul(y, transpose(mu_s[t])));
      sum_xx_all = detail::add(sum_xx_all, e_xx[t]);
      sum_yy = detail::add(sum_yy, matmul(y, transpose(y)));
    }
    km.c = matmul(sum_yx, inverse(sum_xx_all));
    Matrix r_new = detail::add(sum_yy, matmul(km.c, transpose(sum_yx)), -1.0);
    for (std::size_t i = 0; i < r_new.size(); ++i)
      r_new.data()[i] /= static_cast<double>(t_len);
    detail::enforce_psd(r_new, &km.psd_clamp_count);
    km.r = r_new;

    km.mu0 = mu_s[0];
    Matrix p0_new = p_s[0];
    detail::enforce_psd(p0_new, &km.psd_clamp_count);
    km.p0 = p0_new;
  }
  return km;
}

inline Matrix kalman_sample(const KalmanModel& km, std::size_t n_samples,
                            std::uint64_t seed) {
  const std::size_t n = km.a.rows(), p = km.c.rows();
  Rng rng(seed);
  auto draw = [&](const Matrix& mean, const Matrix& cov) {
    const Matrix l = detail::cholesky(cov);
    Matrix z(cov.rows(), 1);
    for (std::size_t i = 0; i < cov.rows(); ++i) z(i, 0) = rng.normal();
    return detail::add(mean, matmul(l, z));
  };
  Matrix out(n_samples, p);
  Matrix x = draw(km.mu0, km.p0);
  for (std::size_t t = 0; t < n_samples; ++t) {
    const Matrix y = draw(matmul(km.c, x), km.r);
    for (std::size_t i = 0; i < p; ++i) out(t, i) = y(i, 0);
    x = draw(matmul(km.a, x), km.q);
  }
  return out;
}

// --- latent cycle diagnostic ------------------------------------------------

struct CycleReport {
  bool is_single_cycle = false;
  std::vector<std::size_t> degree_histogram;  // index = degree
  double residual = 0.0;  // coefficient of variation of centroid distances
};

// Mutual 2-nearest-neighbor graph diagnostic for circle-shaped latents.
inline CycleReport latent_cycle_report(const Matrix& latent) {
  if (latent.rows() < 16)
    throw config_error("latent_cycle_report: need at least 16 points");
  const std::size_t n = latent.rows(), d = latent.cols();
  // 2NN index sets
  std::vector<std::array<std::size_t, 2>> nn(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best1 = 1e300, best2 = 1e300;
    std::size_t i1 = 0, i2 = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double sq = sq_dist(latent.row(i), latent.row(j), d);
      if (sq < best1) {
        best2 = best1;
        i2 = i1;
        best1 = sq;
        i1 = j;
      } else if (sq < best2) {
        best2 = sq;
        i2 = j;
      }
    }
    nn[i] = {i1, i2};
  }
  auto has = [&](std::size_t i, std::size_t j) {
    return nn[i][0] == j || nn[i][1] == j;
  };
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : nn[i])
      if (j > i && has(j, i)) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
  CycleReport rep;
  std::size_t max_deg = 0;
  for (const auto& a : adj) max_deg = std::max(max_deg, a.size());
  rep.degree_histogram.assign(max_deg + 1, 0);
  for (const auto& a : adj) ++rep.degree_histogram[a.size()];
  // connectivity
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        stack.push_back(v);
      }
  }
  bool all_deg2 = true;
  for (const auto& a : adj)
    if (a.size() != 2) all_deg2 = false;
  rep.is_single_cycle = all_deg2 && visited == n;
  // circularity residual
  std::vector<double> centroid(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) centroid[k] += latent(i, k);
  for (double& c : centroid) c /= static_cast<double>(n);
  std::vector<double> radii(n);
  double mean_r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = latent(i, k) - centroid[k];
      sq += diff * diff;
    }
    radii[i] = std::sqrt(sq);
    mean_r += radii[i];
  }
  mean_r /= static_cast<double>(n);
  double var_r = 0.0;
  for (double r : radii) var_r += (r - mean_r) * (r - mean_r);
  var_r /= static_cast<double>(n);
  rep.residual = mean_r > 0.0 ? std::sqrt(var_r) / mean_r : 0.0;
  return rep;
}

}  // namespace dymon
