#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dymon/adam.hpp"
#include "dymon/errors.hpp"
#include "dymon/matrix.hpp"
#include "dymon/mlp.hpp"
#include "dymon/mmd.hpp"
#include "dymon/model.hpp"
#include "dymon/transitions.hpp"

namespace dymon {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_groups = 32;   // source groups per minibatch
  std::size_t m_generated = 0;     // samples per group; 0 = max(32, |Y_x|)
  double corruption_std = 0.05;    // input corruption, standardized units
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  BandwidthSet bandwidths = BandwidthSet::multiscale_default();
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw config_error("TrainConfig: epochs must be >= 1");
    if (batch_groups < 1)
      throw config_error("TrainConfig: batch_groups must be >= 1");
    if (m_generated == 1)
      throw config_error("TrainConfig: m_generated must be >= 2");
    if (corruption_std < 0.0)
      throw config_error("TrainConfig: corruption_std must be >= 0");
    bandwidths.validate();
  }
};

struct ArchSpec {
  Architecture arch = Architecture::ambient;
  std::vector<std::size_t> transition_hidden;  // e.g. {64, 64, 64}
  std::vector<std::size_t> encoder_hidden;     // arch 2/3; decoder mirrors it
  std::size_t latent_dim = 0;                  // arch 2/3 bottleneck width
  std::size_t noise_dim = static_cast<std::size_t>(-1);  // default: state_dim
};

struct LossCurve {
  std::vector<double> mean_mmd2;      // per epoch
  std::vector<double> epoch_seconds;
  std::size_t skipped_empty_groups = 0;
};

namespace detail {

// MMD^2 between targets (fixed) and generated samples together with the
// gradient w.r.t. the generated rows, sharing one exp() per pair/bandwidth.
// mean_kxx is the target-target term, constant across training and cached
// by the caller.
inline double mmd2_loss_and_grad(const Matrix& targets, const Matrix& gen,
                                 const BandwidthSet& bw, double mean_kxx,
                                 Matrix& grad_out) {
  const std::size_t n = targets.rows(), m = gen.rows(), d = gen.cols();
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  grad_out = Matrix(m, d);
  double syy = 0.0, sxy = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double* yj = gen.row(j);
    double* gj = grad_out.row(j);
    for (std::size_t j2 = 0; j2 < m; ++j2) {
      const double* y2 = gen.row(j2);
      const double sq = sq_dist(yj, y2, d);
      double kv = 0.0, kc = 0.0;
      for (double sigma : bw.bandwidths) {
        const double a = sq / sigma;
        if (a > 45.0) continue;  // exp underflows past any relevant scale
        const double e = std::exp(-a);
        kv += e;
        kc += -2.0 / sigma * e;
      }
      syy += kv;
      const double c = 2.0 / (mm * mm) * kc;
      for (std::size_t kdim = 0; kdim < d; ++kdim)
        gj[kdim] += c * (yj[kdim] - y2[kdim]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = targets.row(i);
      const double sq = sq_dist(yj, xi, d);
      double kv = 0.0, kc = 0.0;
      for (double sigma : bw.bandwidths) {
        const double a = sq / sigma;
        if (a > 45.0) continue;
        const double e = std::exp(-a);
        kv += e;
        kc += -2.0 / sigma * e;
      }
      sxy += kv;
      const double c = -2.0 / (nn * mm) * kc;
      for (std::size_t kdim = 0; kdim < d; ++kdim)
        gj[kdim] += c * (yj[kdim] - xi[kdim]);
    }
  }
  return mean_kxx + syy / (mm * mm) - 2.0 * sxy / (nn * mm);
}

inline double mean_self_kernel(const Matrix& x, const BandwidthSet& bw) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.rows(); ++j) {
      const double sq = sq_dist(x.row(i), x.row(j), x.cols());
      for (double sigma : bw.bandwidths) {
        const double a = sq / sigma;
        if (a <= 45.0) s += std::exp(-a);
      }
    }
  const double n = static_cast<double>(x.rows());
  return s / (n * n);
}

}  // namespace detail

// Evenly subsample source groups to at most max_groups (0 = keep all).
inline TransitionDataset subsample_groups(const TransitionDataset& ds,
                                          std::size_t max_groups) {
  if (max_groups == 0 || ds.groups.size() <= max_groups) return ds;
  TransitionDataset out;
  out.order = ds.order;
  out.state_dim = ds.state_dim;
  out.provenance = ds.provenance + ":subsampled";
  for (std::size_t i = 0; i < max_groups; ++i) {
    const std::size_t idx = i * ds.groups.size() / max_groups;
    out.groups.push_back(ds.groups[idx]);
  }
  return out;
}

inline std::pair<DymonModel, LossCurve> train_dymon(
    const TransitionDataset& dataset, const ArchSpec& spec,
    const TrainConfig& config) {
  config.validate();
  dataset.validate();
  if (dataset.groups.empty()) throw config_error("train_dymon: empty dataset");
  const std::size_t d = dataset.state_dim;
  const std::size_t order = dataset.order;

  DymonModel model;
  model.arch = spec.arch;
  model.order = order;
  model.state_dim = d;
  model.rng_seed = config.seed;
  const bool has_ae = spec.arch != Architecture::ambient;
  std::size_t latent = d;
  if (has_ae) {
    if (spec.latent_dim < 1)
      throw config_error("train_dymon: architectures 2/3 need latent_dim");
    latent = spec.latent_dim;
  }
  model.noise_dim = spec.noise_dim == static_cast<std::size_t>(-1)
                        ? latent
                        : spec.noise_dim;

  // standardizer fit on all states seen in the dataset
  {
    std::size_t rows = 0;
    for (const auto& g : dataset.groups)
      rows += g.history.rows() + g.targets.rows();
    Matrix all(rows, d);
    std::size_t r = 0;
    for (const auto& g : dataset.groups) {
      for (std::size_t i = 0; i < g.history.rows(); ++i, ++r)
        for (std::size_t k = 0; k < d; ++k) all(r, k) = g.history(i, k);
      for (std::size_t i = 0; i < g.targets.rows(); ++i, ++r)
        for (std::size_t k = 0; k < d; ++k) all(r, k) = g.targets(i, k);
    }
    model.standardizer = Standardizer::fit(all);
  }

  Rng rng(config.seed);
  std::vector<std::size_t> trans_sizes{order * latent + model.noise_dim};
  trans_sizes.insert(trans_sizes.end(), spec.transition_hidden.begin(),
                     spec.transition_hidden.end());
  trans_sizes.push_back(latent);
  model.transition_net = mlp_init(trans_sizes, rng);
  if (has_ae) {
    std::vector<std::size_t> enc{d};
    enc.insert(enc.end(), spec.encoder_hidden.begin(),
               spec.encoder_hidden.end());
    enc.push_back(latent);
    std::vector<std::size_t> dec(enc.rbegin(), enc.rend());
    model.encoder = mlp_init(enc, rng);
    model.decoder = mlp_init(dec, rng);
  }
  model.validate();

  AdamState adam_trans = AdamState::init(model.transition_net,
                                         config.learning_rate, config.beta1,
                                         config.beta2, config.epsilon);
  AdamState adam_enc, adam_dec;
  if (has_ae) {
    adam_enc = AdamState::init(*model.encoder, config.learning_rate,
                               config.beta1, config.beta2, config.epsilon);
    adam_dec = AdamState::init(*model.decoder, config.learning_rate,
                               config.beta1, config.beta2, config.epsilon);
  }

  // Precompute standardized groups and their constant target-target MMD term.
  struct PreparedGroup {
    Matrix hist_std;     // order x d
    Matrix targets_std;  // k x d
    double mean_kxx;
    std::size_t m;       // generated samples per update
  };
  std::vector<PreparedGroup> prepared;
  prepared.reserve(dataset.groups.size());
  std::size_t skipped_empty = 0;
  for (const auto& g : dataset.groups) {
    if (g.targets.rows() == 0) {
      ++skipped_empty;
      continue;
    }
    PreparedGroup pg;
    pg.hist_std = model.standardizer.standardize(g.history);
    pg.targets_std = model.standardizer.standardize(g.targets);
    pg.mean_kxx = detail::mean_self_kernel(pg.targets_std, config.bandwidths);
    pg.m = config.m_generated > 0
               ? config.m_generated
               : std::max<std::size_t>(32, g.targets.rows());
    prepared.push_back(std::move(pg));
  }
  if (prepared.empty())
    throw config_error("train_dymon: every group had an empty target set");

  LossCurve curve;
  std::vector<std::size_t> idx(prepared.size());
  std::iota(idx.begin(), idx.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // deterministic shuffle
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    double epoch_loss = 0.0;
    std::size_t epoch_groups = 0;
    for (std::size_t start = 0; start < idx.size();
         start += config.batch_groups) {
      const std::size_t end =
          std::min(start + config.batch_groups, idx.size());
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      Params g_trans = zeros_like(model.transition_net);
      Params g_enc, g_dec;
      if (has_ae) {
        g_enc = zeros_like(*model.encoder);
        g_dec = zeros_like(*model.decoder);
      }
      double batch_loss = 0.0;
      for (std::size_t bi = start; bi < end; ++bi) {
        const PreparedGroup& pg = prepared[idx[bi]];
        const std::size_t m = pg.m;

        // encode the (uncorrupted) history for architectures 2/3
        ForwardCache enc_cache;
        Matrix latent_hist =
            has_ae ? mlp_forward(*model.encoder, pg.hist_std, &enc_cache)
                   : pg.hist_std;

        // m transition inputs: corrupted latent history + fresh noise draw
        Matrix in(m, order * latent + model.noise_dim);
        for (std::size_t j = 0; j < m; ++j) {
          double* row = in.row(j);
          for (std::size_t h = 0; h < order; ++h)
            for (std::size_t k = 0; k < latent; ++k)
              row[h * latent + k] =
                  latent_hist(h, k) + config.corruption_std * rng.normal();
          for (std::size_t k = 0; k < model.noise_dim; ++k)
            row[order * latent + k] = rng.normal();
        }
        ForwardCache trans_cache;
        Matrix velocity = mlp_forward(model.transition_net, in, &trans_cache);
        // residual from the corrupted most recent input state
        Matrix gen_latent(m, latent);
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t k = 0; k < latent; ++k)
            gen_latent(j, k) =
                in(j, (order - 1) * latent + k) + velocity(j, k);

        ForwardCache dec_cache;
        Matrix gen_std = has_ae ? mlp_forward(*model.decoder, gen_latent,
                                              &dec_cache)
                                : gen_latent;

        Matrix grad_gen;
        const double loss = detail::mmd2_loss_and_grad(
            pg.targets_std, gen_std, config.bandwidths, pg.mean_kxx,
            grad_gen);
        if (!std::isfinite(loss))
          throw numeric_error("train_dymon: non-finite loss at epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(start / config.batch_groups));
        batch_loss += loss;

        Matrix grad_latent;  // gradient w.r.t. generated latent rows
        if (has_ae) {
          Gradients dg = mlp_backward(*model.decoder, dec_cache, grad_gen);
          accumulate(g_dec, dg.params, inv_batch);
          grad_latent = std::move(dg.input);
        } else {
          grad_latent = grad_gen;
        }
        Gradients tg =
            mlp_backward(model.transition_net, trans_cache, grad_latent);
        accumulate(g_trans, tg.params, inv_batch);

        if (has_ae) {
          // gradient w.r.t. the encoded history: transition-input slices
          // summed over the m rows, plus the residual identity path
          Matrix g_hist(order, latent);
          for (std::size_t j = 0; j < m; ++j) {
            const double* gin = tg.input.row(j);
            for (std::size_t h = 0; h < order; ++h)
              for (std::size_t k = 0; k < latent; ++k)
                g_hist(h, k) += gin[h * latent + k];
            for (std::size_t k = 0; k < latent; ++k)
              g_hist(order - 1, k) += grad_latent(j, k);
          }
          Gradients eg = mlp_backward(*model.encoder, enc_cache, g_hist);
          accumulate(g_enc, eg.params, inv_batch);

          // autoencoder reconstruction term on the group's states
          const std::size_t rows = pg.hist_std.rows() + pg.targets_std.rows();
          Matrix states(rows, d);
          std::size_t r = 0;
          for (std::size_t i = 0; i < pg.hist_std.rows(); ++i, ++r)
            for (std::size_t k = 0; k < d; ++k)
              states(r, k) = pg.hist_std(i, k);
          for (std::size_t i = 0; i < pg.targets_std.rows(); ++i, ++r)
            for (std::size_t k = 0; k < d; ++k)
              states(r, k) = pg.targets_std(i, k);
          ForwardCache rec_enc_cache, rec_dec_cache;
          Matrix z = mlp_forward(*model.encoder, states, &rec_enc_cache);
          Matrix xhat = mlp_forward(*model.decoder, z, &rec_dec_cache);
          Matrix g_rec(rows, d);
          const double norm = 2.0 / static_cast<double>(rows * d);
          for (std::size_t i = 0; i < xhat.size(); ++i)
            g_rec.data()[i] = norm * (xhat.data()[i] - states.data()[i]);
          Gradients rdg = mlp_backward(*model.decoder, rec_dec_cache, g_rec);
          accumulate(g_dec, rdg.params, inv_batch);
          Gradients reg =
              mlp_backward(*model.encoder, rec_enc_cache, rdg.input);
          accumulate(g_enc, reg.params, inv_batch);
        }
      }
      adam_step(adam_trans, model.transition_net, g_trans);
      if (has_ae) {
        adam_step(adam_enc, *model.encoder, g_enc);
        adam_step(adam_dec, *model.decoder, g_dec);
      }
      epoch_loss += batch_loss;
      epoch_groups += end - start;
    }
    const auto t1 = std::chrono::steady_clock::now();
    curve.mean_mmd2.push_back(epoch_loss /
                              static_cast<double>(epoch_groups));
    curve.epoch_seconds.push_back(
        std::chrono::duration<double>(t1 - t0).count());
  }
  curve.skipped_empty_groups = skipped_empty;
  return {std::move(model), std::move(curve)};
}

}  // namespace dymon
