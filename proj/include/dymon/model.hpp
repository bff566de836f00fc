#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dymon/errors.hpp"
#include "dymon/matrix.hpp"
#include "dymon/mlp.hpp"
#include "dymon/systems.hpp"

namespace dymon {

enum class Architecture : int {
  ambient = 1,          // transition in ambient space
  latent = 2,           // transition in autoencoder latent space
  latent_denoised = 3,  // latent, plus encode/decode of each generated state
};

// Per-dimension z-scoring statistics, stored with the model.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& data) {
    Standardizer s;
    const std::size_t n = data.rows(), d = data.cols();
    if (n == 0) throw config_error("Standardizer: empty data");
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += data(i, j);
    for (double& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = data(i, j) - s.mean[j];
        s.scale[j] += c * c;
      }
    for (double& v : s.scale) {
      v = std::sqrt(v / static_cast<double>(n));
      if (v < 1e-12) v = 1.0;  // constant dimension
    }
    return s;
  }

  static Standardizer identity(std::size_t d) {
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    return s;
  }

  Matrix standardize(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j)
        out(i, j) = (x(i, j) - mean[j]) / scale[j];
    return out;
  }

  Matrix destandardize(const Matrix& z) const {
    Matrix out(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j)
        out(i, j) = z(i, j) * scale[j] + mean[j];
    return out;
  }
};

struct DymonModel {
  Architecture arch = Architecture::ambient;
  std::size_t order = 1;
  std::size_t state_dim = 0;
  std::size_t noise_dim = 0;  // 0 = deterministic
  Params transition_net;
  std::optional<Params> encoder;
  std::optional<Params> decoder;
  Standardizer standardizer;
  std::uint64_t rng_seed = 0;

  bool deterministic() const { return noise_dim == 0; }
  bool has_autoencoder() const { return arch != Architecture::ambient; }

  // width of the space the transition network operates in
  std::size_t effective_dim() const {
    return has_autoencoder() ? encoder->output_dim() : state_dim;
  }

  void validate() const {
    if (has_autoencoder() != (encoder.has_value() && decoder.has_value()))
      throw config_error(
          "DymonModel: encoder/decoder required exactly for architectures 2/3");
    const std::size_t e = effective_dim();
    if (transition_net.input_dim() != order * e + noise_dim)
      throw config_error("DymonModel: transition input width must be "
                         "order*effective_dim + noise_dim");
    if (transition_net.output_dim() != e)
      throw config_error("DymonModel: transition output width must equal "
                         "effective_dim");
    if (has_autoencoder()) {
      if (encoder->input_dim() != state_dim ||
          decoder->output_dim() != state_dim ||
          decoder->input_dim() != encoder->output_dim())
        throw config_error("DymonModel: autoencoder shapes inconsistent");
    }
  }
};

namespace detail {

// Concatenate rows of m (order x e) and eps into one network input row.
inline Matrix pack_transition_input(const Matrix& hist, const double* eps,
                                    std::size_t noise_dim) {
  const std::size_t e = hist.cols();
  Matrix in(1, hist.rows() * e + noise_dim);
  for (std::size_t h = 0; h < hist.rows(); ++h)
    for (std::size_t k = 0; k < e; ++k) in(0, h * e + k) = hist(h, k);
  for (std::size_t k = 0; k < noise_dim; ++k)
    in(0, hist.rows() * e + k) = eps ? eps[k] : 0.0;
  return in;
}

}  // namespace detail

// One transition: maps the last `order` states (most recent last) plus a
// noise draw to the next state, in original units.
inline std::vector<double> dymon_forward(const DymonModel& model,
                                         const Matrix& history,
                                         const std::vector<double>& eps) {
  model.validate();
  if (history.rows() != model.order || history.cols() != model.state_dim)
    throw dimension_error("dymon_forward: history must be order x state_dim");
  if (eps.size() != model.noise_dim)
    throw dimension_error("dymon_forward: eps length must equal noise_dim");
  const Matrix hist_std = model.standardizer.standardize(history);
  Matrix latent_hist =
      model.has_autoencoder() ? mlp_forward(*model.encoder, hist_std) : hist_std;
  const Matrix in = detail::pack_transition_input(
      latent_hist, eps.empty() ? nullptr : eps.data(), model.noise_dim);
  const Matrix velocity = mlp_forward(model.transition_net, in);
  const std::size_t e = model.effective_dim();
  Matrix next(1, e);
  for (std::size_t k = 0; k < e; ++k)
    next(0, k) = latent_hist(model.order - 1, k) + velocity(0, k);
  if (model.has_autoencoder()) next = mlp_forward(*model.decoder, next);
  next = model.standardizer.destandardize(next);
  std::vector<double> out(model.state_dim);
  for (std::size_t k = 0; k < model.state_dim; ++k) out[k] = next(0, k);
  return out;
}

struct ChainResult {
  Trajectory trajectory;  // init history rows followed by generated states
  bool truncated = false; // true if a non-finite state cut the chain short
};

inline ChainResult generate_chain(const DymonModel& model,
                                  const Matrix& init_history,
                                  std::size_t steps, Rng& rng) {
  model.validate();
  if (steps < 1) throw config_error("generate_chain: steps must be >= 1");
  if (init_history.rows() != model.order ||
      init_history.cols() != model.state_dim)
    throw dimension_error("generate_chain: init history shape mismatch");
  const std::size_t d = model.state_dim;
  std::vector<std::vector<double>> states;
  states.reserve(model.order + steps);
  for (std::size_t h = 0; h < model.order; ++h) {
    std::vector<double> row(d);
    for (std::size_t k = 0; k < d; ++k) row[k] = init_history(h, k);
    states.push_back(std::move(row));
  }
  bool truncated = false;
  Matrix window = init_history;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<double> eps(model.noise_dim);
    for (double& v : eps) v = rng.normal();
    std::vector<double> next = dymon_forward(model, window, eps);
    if (model.arch == Architecture::latent_denoised) {
      // encode/decode round trip keeps generated states on the learned manifold
      Matrix row(1, d, next);
      Matrix z = model.standardizer.standardize(row);
      z = mlp_forward(*model.decoder, mlp_forward(*model.encoder, z));
      z = model.standardizer.destandardize(z);
      for (std::size_t k = 0; k < d; ++k) next[k] = z(0, k);
    }
    bool finite = true;
    for (double v : next)
      if (!std::isfinite(v)) finite = false;
    if (!finite) {
      truncated = true;
      break;
    }
    // shift the history window
    for (std::size_t h = 0; h + 1 < model.order; ++h)
      for (std::size_t k = 0; k < d; ++k) window(h, k) = window(h + 1, k);
    for (std::size_t k = 0; k < d; ++k)
      window(model.order - 1, k) = next[k];
    states.push_back(std::move(next));
  }
  ChainResult res;
  res.trajectory.states = Matrix(states.size(), d);
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t k = 0; k < d; ++k)
      res.trajectory.states(i, k) = states[i][k];
  res.trajectory.dt = 0.0;
  res.trajectory.meta = truncated ? "dymon_chain:truncated" : "dymon_chain";
  res.truncated = truncated;
  return res;
}

// Jacobian of the transition velocity with respect to the most recent
// state, at eps = 0, in original units: J = d(next)/dx - I.
inline Matrix jacobian(const DymonModel& model, const Matrix& history) {
  model.validate();
  if (history.rows() != model.order || history.cols() != model.state_dim)
    throw dimension_error("jacobian: history must be order x state_dim");
  const std::size_t d = model.state_dim;
  const std::size_t e = model.effective_dim();
  const Matrix hist_std = model.standardizer.standardize(history);

  ForwardCache enc_cache, trans_cache, dec_cache;
  Matrix latent_hist = model.has_autoencoder()
                           ? mlp_forward(*model.encoder, hist_std, &enc_cache)
                           : hist_std;
  const Matrix in =
      detail::pack_transition_input(latent_hist, nullptr, model.noise_dim);
  const Matrix velocity = mlp_forward(model.transition_net, in, &trans_cache);
  Matrix next_latent(1, e);
  for (std::size_t k = 0; k < e; ++k)
    next_latent(0, k) = latent_hist(model.order - 1, k) + velocity(0, k);
  if (model.has_autoencoder())
    mlp_forward(*model.decoder, next_latent, &dec_cache);

  Matrix jac(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    // gradient of next_std[i] w.r.t. the latent next state
    Matrix g_latent(1, e);
    if (model.has_autoencoder()) {
      Matrix seed(1, d);
      seed(0, i) = 1.0;
      g_latent = mlp_backward(*model.decoder, dec_cache, seed).input;
    } else {
      g_latent(0, i) = 1.0;
    }
    // through the residual: z' = z_last + f(z_hist), so grad w.r.t. z_last
    // gets both the identity path and the transition-net path
    const Matrix g_in =
        mlp_backward(model.transition_net, trans_cache, g_latent).input;
    Matrix g_hist(model.order, e);  // grad w.r.t. latent history rows
    for (std::size_t h = 0; h < model.order; ++h)
      for (std::size_t k = 0; k < e; ++k) g_hist(h, k) = g_in(0, h * e + k);
    for (std::size_t k = 0; k < e; ++k)
      g_hist(model.order - 1, k) += g_latent(0, k);
    Matrix g_xstd;  // grad w.r.t. standardized most recent state
    if (model.has_autoencoder()) {
      g_xstd = mlp_backward(*model.encoder, enc_cache, g_hist).input;
    } else {
      g_xstd = g_hist;
    }
    for (std::size_t j = 0; j < d; ++j) {
      // unit conversion, then subtract the identity to get the velocity part
      const double dn_dx = model.standardizer.scale[i] *
                           g_xstd(model.order - 1, j) /
                           model.standardizer.scale[j];
      jac(i, j) = dn_dx - (i == j ? 1.0 : 0.0);
    }
  }
  return jac;
}

// --- checkpoint format -----------------------------------------------------

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_net(std::ostream& os, const std::string& name,
                      const Params& p) {
  os << name;
  for (std::size_t s : p.layer_sizes()) os << ' ' << s;
  os << '\n';
  for (const auto& l : p.layers) {
    for (std::size_t i = 0; i < l.weight.rows(); ++i) {
      for (std::size_t j = 0; j < l.weight.cols(); ++j) {
        if (j) os << ' ';
        os << fmt17(l.weight(i, j));
      }
      os << '\n';
    }
    for (std::size_t j = 0; j < l.bias.size(); ++j) {
      if (j) os << ' ';
      os << fmt17(l.bias[j]);
    }
    os << '\n';
  }
}

struct LineReader {
  std::string text;
  std::size_t pos = 0;

  // next line; throws with the byte offset on EOF
  std::string next() {
    if (pos >= text.size())
      throw parse_error("checkpoint: unexpected end of file at byte offset " +
                        std::to_string(pos));
    const std::size_t start = pos;
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos)
      throw parse_error("checkpoint: missing newline at byte offset " +
                        std::to_string(start));
    pos = nl + 1;
    return text.substr(start, nl - start);
  }

  std::size_t offset() const { return pos; }
};

inline std::vector<double> parse_doubles(const std::string& line,
                                         std::size_t expect,
                                         std::size_t offset) {
  std::istringstream iss(line);
  std::vector<double> vals;
  double v;
  while (iss >> v) vals.push_back(v);
  if (vals.size() != expect || !iss.eof())
    throw parse_error("checkpoint: expected " + std::to_string(expect) +
                      " numbers near byte offset " + std::to_string(offset));
  return vals;
}

inline Params read_net(LineReader& lr, const std::string& name) {
  const std::size_t at = lr.offset();
  std::istringstream iss(lr.next());
  std::string tag;
  iss >> tag;
  if (tag != name)
    throw parse_error("checkpoint: expected '" + name +
                      "' section near byte offset " + std::to_string(at));
  std::vector<std::size_t> sizes;
  std::size_t s;
  while (iss >> s) sizes.push_back(s);
  if (sizes.size() < 2)
    throw parse_error("checkpoint: bad layer sizes near byte offset " +
                      std::to_string(at));
  Params p;
  for (std::size_t li = 0; li + 1 < sizes.size(); ++li) {
    DenseLayer l;
    l.weight = Matrix(sizes[li], sizes[li + 1]);
    for (std::size_t i = 0; i < sizes[li]; ++i) {
      const std::size_t off = lr.offset();
      const auto row = parse_doubles(lr.next(), sizes[li + 1], off);
      for (std::size_t j = 0; j < sizes[li + 1]; ++j) l.weight(i, j) = row[j];
    }
    const std::size_t off = lr.offset();
    l.bias = parse_doubles(lr.next(), sizes[li + 1], off);
    p.layers.push_back(std::move(l));
  }
  return p;
}

}  // namespace detail

inline std::string serialize_model(const DymonModel& model) {
  model.validate();
  std::ostringstream os;
  os << "dymon-checkpoint v1\n";
  os << "arch " << static_cast<int>(model.arch) << '\n';
  os << "order " << model.order << '\n';
  os << "state_dim " << model.state_dim << '\n';
  os << "noise_dim " << model.noise_dim << '\n';
  os << "seed " << model.rng_seed << '\n';
  os << "standardizer_mean";
  for (double v : model.standardizer.mean) os << ' ' << detail::fmt17(v);
  os << "\nstandardizer_scale";
  for (double v : model.standardizer.scale) os << ' ' << detail::fmt17(v);
  os << '\n';
  detail::write_net(os, "transition", model.transition_net);
  if (model.has_autoencoder()) {
    detail::write_net(os, "encoder", *model.encoder);
    detail::write_net(os, "decoder", *model.decoder);
  }
  os << "end\n";
  return os.str();
}

inline DymonModel deserialize_model(const std::string& text) {
  detail::LineReader lr{text};
  if (lr.next() != "dymon-checkpoint v1")
    throw parse_error("checkpoint: unsupported version (expected "
                      "'dymon-checkpoint v1')");
  DymonModel model;
  auto scalar_line = [&](const std::string& key) -> std::string {
    const std::size_t at = lr.offset();
    std::istringstream iss(lr.next());
    std::string tag, value;
    iss >> tag >> value;
    if (tag != key || value.empty())
      throw parse_error("checkpoint: expected '" + key +
                        "' near byte offset " + std::to_string(at));
    return value;
  };
  const int arch = std::stoi(scalar_line("arch"));
  if (arch < 1 || arch > 3)
    throw parse_error("checkpoint: architecture must be 1, 2 or 3");
  model.arch = static_cast<Architecture>(arch);
  model.order = std::stoull(scalar_line("order"));
  model.state_dim = std::stoull(scalar_line("state_dim"));
  model.noise_dim = std::stoull(scalar_line("noise_dim"));
  model.rng_seed = std::stoull(scalar_line("seed"));
  auto vec_line = [&](const std::string& key) {
    const std::size_t at = lr.offset();
    std::string line = lr.next();
    if (line.rfind(key + " ", 0) != 0)
      throw parse_error("checkpoint: expected '" + key +
                        "' near byte offset " + std::to_string(at));
    return detail::parse_doubles(line.substr(key.size() + 1), model.state_dim,
                                 at);
  };
  model.standardizer.mean = vec_line("standardizer_mean");
  model.standardizer.scale = vec_line("standardizer_scale");
  model.transition_net = detail::read_net(lr, "transition");
  if (model.arch != Architecture::ambient) {
    model.encoder = detail::read_net(lr, "encoder");
    model.decoder = detail::read_net(lr, "decoder");
  }
  const std::size_t at = lr.offset();
  if (lr.next() != "end")
    throw parse_error("checkpoint: expected 'end' near byte offset " +
                      std::to_string(at));
  model.validate();
  return model;
}

inline void save_model(const DymonModel& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("save_model: cannot open " + path);
  f << serialize_model(model);
  if (!f) throw io_error("save_model: write failed for " + path);
}

inline DymonModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("load_model: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace dymon
