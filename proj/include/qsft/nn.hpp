#pragma once

// Small dense networks in double precision with hand-written backprop.

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsft/common.hpp"

namespace qsft {

// Row-major batch of vectors.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

class NonFiniteGradient : public DivergenceError {
 public:
  explicit NonFiniteGradient(std::size_t layer)
      : DivergenceError("non-finite gradient in layer " + std::to_string(layer), 0), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

/// Fully connected ReLU network. Parameters live in one flat vector; layer l
/// stores its weights input-major (in x out) followed by out biases, so a
/// zero input coordinate skips a whole weight row.
class DenseNet {
 public:
  struct Cache {
    std::vector<Matrix> activations;  // input, post-ReLU hidden layers, logits
  };

  DenseNet() = default;

  DenseNet(std::vector<std::size_t> sizes, std::uint64_t seed) : sizes_(std::move(sizes)), seed_(seed) {
    require(sizes_.size() >= 2, "network needs an input and an output layer");
    for (std::size_t s : sizes_) require(s > 0, "layer sizes must be positive");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offset);
      offset += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    }
    params_.assign(offset, 0.0);
    Rng rng(splitmix64(seed));
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      double* w = params_.data() + offsets_[l];
      for (std::size_t i = 0; i < sizes_[l] * sizes_[l + 1]; ++i) w[i] = (2.0 * uniform01(rng) - 1.0) * bound;
    }
  }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t input_width() const { return sizes_.front(); }
  std::size_t output_width() const { return sizes_.back(); }
  std::uint64_t seed() const { return seed_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  void set_params(std::span<const double> values) {
    require(values.size() == params_.size(), "parameter count mismatch");
    std::copy(values.begin(), values.end(), params_.begin());
  }

  bool all_finite() const {
    for (double x : params_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  Matrix forward(const Matrix& x) const {
    Cache cache;
    forward(x, cache);
    return std::move(cache.activations.back());
  }

  const Matrix& forward(const Matrix& x, Cache& cache) const {
    if (x.cols != input_width())
      throw InvalidArgument("feature width " + std::to_string(x.cols) + " does not match network input " +
                            std::to_string(input_width()));
    cache.activations.resize(sizes_.size());
    cache.activations[0] = x;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      const Matrix& in = cache.activations[l];
      Matrix& out = cache.activations[l + 1];
      const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
      out = Matrix(in.rows, n_out);
      const double* w = params_.data() + offsets_[l];
      const double* b = w + n_in * n_out;
      for (std::size_t r = 0; r < in.rows; ++r) {
        double* z = out.data.data() + r * n_out;
        std::copy(b, b + n_out, z);
        const double* h = in.data.data() + r * n_in;
        for (std::size_t k = 0; k < n_in; ++k) {
          const double hk = h[k];
          if (hk == 0.0) continue;
          const double* wk = w + k * n_out;
          for (std::size_t j = 0; j < n_out; ++j) z[j] += hk * wk[j];
        }
        if (l + 1 < num_layers())
          for (std::size_t j = 0; j < n_out; ++j) z[j] = std::max(0.0, z[j]);
      }
    }
    return cache.activations.back();
  }

  /// Gradient of the loss with respect to all parameters, given dL/dlogits.
  std::vector<double> backward(const Cache& cache, const Matrix& dlogits) const {
    require(cache.activations.size() == sizes_.size(), "backward needs a forward cache");
    require(dlogits.rows == cache.activations.back().rows && dlogits.cols == output_width(),
            "logit gradient has wrong shape");
    std::vector<double> grad(params_.size(), 0.0);
    Matrix delta = dlogits;
    for (std::size_t l = num_layers(); l-- > 0;) {
      const Matrix& in = cache.activations[l];
      const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + n_in * n_out;
      const double* w = params_.data() + offsets_[l];
      Matrix below(l > 0 ? in.rows : 0, n_in);
      for (std::size_t r = 0; r < in.rows; ++r) {
        const double* d = delta.data.data() + r * n_out;
        const double* h = in.data.data() + r * n_in;
        for (std::size_t j = 0; j < n_out; ++j) gb[j] += d[j];
        for (std::size_t k = 0; k < n_in; ++k) {
          const double hk = h[k];
          if (hk != 0.0) {
            double* gwk = gw + k * n_out;
            for (std::size_t j = 0; j < n_out; ++j) gwk[j] += hk * d[j];
          }
          // ReLU derivative: zero where the activation was clamped.
          if (l > 0 && hk > 0.0) {
            const double* wk = w + k * n_out;
            double acc = 0.0;
            for (std::size_t j = 0; j < n_out; ++j) acc += wk[j] * d[j];
            below(r, k) = acc;
          }
        }
      }
      for (std::size_t i = 0; i < n_in * n_out + n_out; ++i)
        if (!std::isfinite(gw[i])) throw NonFiniteGradient(l);
      delta = std::move(below);
    }
    return grad;
  }

  std::vector<double> logits_row(std::span<const double> features) const {
    Matrix x(1, features.size());
    std::copy(features.begin(), features.end(), x.data.begin());
    return forward(x).data;
  }

  friend bool operator==(const DenseNet&, const DenseNet&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::uint64_t seed_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

inline void softmax_inplace(std::span<double> row) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : row) top = std::max(top, x);
  double total = 0.0;
  for (double& x : row) total += (x = std::exp(x - top));
  for (double& x : row) x /= total;
}

inline Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (std::size_t r = 0; r < p.rows; ++r) softmax_inplace(p.row(r));
  return p;
}

// ---------------------------------------------------------------------------
// Losses. Each returns the batch mean and optionally writes dL/dlogits.
// Targets are constants: nothing flows back through them.

namespace detail {

inline void check_actions(const Matrix& probs, std::span<const int> actions) {
  if (actions.size() != probs.rows) throw InvalidArgument("action count does not match batch size");
  for (int a : actions)
    if (a < 0 || static_cast<std::size_t>(a) >= probs.cols) throw InvalidArgument("action id out of range");
}

}  // namespace detail

inline double loss_ce(const Matrix& probs, std::span<const int> actions, Matrix* dlogits = nullptr) {
  detail::check_actions(probs, actions);
  require(probs.rows > 0, "empty batch");
  const double inv = 1.0 / static_cast<double>(probs.rows);
  double total = 0.0;
  if (dlogits) *dlogits = Matrix(probs.rows, probs.cols);
  for (std::size_t r = 0; r < probs.rows; ++r) {
    const auto a = static_cast<std::size_t>(actions[r]);
    total -= std::log(probs(r, a));
    if (dlogits) {
      for (std::size_t c = 0; c < probs.cols; ++c) (*dlogits)(r, c) = probs(r, c) * inv;
      (*dlogits)(r, a) -= inv;
    }
  }
  return total * inv;
}

/// Per-row soft label: w on the taken action, (1-w)/(|A|-1) on each other one.
inline double loss_wce(const Matrix& probs, std::span<const int> actions, std::span<const double> targets,
                       Matrix* dlogits = nullptr) {
  detail::check_actions(probs, actions);
  require(probs.rows > 0, "empty batch");
  if (targets.size() != probs.rows) throw InvalidArgument("target count does not match batch size");
  require(probs.cols >= 2, "weighted cross-entropy needs at least two actions");
  const double inv = 1.0 / static_cast<double>(probs.rows);
  const double spread = 1.0 / static_cast<double>(probs.cols - 1);
  double total = 0.0;
  if (dlogits) *dlogits = Matrix(probs.rows, probs.cols);
  for (std::size_t r = 0; r < probs.rows; ++r) {
    const double w = targets[r];
    if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("weighted cross-entropy target outside [0,1]");
    const auto a = static_cast<std::size_t>(actions[r]);
    const double other = (1.0 - w) * spread;
    for (std::size_t c = 0; c < probs.cols; ++c) {
      const double y = c == a ? w : other;
      if (y != 0.0) total -= y * std::log(probs(r, c));
      if (dlogits) (*dlogits)(r, c) = (probs(r, c) - y) * inv;
    }
  }
  return total * inv;
}

inline double loss_td(std::span<const double> q, std::span<const double> targets, std::vector<double>* dq = nullptr) {
  if (q.size() != targets.size()) throw InvalidArgument("q and target batches differ in length");
  require(!q.empty(), "empty batch");
  const double inv = 1.0 / static_cast<double>(q.size());
  double total = 0.0;
  if (dq) dq->assign(q.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double diff = q[i] - targets[i];
    total += diff * diff;
    if (dq) (*dq)[i] = 2.0 * diff * inv;
  }
  return total * inv;
}

enum class LossKind { kCrossEntropy, kTemporalDifference, kWeightedCrossEntropy };

inline std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "ce";
    case LossKind::kTemporalDifference: return "td";
    case LossKind::kWeightedCrossEntropy: return "wce";
  }
  return "?";
}

struct LossBatch {
  Matrix features;
  std::vector<int> actions;
  std::vector<double> targets;  // TD and WCE only
};

/// Loss of `net` on a batch. CE and WCE read the softmax of the logits; TD
/// reads the raw logit of the taken action as Q(s,a).
inline double evaluate_loss(const DenseNet& net, LossKind kind, const LossBatch& batch,
                            std::vector<double>* grad = nullptr) {
  DenseNet::Cache cache;
  const Matrix& logits = net.forward(batch.features, cache);
  Matrix dlogits;
  double loss = 0.0;
  switch (kind) {
    case LossKind::kCrossEntropy:
      loss = loss_ce(softmax(logits), batch.actions, grad ? &dlogits : nullptr);
      break;
    case LossKind::kWeightedCrossEntropy:
      loss = loss_wce(softmax(logits), batch.actions, batch.targets, grad ? &dlogits : nullptr);
      break;
    case LossKind::kTemporalDifference: {
      detail::check_actions(logits, batch.actions);
      std::vector<double> q(logits.rows), dq;
      for (std::size_t r = 0; r < logits.rows; ++r) q[r] = logits(r, static_cast<std::size_t>(batch.actions[r]));
      loss = loss_td(q, batch.targets, grad ? &dq : nullptr);
      if (grad) {
        dlogits = Matrix(logits.rows, logits.cols);
        for (std::size_t r = 0; r < logits.rows; ++r) dlogits(r, static_cast<std::size_t>(batch.actions[r])) = dq[r];
      }
      break;
    }
  }
  if (grad) *grad = net.backward(cache, dlogits);
  return loss;
}

// ---------------------------------------------------------------------------

class Adam {
 public:
  explicit Adam(std::size_t n = 0, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    require(params.size() == m_.size() && grad.size() == m_.size(), "optimizer size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  std::size_t steps() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

/// Slow copy: after update(), params = (1 - alpha) params + alpha online.
class TargetCopy {
 public:
  TargetCopy() = default;
  TargetCopy(const DenseNet& online, double alpha) : net_(online), alpha_(alpha) {
    require(alpha >= 0.0 && alpha <= 1.0, "polyak rate must lie in [0,1]");
  }

  void update(const DenseNet& online) {
    auto target = net_.params();
    const auto source = online.params();
    require(target.size() == source.size(), "target and online nets differ in size");
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = (1.0 - alpha_) * target[i] + alpha_ * source[i];
  }

  const DenseNet& net() const { return net_; }
  double alpha() const { return alpha_; }

 private:
  DenseNet net_;
  double alpha_ = 0.005;
};

/// Central finite differences on `samples` randomly chosen parameters.
/// Returns the largest |analytic - numeric| / max(|analytic| + |numeric|, 1e-8).
inline double grad_check(const DenseNet& net, LossKind kind, const LossBatch& batch, double eps,
                         std::size_t samples = 128, std::uint64_t seed = 0) {
  require(eps >= 1e-6 && eps <= 1e-4, "grad_check: eps must lie in [1e-6, 1e-4]");
  std::vector<double> analytic;
  evaluate_loss(net, kind, batch, &analytic);
  DenseNet probe = net;
  Rng rng(splitmix64(seed ^ 0x6a09e667f3bcc909ULL));
  const std::size_t n = net.num_params();
  std::vector<std::size_t> index(n);
  for (std::size_t i = 0; i < n; ++i) index[i] = i;
  const std::size_t count = std::min(samples, n);
  for (std::size_t i = 0; i < count; ++i) std::swap(index[i], index[i + uniform_index(rng, n - i)]);
  double worst = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t i = index[k];
    const double original = probe.params()[i];
    probe.params()[i] = original + eps;
    const double up = evaluate_loss(probe, kind, batch);
    probe.params()[i] = original - eps;
    const double down = evaluate_loss(probe, kind, batch);
    probe.params()[i] = original;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-8);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoints: "QSFTCKPT", u32 version, u64 header length, JSON header, then
// every network's parameters as little-endian doubles in header order.

inline constexpr char kCheckpointMagic[8] = {'Q', 'S', 'F', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, DenseNet> nets;
  nlohmann::json info;  // config echo, step counts, anything else
};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");
  nlohmann::json header;
  header["info"] = ckpt.info;
  auto& nets = header["nets"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, net] : ckpt.nets) {
    nets.push_back({{"name", name}, {"sizes", net.sizes()}, {"seed", net.seed()}, {"offset", offset},
                    {"count", net.num_params()}});
    offset += net.num_params();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::uint64_t length = text.size();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, net] : ckpt.nets)
    out.write(reinterpret_cast<const char*>(net.params().data()),
              static_cast<std::streamsize>(net.num_params() * sizeof(double)));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw InvalidArgument(path.string() + " is not a checkpoint");
  if (version != kCheckpointVersion) throw InvalidArgument("unsupported checkpoint version " + std::to_string(version));
  if (length > (1u << 30)) throw InvalidArgument("checkpoint header too large");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw IoError("truncated checkpoint header in " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("corrupt checkpoint header: " + std::string(e.what()));
  }
  Checkpoint ckpt;
  ckpt.info = header.value("info", nlohmann::json::object());
  for (const auto& entry : header.at("nets")) {
    DenseNet net(entry.at("sizes").get<std::vector<std::size_t>>(), entry.at("seed").get<std::uint64_t>());
    const auto count = entry.at("count").get<std::size_t>();
    if (count != net.num_params()) throw InvalidArgument("checkpoint parameter count does not match layer sizes");
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint parameters in " + path.string());
    net.set_params(values);
    ckpt.nets.emplace(entry.at("name").get<std::string>(), std::move(net));
  }
  return ckpt;
}

}  // namespace qsft
