#include "autocl/controller.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "autocl/checkpoint.hpp"
#include "autocl/error.hpp"
#include "autocl/ops.hpp"

namespace autocl {
namespace {

Tensor uniform_fan(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

std::vector<Tensor*> ControllerParams::tensors() {
  std::vector<Tensor*> out{&e, &W};
  for (std::size_t k = 0; k < branch_w.size(); ++k) {
    out.push_back(&branch_w[k]);
    out.push_back(&branch_b[k]);
  }
  return out;
}

std::vector<const Tensor*> ControllerParams::tensors() const {
  std::vector<const Tensor*> out;
  for (Tensor* t : const_cast<ControllerParams*>(this)->tensors()) out.push_back(t);
  return out;
}

ControllerParams init_controller(std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("controller dimension must be positive");
  Rng rng(seed);
  ControllerParams p;
  p.dim = dim;
  p.e = Tensor({dim});
  std::normal_distribution<double> small(0.0, 0.01);
  for (double& v : p.e.data()) v = small(rng);
  p.W = uniform_fan({dim, dim}, dim, dim, rng);
  for (const auto& branch : space_spec()) {
    p.branch_w.push_back(uniform_fan({dim, branch.options}, dim, branch.options, rng));
    p.branch_b.emplace_back(Shape{branch.options});
  }
  return p;
}

ControllerForward controller_forward(const ControllerParams& params, const SpaceRestriction& restriction) {
  const std::size_t d = params.dim;
  ControllerForward f;
  f.hidden.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double u = 0.0;
    for (std::size_t j = 0; j < d; ++j) u += params.W[i * d + j] * params.e[j];
    f.hidden[i] = std::tanh(u);
  }
  const auto& spec = space_spec();
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    const std::size_t n = spec[k].options;
    const Tensor& w = params.branch_w[k];
    std::vector<double> z(n, -std::numeric_limits<double>::infinity());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t o : restriction.allowed(k)) {
      double v = params.branch_b[k][o];
      for (std::size_t i = 0; i < d; ++i) v += f.hidden[i] * w[i * n + o];
      z[o] = v;
      mx = std::max(mx, v);
    }
    double total = 0.0;
    for (double& v : z) total += (v = std::isinf(v) ? 0.0 : std::exp(v - mx));
    for (double& v : z) v /= total;
    f.probs.push_back(std::move(z));
  }
  return f;
}

BranchProbs branch_probs(const ControllerParams& params, const SpaceRestriction& restriction) {
  return controller_forward(params, restriction).probs;
}

ControllerSample sample_strategy(const ControllerParams& params, Rng& rng, const SpaceRestriction& restriction) {
  ControllerSample s;
  s.forward = controller_forward(params, restriction);
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    const auto& p = s.forward.probs[k];
    std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
    s.indices[k] = pick(rng);
    s.log_probs[k] = std::log(p[s.indices[k]]);
  }
  s.strategy = decode(s.indices);
  return s;
}

void reinforce_update(ControllerParams& params, const ControllerSample& sample, double delta, double lr) {
  if (!(lr > 0.0)) throw ConfigError("controller learning rate must be positive");
  if (delta == 0.0) return;
  const std::size_t d = params.dim;
  const auto& h = sample.forward.hidden;
  const auto& spec = space_spec();

  // d(objective)/d(hidden), accumulated over branches before any update.
  std::vector<double> dh(d, 0.0);
  std::vector<std::vector<double>> dz(kBranchCount);
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    const std::size_t n = spec[k].options;
    dz[k].resize(n);
    for (std::size_t o = 0; o < n; ++o)
      dz[k][o] = delta * ((o == sample.indices[k] ? 1.0 : 0.0) - sample.forward.probs[k][o]);
    const Tensor& w = params.branch_w[k];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t o = 0; o < n; ++o) dh[i] += w[i * n + o] * dz[k][o];
  }
  std::vector<double> du(d);
  for (std::size_t i = 0; i < d; ++i) du[i] = dh[i] * (1.0 - h[i] * h[i]);
  std::vector<double> de(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) de[j] += params.W[i * d + j] * du[i];

  for (std::size_t k = 0; k < kBranchCount; ++k) {
    const std::size_t n = spec[k].options;
    Tensor& w = params.branch_w[k];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t o = 0; o < n; ++o) w[i * n + o] += lr * h[i] * dz[k][o];
    for (std::size_t o = 0; o < n; ++o) params.branch_b[k][o] += lr * dz[k][o];
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) params.W[i * d + j] += lr * du[i] * params.e[j];
  for (std::size_t j = 0; j < d; ++j) params.e[j] += lr * de[j];
}

std::vector<Var> bind_controller(Tape& tape, const ControllerParams& params) {
  std::vector<Var> vars;
  for (const Tensor* t : params.tensors()) vars.push_back(tape.leaf(*t, true));
  return vars;
}

Var controller_log_prob(const std::vector<Var>& params, const ActionIndices& indices) {
  if (params.size() != 2 + 2 * kBranchCount) throw DimensionError("controller_log_prob: wrong parameter count");
  const std::size_t d = params[0].shape()[0];
  Var e = reshape(params[0], {d, 1});
  Var hidden = reshape(tanh(matmul(params[1], e)), {1, d});
  Var total;
  for (std::size_t k = 0; k < kBranchCount; ++k) {
    Var p = softmax(linear(hidden, params[2 + 2 * k], params[3 + 2 * k]));
    Var chosen = log(slice(p, 1, indices[k], 1));
    total = total.valid() ? add(total, chosen) : chosen;
  }
  return reshape(total, {});
}

void save_controller(const std::filesystem::path& path, const ControllerParams& params) {
  std::vector<NamedTensor> arrays{{"e", params.e}, {"W", params.W}};
  for (std::size_t k = 0; k < params.branch_w.size(); ++k) {
    const std::string name(space_spec()[k].name);
    arrays.push_back({"branch_w." + name, params.branch_w[k]});
    arrays.push_back({"branch_b." + name, params.branch_b[k]});
  }
  write_container(path, "controller", nlohmann::json{{"dim", params.dim}}, arrays);
}

ControllerParams load_controller(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.kind != "controller") throw DataError(path.string() + " holds a " + c.kind + ", not a controller");
  ControllerParams p = init_controller(c.meta.at("dim").get<std::size_t>(), 0);
  auto targets = p.tensors();
  if (targets.size() != c.arrays.size()) throw DataError("controller checkpoint has the wrong number of arrays");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i]->shape() != c.arrays[i].value.shape()) throw DataError("controller checkpoint shape mismatch");
    *targets[i] = std::move(c.arrays[i].value);
  }
  return p;
}

}  // namespace autocl
