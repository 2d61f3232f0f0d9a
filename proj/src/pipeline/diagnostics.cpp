#include "mammil/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "mammil/blocks.hpp"
#include "mammil/error.hpp"
#include "mammil/gradcheck.hpp"
#include "mammil/model.hpp"

namespace mammil {

namespace {

constexpr std::size_t kCasesPerCheck = 10;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.5, double hi = 1.5, bool grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = real(dist(rng));
  return Tensor::from(std::move(shape), std::move(v), grad);
}

// Reduces an output to a scalar through fixed random weights so that
// constant-sum outputs (softmax) still have informative gradients.
Tensor weighted_sum(Tape& tape, const Tensor& out, const Tensor& weights) {
  return ops::sum(tape, ops::mul(tape, out, weights));
}

class Suite {
 public:
  Suite(double tolerance, std::uint64_t seed) : tolerance_(tolerance), rng_(seed) {}

  // `make` builds fresh inputs and returns the parameters plus the loss.
  template <class Make>
  void check(const std::string& name, std::size_t cases, Make make) {
    double worst = 0;
    for (std::size_t c = 0; c < cases; ++c) {
      std::vector<Tensor> params;
      auto loss = make(rng_, params);
      worst = std::max(worst, finite_diff_check_params(loss, params));
    }
    results_.push_back({name, worst, tolerance_});
  }

  Rng& rng() { return rng_; }
  std::vector<GradCheckResult> take() { return std::move(results_); }

 private:
  double tolerance_;
  Rng rng_;
  std::vector<GradCheckResult> results_;
};

using LossFn = std::function<Tensor(Tape&)>;

void unary_case(Suite& s, const std::string& name, ops::Unary op) {
  s.check(name, kCasesPerCheck, [op](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor x = random_tensor({3, 4}, rng, -2.0, 2.0);
    Tensor w = random_tensor({3, 4}, rng, -1, 1, false);
    params = {x};
    return [=](Tape& t) { return weighted_sum(t, ops::unary(t, op, x), w); };
  });
}

std::vector<GradCheckResult> primitive_suite(std::uint64_t seed) {
  Suite s(kPrimitiveGradTolerance, seed);
  s.check("matmul", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng), w = random_tensor({3, 2}, rng, -1, 1, false);
    params = {a, b};
    return [=](Tape& t) { return weighted_sum(t, ops::matmul(t, a, b), w); };
  });
  s.check("linear", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor x = random_tensor({5, 3}, rng), W = random_tensor({3, 4}, rng), b = random_tensor({4}, rng);
    Tensor w = random_tensor({5, 4}, rng, -1, 1, false);
    params = {x, W, b};
    return [=](Tape& t) { return weighted_sum(t, ops::linear(t, x, W, b), w); };
  });
  unary_case(s, "relu", ops::Unary::relu);
  unary_case(s, "silu", ops::Unary::silu);
  unary_case(s, "tanh", ops::Unary::tanh);
  unary_case(s, "softplus", ops::Unary::softplus);
  unary_case(s, "exp", ops::Unary::exp);
  unary_case(s, "sigmoid", ops::Unary::sigmoid);
  s.check("add", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng), w = random_tensor({2, 3}, rng, -1, 1, false);
    params = {a, b};
    return [=](Tape& t) { return weighted_sum(t, ops::add(t, a, b), w); };
  });
  s.check("mul", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng), w = random_tensor({2, 3}, rng, -1, 1, false);
    params = {a, b};
    return [=](Tape& t) { return weighted_sum(t, ops::mul(t, a, b), w); };
  });
  s.check("scale+add_scalar", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor a = random_tensor({2, 3}, rng), w = random_tensor({2, 3}, rng, -1, 1, false);
    params = {a};
    return [=](Tape& t) { return weighted_sum(t, ops::add_scalar(t, ops::scale(t, a, real(-1.7)), real(0.3)), w); };
  });
  s.check("mean_of", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    std::vector<Tensor> xs{random_tensor({3, 2}, rng), random_tensor({3, 2}, rng), random_tensor({3, 2}, rng)};
    Tensor w = random_tensor({3, 2}, rng, -1, 1, false);
    params = xs;
    return [=](Tape& t) { return weighted_sum(t, ops::mean_of(t, xs), w); };
  });
  for (std::size_t axis : {0, 1}) {
    s.check("softmax_axis" + std::to_string(axis), kCasesPerCheck, [axis](Rng& rng, std::vector<Tensor>& params) -> LossFn {
      Tensor x = random_tensor({4, 3}, rng, -3, 3), w = random_tensor({4, 3}, rng, -1, 1, false);
      params = {x};
      return [=](Tape& t) { return weighted_sum(t, ops::softmax(t, x, axis), w); };
    });
  }
  s.check("layer_norm", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor x = random_tensor({3, 5}, rng), g = random_tensor({5}, rng), b = random_tensor({5}, rng);
    Tensor w = random_tensor({3, 5}, rng, -1, 1, false);
    params = {x, g, b};
    return [=](Tape& t) { return weighted_sum(t, ops::layer_norm(t, x, g, b), w); };
  });
  s.check("sum", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor x = random_tensor({3, 3}, rng);
    params = {x};
    return [=](Tape& t) { return ops::scale(t, ops::sum(t, x), real(2.5)); };
  });
  s.check("gather_rows", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor x = random_tensor({4, 3}, rng), w = random_tensor({6, 3}, rng, -1, 1, false);
    std::uniform_int_distribution<std::size_t> pick(0, 3);
    std::vector<std::size_t> index(6);
    for (auto& i : index) i = pick(rng);
    params = {x};
    return [=](Tape& t) { return weighted_sum(t, ops::gather_rows(t, x, index), w); };
  });
  s.check("reverse_rows", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor x = random_tensor({5, 2}, rng), w = random_tensor({5, 2}, rng, -1, 1, false);
    params = {x};
    return [=](Tape& t) { return weighted_sum(t, ops::reverse_rows(t, x), w); };
  });
  s.check("transpose", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor x = random_tensor({2, 4}, rng), w = random_tensor({4, 2}, rng, -1, 1, false);
    params = {x};
    return [=](Tape& t) { return weighted_sum(t, ops::transpose(t, x), w); };
  });
  return s.take();
}

InstanceBag random_bag(Rng& rng, std::size_t m, std::size_t dim) {
  InstanceBag bag;
  bag.bag_id = "gradcheck";
  bag.num_instances = m;
  bag.dim = dim;
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> pos(0, 100);
  bag.features.resize(m * dim);
  for (auto& v : bag.features) v = real(normal(rng));
  bag.coords.resize(m * 2);
  for (auto& v : bag.coords) v = real(pos(rng));
  bag.target = ClassTarget{0};
  return bag;
}

void append_params(std::vector<Tensor>& out, const NamedTensors& named) {
  for (const auto& [name, t] : named) out.push_back(t);
}

std::vector<GradCheckResult> block_suite(std::uint64_t seed) {
  Suite s(kCompositeGradTolerance, seed);
  const ssm::Dims dims{2, 3, 4};

  s.check("ssm_scan", kCasesPerCheck, [&](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    const std::size_t M = 5;
    Tensor x = random_tensor({M, dims.width()}, rng), b = random_tensor({M, dims.state_dim}, rng);
    Tensor c = random_tensor({M, dims.state_dim}, rng), delta = random_tensor({M, dims.heads}, rng, 0.1, 1.0);
    Tensor a_log = random_tensor({dims.heads}, rng, -0.5, 0.7);
    Tensor w = random_tensor({M, dims.width()}, rng, -1, 1, false);
    params = {x, b, c, delta, a_log};
    return [=](Tape& t) { return weighted_sum(t, ssm::scan(t, x, b, c, delta, a_log, dims), w); };
  });
  s.check("ssm_selective", kCasesPerCheck, [&](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    auto hp = ssm::HeadParams::init(dims, rng);
    hp.w_delta = random_tensor(hp.w_delta.shape(), rng, -0.5, 0.5);
    Tensor x = random_tensor({6, dims.width()}, rng), w = random_tensor({6, dims.width()}, rng, -1, 1, false);
    params = {x};
    append_params(params, hp.named("ssm"));
    return [=](Tape& t) { return weighted_sum(t, ssm::forward(t, x, hp), w); };
  });
  s.check("bi_ssm", kCasesPerCheck, [&](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    auto fwd = ssm::HeadParams::init(dims, rng), bwd = ssm::HeadParams::init(dims, rng);
    Tensor x = random_tensor({6, dims.width()}, rng), w = random_tensor({6, dims.width()}, rng, -1, 1, false);
    params = {x};
    append_params(params, fwd.named("fwd"));
    append_params(params, bwd.named("bwd"));
    return [=](Tape& t) { return weighted_sum(t, ssm::bi_ssm(t, x, fwd, bwd), w); };
  });
  for (bool residual : {false, true}) {
    s.check(residual ? "ta_mamba_residual" : "ta_mamba", kCasesPerCheck / 2,
            [&, residual](Rng& rng, std::vector<Tensor>& params) -> LossFn {
              const std::size_t M = 7, D = 4;
              InstanceBag bag = random_bag(rng, M, D);
              auto forest = kruskal_msf(build_knn_graph(bag, 3));
              const TraversalOrders orders = serialize_all(forest, rng);
              auto block = TaMambaBlock::init(D, dims, ScanStrategy::topology_aware, residual, rng);
              Tensor x = random_tensor({M, D}, rng), w = random_tensor({M, D}, rng, -1, 1, false);
              NamedTensors named;
              block.append_named(named, "block");
              params = {x};
              append_params(params, named);
              return [=](Tape& t) { return weighted_sum(t, ta_mamba_forward(t, x, orders, block), w); };
            });
  }
  s.check("gia", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    const std::size_t M = 7, D = 4;
    InstanceBag bag = random_bag(rng, M, D);
    const WsiGraph graph = build_knn_graph(bag, 3);
    auto block = GiaBlock::init(D, rng);
    Tensor x = random_tensor({M, D}, rng), w = random_tensor({M, D}, rng, -1, 1, false);
    NamedTensors named;
    block.append_named(named, "gia");
    params = {x};
    append_params(params, named);
    return [=](Tape& t) { return weighted_sum(t, gia_forward(t, x, graph, block), w); };
  });
  for (bool gated : {false, true}) {
    s.check(gated ? "attention_pool_gated" : "attention_pool", kCasesPerCheck,
            [gated](Rng& rng, std::vector<Tensor>& params) -> LossFn {
              auto pool = AttentionPool::init(4, 3, gated, rng);
              Tensor h = random_tensor({6, 4}, rng), w = random_tensor({1, 4}, rng, -1, 1, false);
              NamedTensors named;
              pool.append_named(named, "pool");
              params = {h};
              append_params(params, named);
              return [=](Tape& t) { return weighted_sum(t, attention_pool(t, h, pool).z, w); };
            });
  }
  s.check("cross_entropy", kCasesPerCheck, [](Rng& rng, std::vector<Tensor>& params) -> LossFn {
    Tensor logits = random_tensor({1, 3}, rng, -3, 3);
    const std::size_t label = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    params = {logits};
    return [=](Tape& t) { return cross_entropy(t, logits, label); };
  });
  for (Event event : {Event::observed, Event::censored}) {
    s.check(event == Event::observed ? "survival_nll_observed" : "survival_nll_censored", kCasesPerCheck,
            [event](Rng& rng, std::vector<Tensor>& params) -> LossFn {
              Tensor logits = random_tensor({1, 4}, rng, -3, 3);
              const std::size_t bin = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
              params = {logits};
              return [=](Tape& t) { return survival_nll(t, logits, bin, event); };
            });
  }
  return s.take();
}

std::vector<GradCheckResult> model_suite(std::uint64_t seed) {
  Suite s(kCompositeGradTolerance, seed);
  for (Task task : {Task::classification, Task::survival}) {
    s.check(std::string("model_") + task_name(task), 1, [task](Rng& rng, std::vector<Tensor>& params) -> LossFn {
      ModelConfig cfg;
      cfg.input_dim = 5;
      cfg.model_dim = 4;
      cfg.expand = 2;
      cfg.ssm_heads = 2;
      cfg.ssm_state = 3;
      cfg.attention_dim = 3;
      cfg.knn_k = 3;
      cfg.task = task;
      cfg.seed = rng();
      auto model = std::make_shared<Model>(cfg);
      InstanceBag bag = random_bag(rng, 6, cfg.input_dim);
      if (task == Task::survival) bag.target = SurvivalTarget{2, Event::observed};
      const auto structure = std::make_shared<BagStructure>(model->prepare(bag));
      const std::uint64_t order_seed = rng();
      append_params(params, model->parameters());
      return [=](Tape& t) {
        Rng order_rng(order_seed);
        return model->loss(t, model->forward(t, bag, *structure, order_rng), bag);
      };
    });
  }
  return s.take();
}

}  // namespace

GradScope parse_grad_scope(const std::string& name) {
  if (name == "primitives") return GradScope::primitives;
  if (name == "blocks") return GradScope::blocks;
  if (name == "model") return GradScope::model;
  throw ValidationError("unknown gradcheck scope '" + name + "'");
}

std::vector<GradCheckResult> run_gradient_suite(GradScope scope, std::uint64_t seed) {
  switch (scope) {
    case GradScope::primitives: return primitive_suite(seed);
    case GradScope::blocks: return block_suite(seed);
    case GradScope::model: return model_suite(seed);
  }
  return {};
}

std::vector<double> time_scan(std::span<const std::size_t> lengths, const ssm::Dims& dims, std::size_t repetitions,
                              std::uint64_t seed) {
  if (repetitions == 0) throw ValidationError("time_scan: repetitions must be positive");
  struct Inputs {
    Tensor x, b, c, delta;
  };
  Rng rng(seed);
  const Tensor a_log = random_tensor({dims.heads}, rng, 0.0, 0.7, false);
  std::vector<Inputs> inputs;
  for (std::size_t m : lengths) {
    inputs.push_back({random_tensor({m, dims.width()}, rng, -1, 1, false),
                      random_tensor({m, dims.state_dim}, rng, -1, 1, false),
                      random_tensor({m, dims.state_dim}, rng, -1, 1, false),
                      random_tensor({m, dims.heads}, rng, 0.01, 0.1, false)});
  }
  // Lengths are interleaved within each repetition so that background load
  // affects all of them alike; repetition 0 is a discarded warm-up.
  std::vector<std::vector<double>> times(lengths.size());
  for (std::size_t r = 0; r <= repetitions; ++r) {
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      const Inputs& in = inputs[k];
      Tape tape(Tape::Mode::inference);
      const auto start = std::chrono::steady_clock::now();
      const Tensor y = ssm::scan(tape, in.x, in.b, in.c, in.delta, a_log, dims);
      const auto stop = std::chrono::steady_clock::now();
      if (y.numel() != lengths[k] * dims.width()) throw StateError("time_scan: unexpected output size");
      if (r > 0) times[k].push_back(std::chrono::duration<double>(stop - start).count());
    }
  }
  std::vector<double> medians;
  for (auto& t : times) {
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    medians.push_back(t[t.size() / 2]);
  }
  return medians;
}

}  // namespace mammil
