#include "mammil/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mammil/error.hpp"

namespace mammil {

namespace {

real evaluate(const std::function<Tensor(Tape&)>& loss) {
  Tape tape(Tape::Mode::inference);
  Tensor out = loss(tape);
  if (out.numel() != 1) throw ValidationError("gradient check requires a scalar-valued function");
  return out[0];
}

}  // namespace

double finite_diff_check_params(const std::function<Tensor(Tape&)>& loss, std::span<Tensor> params, double h) {
  if (!(h > 0)) throw ValidationError("finite difference step must be positive");
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  Tape tape;
  Tensor out = loss(tape);
  if (out.numel() != 1) throw ValidationError("gradient check requires a scalar-valued function");
  tape.backward(out);

  double worst = 0;
  for (auto& p : params) {
    std::vector<real> analytic(p.grad().begin(), p.grad().end());
    auto values = p.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const real saved = values[i];
      values[i] = saved + real(h);
      const double up = evaluate(loss);
      values[i] = saved - real(h);
      const double down = evaluate(loss);
      values[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(double(analytic[i]) - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double finite_diff_check(const ScalarFn& f, const Tensor& x, double h) {
  Tensor param = x.clone(true);
  Tensor params[] = {param};
  return finite_diff_check_params([&](Tape& tape) { return f(tape, param); }, params, h);
}

}  // namespace mammil
