#include <algorithm>
#include <cmath>

#include "mammil/error.hpp"
#include "mammil/mil.hpp"

namespace mammil {

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::size_t label) {
  const std::size_t C = logits.numel();
  if (label >= C) {
    throw ValidationError("cross_entropy: label " + std::to_string(label) + " outside [0," + std::to_string(C) + ")");
  }
  const auto L = logits.data();
  const real mx = *std::max_element(L.begin(), L.end());
  real z = 0;
  for (real v : L) z += std::exp(v - mx);
  const real lse = mx + std::log(z);
  const bool rec = tape.wants({&logits});
  Tensor out = Tensor::scalar(lse - L[label], rec);
  if (rec) {
    auto nl = logits.node();
    auto no = out.node();
    tape.record([nl, no, label, lse] {
      auto g = nl->grad_span();
      const real go = no->grad_span()[0];
      for (std::size_t c = 0; c < g.size(); ++c) {
        const real p = std::exp(nl->value[c] - lse);
        g[c] += go * (p - (c == label ? real(1) : real(0)));
      }
    });
  }
  return out;
}

Tensor survival_nll(Tape& tape, const Tensor& hazard_logits, std::size_t time_bin, Event event) {
  const std::size_t T = hazard_logits.numel();
  if (time_bin >= T) {
    throw ValidationError("survival_nll: time bin " + std::to_string(time_bin) + " outside [0," + std::to_string(T) + ")");
  }
  // log(1 - h) = -softplus(l), log h = -softplus(-l)
  const auto L = hazard_logits.data();
  const bool observed = event == Event::observed;
  const std::size_t survived_through = observed ? time_bin : time_bin + 1;  // bins contributing log(1-h)
  real loss = 0;
  for (std::size_t t = 0; t < survived_through; ++t) loss += ops::softplus_value(L[t]);
  if (observed) loss += ops::softplus_value(-L[time_bin]);

  const bool rec = tape.wants({&hazard_logits});
  Tensor out = Tensor::scalar(loss, rec);
  if (rec) {
    auto nl = hazard_logits.node();
    auto no = out.node();
    tape.record([nl, no, survived_through, observed, time_bin] {
      auto g = nl->grad_span();
      const real go = no->grad_span()[0];
      for (std::size_t t = 0; t < survived_through; ++t) g[t] += go * ops::sigmoid_value(nl->value[t]);
      if (observed) g[time_bin] -= go * ops::sigmoid_value(-nl->value[time_bin]);
    });
  }
  return out;
}

std::vector<real> hazards(std::span<const real> logits) {
  std::vector<real> h;
  h.reserve(logits.size());
  for (real l : logits) h.push_back(ops::sigmoid_value(l));
  return h;
}

std::vector<real> survival_curve(std::span<const real> logits) {
  std::vector<real> s;
  s.reserve(logits.size());
  real acc = 1;
  for (real l : logits) {
    acc *= ops::sigmoid_value(-l);
    s.push_back(acc);
  }
  return s;
}

real risk_score(std::span<const real> logits) {
  real risk = 0;
  for (real s : survival_curve(logits)) risk += real(1) - s;
  return risk;
}

}  // namespace mammil
