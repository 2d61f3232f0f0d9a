#include "mammil/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mammil/error.hpp"
#include "mammil/optimizer.hpp"

namespace mammil {

bool EarlyStopping::update(std::size_t epoch, double value) {
  const bool better = !std::isnan(value) &&
                      (!seen_ || std::isnan(best_) || (maximize_ ? value > best_ : value < best_));
  if (better) {
    seen_ = true;
    best_ = value;
    best_epoch_ = epoch;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return better;
}

ParameterSnapshot snapshot_parameters(const Model& model) {
  ParameterSnapshot s;
  for (const auto& [name, t] : model.parameters()) s.emplace_back(t.data().begin(), t.data().end());
  return s;
}

void restore_parameters(Model& model, const ParameterSnapshot& snapshot) {
  auto params = model.parameters();
  if (params.size() != snapshot.size()) throw StateError("snapshot does not match model parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto dst = params[k].second.data();
    if (dst.size() != snapshot[k].size()) throw StateError("snapshot shape mismatch for " + params[k].first);
    std::copy(snapshot[k].begin(), snapshot[k].end(), dst.begin());
  }
}

MetricsReport evaluate(const Model& model, const std::vector<InstanceBag>& bags,
                       const std::vector<BagStructure>* structures) {
  if (bags.empty()) throw ValidationError("evaluate: empty split");
  if (structures && structures->size() != bags.size()) throw ValidationError("evaluate: structure cache mismatch");
  const ModelConfig& cfg = model.config();

  // Reduce in bag-id order so the result does not depend on input order.
  std::vector<std::size_t> order(bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bags[a].bag_id < bags[b].bag_id; });

  MetricsReport report;
  double loss_sum = 0;
  std::vector<double> probs, risks, times;
  std::vector<std::size_t> labels;
  std::vector<Event> events;
  for (std::size_t idx : order) {
    const InstanceBag& bag = bags[idx];
    Rng rng(stable_hash(bag.bag_id));
    Tape tape(Tape::Mode::inference);
    const Tensor logits = structures ? model.forward(tape, bag, (*structures)[idx], rng)
                                     : model.forward_bag(tape, bag, rng);
    loss_sum += model.loss(tape, logits, bag).item();
    const Prediction p = make_prediction(cfg, logits.data());
    if (cfg.task == Task::classification) {
      probs.insert(probs.end(), p.probs.begin(), p.probs.end());
      labels.push_back(std::get<ClassTarget>(bag.target).label);
    } else {
      const auto& t = std::get<SurvivalTarget>(bag.target);
      risks.push_back(p.risk);
      times.push_back(double(t.time_bin));
      events.push_back(t.event);
    }
  }
  report.loss = loss_sum / double(bags.size());
  if (!std::isfinite(report.loss)) throw NumericError("evaluate: non-finite loss");
  report.extra["bags"] = double(bags.size());

  if (cfg.task == Task::classification) {
    const std::size_t C = cfg.num_classes;
    if (C == 2) {
      std::vector<double> positive(labels.size());
      for (std::size_t i = 0; i < labels.size(); ++i) positive[i] = probs[i * 2 + 1];
      report.accuracy = accuracy(positive, labels);
    } else {
      report.accuracy = accuracy_argmax(probs, C, labels);
    }
    try {
      report.auc = macro_auc(probs, C, labels);
    } catch (const UndefinedMetric&) {
    }
    for (std::size_t c = 0; c < C; ++c) {
      std::size_t total = 0, hit = 0;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != c) continue;
        ++total;
        auto row = std::span<const double>(probs).subspan(i * C, C);
        const bool predicted = C == 2 ? ((row[1] >= kDecisionThreshold) == (c == 1))
                                      : std::size_t(std::max_element(row.begin(), row.end()) - row.begin()) == c;
        hit += predicted;
      }
      if (total) report.extra["recall_class_" + std::to_string(c)] = double(hit) / double(total);
    }
  } else {
    try {
      report.c_index = c_index(risks, times, events);
    } catch (const UndefinedMetric&) {
    }
  }
  return report;
}

TrainHistory train(Model& model, const std::vector<InstanceBag>& train_bags, const std::vector<InstanceBag>& val_bags,
                   const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_bags.empty()) throw ValidationError("train: empty training split");
  if (val_bags.empty()) throw ValidationError("train: empty validation split");

  std::vector<BagStructure> train_structs, val_structs;
  for (const auto& b : train_bags) train_structs.push_back(model.prepare(b));
  for (const auto& b : val_bags) val_structs.push_back(model.prepare(b));

  RAdamOptions opt_options;
  opt_options.learning_rate = config.learning_rate;
  opt_options.beta1 = config.beta1;
  opt_options.beta2 = config.beta2;
  opt_options.epsilon = config.epsilon;
  opt_options.weight_decay = config.weight_decay;
  RAdam optimizer(model.parameters(), opt_options);
  optimizer.zero_grad();

  const Monitor monitor = config.resolved_monitor(model.config().task);
  EarlyStopping stopper(config.early_stop_patience, monitor == Monitor::val_c_index);
  TrainHistory history;
  ParameterSnapshot best = snapshot_parameters(model);

  Rng rng(config.seed);
  std::vector<std::size_t> order(train_bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t idx : order) {
      Tape tape;
      Tensor logits = model.forward(tape, train_bags[idx], train_structs[idx], rng);
      Tensor loss = model.loss(tape, logits, train_bags[idx]);
      if (!std::isfinite(loss.item())) {
        throw NumericError("train: non-finite loss on bag '" + train_bags[idx].bag_id + "' in epoch " +
                           std::to_string(epoch));
      }
      loss_sum += loss.item();
      tape.backward(loss);
      optimizer.step();
      optimizer.zero_grad();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / double(train_bags.size());
    rec.val = evaluate(model, val_bags, &val_structs);
    if (monitor == Monitor::val_loss) {
      rec.monitor_value = rec.val.loss;
    } else {
      rec.monitor_value = rec.val.c_index ? *rec.val.c_index : std::numeric_limits<double>::quiet_NaN();
    }
    rec.improved = stopper.update(epoch, rec.monitor_value);
    if (rec.improved) best = snapshot_parameters(model);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      history.stopped_early = true;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  history.best_monitor = stopper.best_value();
  restore_parameters(model, best);
  return history;
}

}  // namespace mammil
