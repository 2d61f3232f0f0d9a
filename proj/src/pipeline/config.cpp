#include "mammil/config.hpp"

#include "mammil/error.hpp"

namespace mammil {

using nlohmann::json;

ssm::Dims ModelConfig::inner_dims() const {
  ssm::Dims d;
  d.heads = ssm_heads;
  d.head_dim = ssm_heads ? inner_dim() / ssm_heads : 0;
  d.state_dim = ssm_state;
  return d;
}

void ModelConfig::validate() const {
  if (input_dim == 0 || model_dim == 0 || expand == 0 || ssm_state == 0 || attention_dim == 0) {
    throw ValidationError("model config: dimensions must be positive");
  }
  if (ssm_heads == 0 || inner_dim() % ssm_heads != 0) {
    throw ValidationError("model config: expand*model_dim (" + std::to_string(inner_dim()) +
                          ") must be divisible by ssm_heads (" + std::to_string(ssm_heads) + ")");
  }
  if (knn_k < 1) throw ValidationError("model config: knn_k must be at least 1");
  if (task == Task::classification && num_classes < 2) {
    throw ValidationError("model config: classification needs at least 2 classes");
  }
  if (task == Task::survival && num_time_bins < 1) throw ValidationError("model config: survival needs time bins");
}

Monitor TrainConfig::resolved_monitor(Task task) const {
  if (monitor) return *monitor;
  return task == Task::survival ? Monitor::val_c_index : Monitor::val_loss;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0)) throw ValidationError("train config: learning_rate must be non-negative");
  if (!(weight_decay >= 0)) throw ValidationError("train config: weight_decay must be non-negative");
  if (max_epochs == 0) throw ValidationError("train config: max_epochs must be positive");
  if (early_stop_patience >= max_epochs) {
    throw ValidationError("train config: early_stop_patience must be below max_epochs");
  }
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0)) {
    throw ValidationError("train config: invalid optimizer moments");
  }
}

const char* task_name(Task t) { return t == Task::classification ? "classification" : "survival"; }

Task parse_task(const std::string& name) {
  if (name == "classification") return Task::classification;
  if (name == "survival") return Task::survival;
  throw ValidationError("unknown task '" + name + "'");
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const ModelConfig& c) {
  return json{{"input_dim", c.input_dim},
              {"model_dim", c.model_dim},
              {"expand", c.expand},
              {"ssm_heads", c.ssm_heads},
              {"ssm_state", c.ssm_state},
              {"attention_dim", c.attention_dim},
              {"gated_attention", c.gated_attention},
              {"knn_k", c.knn_k},
              {"coord_metric", c.coord_metric == CoordMetric::cosine ? "cosine" : "euclidean"},
              {"scanning_strategy", scan_strategy_name(c.scanning_strategy)},
              {"aggregation", c.aggregation == Aggregation::gia ? "gia" : "none"},
              {"residual", c.residual},
              {"task", task_name(c.task)},
              {"num_classes", c.num_classes},
              {"num_time_bins", c.num_time_bins},
              {"seed", c.seed}};
}

json to_json(const TrainConfig& c) {
  json j{{"learning_rate", c.learning_rate},
         {"weight_decay", c.weight_decay},
         {"max_epochs", c.max_epochs},
         {"early_stop_patience", c.early_stop_patience},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"epsilon", c.epsilon},
         {"seed", c.seed}};
  if (c.monitor) j["monitor"] = *c.monitor == Monitor::val_loss ? "val_loss" : "val_c_index";
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig c;
    read(j, "input_dim", c.input_dim);
    read(j, "model_dim", c.model_dim);
    read(j, "expand", c.expand);
    read(j, "ssm_heads", c.ssm_heads);
    read(j, "ssm_state", c.ssm_state);
    read(j, "attention_dim", c.attention_dim);
    read(j, "gated_attention", c.gated_attention);
    read(j, "knn_k", c.knn_k);
    read(j, "residual", c.residual);
    read(j, "num_classes", c.num_classes);
    read(j, "num_time_bins", c.num_time_bins);
    read(j, "seed", c.seed);
    if (j.contains("coord_metric")) {
      const auto m = j.at("coord_metric").get<std::string>();
      if (m == "cosine") c.coord_metric = CoordMetric::cosine;
      else if (m == "euclidean") c.coord_metric = CoordMetric::euclidean;
      else throw ValidationError("unknown coord_metric '" + m + "'");
    }
    if (j.contains("scanning_strategy")) c.scanning_strategy = parse_scan_strategy(j.at("scanning_strategy").get<std::string>());
    if (j.contains("aggregation")) {
      const auto a = j.at("aggregation").get<std::string>();
      if (a == "gia") c.aggregation = Aggregation::gia;
      else if (a == "none") c.aggregation = Aggregation::none;
      else throw ValidationError("unknown aggregation '" + a + "'");
    }
    if (j.contains("task")) {
      c.task = parse_task(j.at("task").get<std::string>());
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
}

TrainConfig train_config_from_json(const json& j) {
  try {
    TrainConfig c;
    read(j, "learning_rate", c.learning_rate);
    read(j, "weight_decay", c.weight_decay);
    read(j, "max_epochs", c.max_epochs);
    read(j, "early_stop_patience", c.early_stop_patience);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "epsilon", c.epsilon);
    read(j, "seed", c.seed);
    if (j.contains("monitor")) {
      const auto m = j.at("monitor").get<std::string>();
      if (m == "val_loss") c.monitor = Monitor::val_loss;
      else if (m == "val_c_index") c.monitor = Monitor::val_c_index;
      else throw ValidationError("unknown monitor '" + m + "'");
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
}

}  // namespace mammil
