#include "mammil/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mammil/error.hpp"

namespace mammil {

namespace {

real f32(double v) { return real(static_cast<float>(v)); }

struct SplitSizes {
  std::size_t train, val, test;
};

SplitSizes split_sizes(const SynthOptions& o) {
  SplitSizes s{};
  s.val = o.n_val ? o.n_val : std::max<std::size_t>(1, (o.n_bags + 3) / 7);
  s.test = o.n_test ? o.n_test : std::max<std::size_t>(1, (2 * o.n_bags + 3) / 7);
  if (s.val + s.test >= o.n_bags) throw ValidationError("synth: split sizes leave no training bags");
  s.train = o.n_bags - s.val - s.test;
  return s;
}

}  // namespace

SynthDataset synth_bags(const SynthOptions& o) {
  if (o.n_bags < 4) throw ValidationError("synth: need at least 4 bags");
  if (o.min_instances < 1 || o.min_instances > o.max_instances) throw ValidationError("synth: bad instance range");
  if (o.shifted_dims > o.dim) throw ValidationError("synth: shifted_dims exceeds dim");
  if (o.min_witnesses > o.max_witnesses || o.max_witnesses > o.min_instances) {
    throw ValidationError("synth: bad witness range");
  }
  const SplitSizes sizes = split_sizes(o);

  Rng rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> instances(o.min_instances, o.max_instances);
  std::uniform_int_distribution<std::size_t> witnesses(o.min_witnesses, o.max_witnesses);
  std::uniform_int_distribution<std::size_t> survival_witnesses(0, o.max_witnesses);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);

  auto split_of = [&](std::size_t b) {
    return b < sizes.train ? Split::train : (b < sizes.train + sizes.val ? Split::val : Split::test);
  };

  // Labels first, so every split can be forced to contain both classes.
  std::vector<std::size_t> labels(o.n_bags, 0);
  if (o.task == Task::classification) {
    for (auto& l : labels) l = unit(rng) < 0.5 ? 1 : 0;
    for (Split s : {Split::train, Split::val, Split::test}) {
      std::size_t count = 0, positives = 0, last = 0;
      for (std::size_t b = 0; b < o.n_bags; ++b) {
        if (split_of(b) != s) continue;
        ++count;
        positives += labels[b];
        last = b;
      }
      if (count >= 2 && (positives == 0 || positives == count)) labels[last] = 1 - labels[last];
    }
  }

  SynthDataset ds;
  ds.manifest.dim = o.dim;
  std::vector<double> survival_time(o.n_bags, 0.0);

  for (std::size_t b = 0; b < o.n_bags; ++b) {
    InstanceBag bag;
    char id[32];
    std::snprintf(id, sizeof id, "bag_%04zu", b);
    bag.bag_id = id;
    bag.dim = o.dim;
    bag.num_instances = instances(rng);
    const std::size_t M = bag.num_instances;

    std::size_t n_witness = 0;
    if (o.task == Task::classification) {
      bag.target = ClassTarget{labels[b]};
      if (labels[b] == 1) n_witness = witnesses(rng);
    } else {
      n_witness = survival_witnesses(rng);
    }

    const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(double(M))));
    bag.coords.resize(M * 2);
    for (std::size_t i = 0; i < M; ++i) {
      bag.coords[2 * i] = f32(double(i % cols) + jitter(rng));
      bag.coords[2 * i + 1] = f32(double(i / cols) + jitter(rng));
    }
    bag.features.resize(M * o.dim);
    for (auto& v : bag.features) v = f32(gauss(rng));

    std::vector<std::size_t> slots(M);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    std::shuffle(slots.begin(), slots.end(), rng);
    for (std::size_t w = 0; w < n_witness; ++w) {
      const std::size_t i = slots[w];
      for (std::size_t d = 0; d < o.shifted_dims; ++d) bag.features[i * o.dim + d] = f32(gauss(rng) + o.witness_shift);
    }

    if (o.task == Task::survival) {
      // Hazard grows with the witness fraction.
      const double fraction = double(n_witness) / double(M);
      const double rate = std::exp(40.0 * fraction);
      double t = -std::log(1.0 - unit(rng)) / rate;
      const bool censored = unit(rng) < o.censor_rate;
      if (censored) t *= unit(rng);
      survival_time[b] = t;
      bag.target = SurvivalTarget{0, censored ? Event::censored : Event::observed};
    }
    ds.bags.push_back(std::move(bag));
  }

  if (o.task == Task::survival) {
    // Bin edges at quantiles of the observed event times.
    std::vector<double> observed;
    for (std::size_t b = 0; b < o.n_bags; ++b)
      if (std::get<SurvivalTarget>(ds.bags[b].target).event == Event::observed) observed.push_back(survival_time[b]);
    if (observed.empty()) observed = survival_time;
    std::sort(observed.begin(), observed.end());
    std::vector<double> edges;
    for (std::size_t q = 1; q < o.time_bins; ++q) edges.push_back(observed[q * observed.size() / o.time_bins]);
    for (std::size_t b = 0; b < o.n_bags; ++b) {
      auto& t = std::get<SurvivalTarget>(ds.bags[b].target);
      t.time_bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), survival_time[b]) - edges.begin());
    }
  }

  for (std::size_t b = 0; b < o.n_bags; ++b) {
    BagRecord r;
    r.id = ds.bags[b].bag_id;
    r.file = r.id + ".mmb";
    r.split = split_of(b);
    r.target = ds.bags[b].target;
    ds.manifest.bags.push_back(std::move(r));
  }

  return ds;
}

DatasetManifest synth_generate(const SynthOptions& options, const std::filesystem::path& out_dir) {
  SynthDataset ds = synth_bags(options);
  std::filesystem::create_directories(out_dir);
  for (std::size_t b = 0; b < ds.bags.size(); ++b) write_bag(out_dir / ds.manifest.bags[b].file, ds.bags[b]);
  ds.manifest.base_dir = out_dir;
  ds.manifest.save(out_dir / "manifest.json");
  return ds.manifest;
}

}  // namespace mammil
