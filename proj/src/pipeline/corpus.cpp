#include <algorithm>
#include <cmath>

#include "satp/data/dataset.hpp"
#include "satp/error.hpp"
#include "satp/pipeline/pipeline.hpp"

namespace satp {

std::size_t SceneSet::agents() const {
  std::size_t n = 0;
  for (const auto& s : scenes) n += static_cast<std::size_t>(std::count(s.valid.begin(), s.valid.end(), true));
  return n;
}

SceneBatch SceneSet::batch(const std::vector<std::size_t>& indices) const {
  std::vector<const SceneTensor*> s;
  std::vector<const FixedGraph*> g;
  for (std::size_t i : indices) {
    s.push_back(&scenes.at(i));
    g.push_back(&graphs.at(i));
  }
  return make_batch(s, g);
}

SceneBatch SceneSet::all() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch(idx);
}

std::vector<Record> load_records(const TrainConfig& cfg) {
  if (cfg.data.csv.empty()) return generate(cfg.generator);
  std::vector<Record> records = load_csv(cfg.data.csv);
  if (records.empty()) throw DataError("data: '" + cfg.data.csv + "' holds no records");
  for (auto& r : records) {
    if (std::fabs(r.rate_hz - 2.0) > 1e-9) r = resample_2hz(r, r.rate_hz);
  }
  return records;
}

namespace {

void add_samples(SceneSet& set, const std::vector<Sample>& samples, const std::vector<std::size_t>& pick,
                 const PredictorConfig& cfg) {
  for (std::size_t i : pick) {
    auto [scene, graph] = build_scene(samples[i], cfg);
    set.scenes.push_back(std::move(scene));
    set.graphs.push_back(std::move(graph));
  }
}

std::vector<Sample> windows(const std::vector<Record>& records, const TrainConfig& cfg) {
  std::vector<Sample> out;
  for (const auto& r : records) {
    auto w = window_samples(r, cfg.predictor.history_len, cfg.predictor.future_len, cfg.data.stride);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

}  // namespace

Corpus build_corpus(const std::vector<Record>& records, const TrainConfig& cfg, const std::string& name) {
  cfg.validate();
  auto [train_records, test_records] = split_by_record(records, cfg.data.train_fraction, cfg.seed);
  Corpus c;
  c.name = name;
  for (const auto& r : train_records) c.train_records.push_back(r.record_id);
  for (const auto& r : test_records) c.test_records.push_back(r.record_id);

  const auto train = windows(train_records, cfg);
  const auto test = windows(test_records, cfg);
  if (train.empty()) throw DataError("data: the training records yield no samples");
  if (test.empty()) throw DataError("data: the test records yield no samples");

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.data.val_fraction * static_cast<double>(train.size())));
  if (cfg.data.val_fraction > 0 && train.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, train.size() - 1);
  if (n_val >= train.size()) n_val = 0;
  Rng rng = Rng(cfg.seed).fork("validation");
  rng.shuffle(order);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  add_samples(c.train, train, train_idx, cfg.predictor);
  add_samples(c.val, train, val_idx, cfg.predictor);
  std::vector<std::size_t> all(test.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  add_samples(c.test, test, all, cfg.predictor);
  return c;
}

Corpus prepare_corpus(const TrainConfig& cfg) {
  return build_corpus(load_records(cfg), cfg, cfg.data.csv.empty() ? "synthetic" : cfg.data.csv);
}

}  // namespace satp
