#include "dcm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dcm/errors.hpp"
#include "dcm/sampling.hpp"

namespace dcm {

void SpatialConfig::validate() const {
  if (n_items < 1) throw ArgumentError("spatial config: n_items must be at least 1");
  if (!(half_width > 0.0)) throw ArgumentError("spatial config: half_width must be positive");
  if (!(radius >= 0.0)) throw ArgumentError("spatial config: radius must be non-negative");
}

std::vector<bool> matern_iii_thin(std::span<const Point2> points,
                                  const std::vector<bool>& survivors, double r) {
  if (survivors.size() != points.size())
    throw ArgumentError("matern_iii_thin: survivors and points differ in length");
  if (!(r >= 0.0)) throw ArgumentError("matern_iii_thin: radius must be non-negative");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].y != points[b].y) return points[a].y > points[b].y;
    if (points[a].x != points[b].x) return points[a].x < points[b].x;
    return a < b;
  });
  std::vector<bool> alive = survivors;
  const double excl = 2.0 * r;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (!alive[i]) continue;
    for (std::size_t m = k + 1; m < order.size(); ++m) {
      const std::size_t j = order[m];
      if (!alive[j]) continue;
      if (std::hypot(points[i].x - points[j].x, points[i].y - points[j].y) < excl)
        alive[j] = false;
    }
  }
  return alive;
}

FeatureSchema spatial_schema() {
  FeatureSchema s;
  s.names = {"const", "x", "y", "dist"};
  s.layout.quality_features = {0, 1, 2, 3};
  s.layout.similarity_features = {1, 2};
  s.layout.similarity_groups = {0, 0};
  s.group_names = {"position"};
  s.standardize = {1, 2, 3};
  return s;
}

Observation gen_spatial_observation(const SpatialConfig& cfg, Rng& rng, std::string id) {
  cfg.validate();
  const int n = cfg.n_items;
  std::vector<Point2> pts(n);
  Observation obs;
  obs.id = std::move(id);
  obs.items.features.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    pts[i].x = (2.0 * rng.uniform() - 1.0) * cfg.half_width;
    pts[i].y = (2.0 * rng.uniform() - 1.0) * cfg.half_width;
    const double d = std::hypot(pts[i].x, pts[i].y);
    obs.items.features.row(i) << 1.0, pts[i].x, pts[i].y, d;
    obs.items.ids.push_back("p" + std::to_string(i));
  }
  std::vector<bool> labels(n);
  for (int i = 0; i < n; ++i) {
    const double keep =
        std::min(1.0, std::exp(cfg.gamma0 + cfg.gamma1 * obs.items.features(i, 3)));
    labels[i] = rng.uniform() < keep;
  }
  labels = matern_iii_thin(pts, labels, cfg.radius);
  std::vector<int> chosen;
  for (int i = 0; i < n; ++i)
    if (labels[i]) chosen.push_back(i);
  obs.chosen = SubsetIndex(std::move(chosen));
  return obs;
}

Dataset spatial_dataset(const SpatialConfig& cfg, int n_obs, const Rng& rng,
                        const std::string& id_prefix) {
  Dataset data;
  data.schema = spatial_schema();
  for (int k = 0; k < n_obs; ++k) {
    Rng r = rng.derive(static_cast<std::uint64_t>(k));
    data.observations.push_back(gen_spatial_observation(cfg, r, id_prefix + "-" + std::to_string(k)));
  }
  return data;
}

std::vector<RadiusSplit> radius_sweep(const std::vector<double>& radii, int n_train, int n_eval,
                                      const SpatialConfig& cfg, const Rng& rng) {
  if (radii.empty()) throw ArgumentError("radius_sweep: no radii given");
  std::vector<RadiusSplit> out;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    SpatialConfig c = cfg;
    c.radius = radii[i];
    RadiusSplit split;
    split.radius = radii[i];
    split.train = spatial_dataset(c, n_train, rng.derive({i, 0}), "train");
    split.eval = spatial_dataset(c, n_eval, rng.derive({i, 1}), "eval");
    out.push_back(std::move(split));
  }
  return out;
}

std::map<int, double> default_airtime_table() {
  return {{8, 113.0}, {9, 206.0}, {10, 371.0}, {11, 741.0}};
}

void LoraGenConfig::validate() const {
  if (n_devices < 1) throw ArgumentError("lora config: need at least one device");
  if (!(d_max >= 0.0)) throw ArgumentError("lora config: d_max must be non-negative");
  if (channels.empty() || sfs.empty())
    throw ArgumentError("lora config: channel and sf subsets must be non-empty");
  for (int c : channels)
    if (c < kMinChannel || c > kMaxChannel)
      throw ArgumentError("lora config: channel " + std::to_string(c) + " outside 9..16");
  for (int s : sfs) {
    if (s < kMinSf || s > kMaxSf)
      throw ArgumentError("lora config: sf " + std::to_string(s) + " outside 8..11");
    auto it = airtime_ms.find(s);
    if (it == airtime_ms.end() || !(it->second > 0.0))
      throw ArgumentError("lora config: airtime table lacks sf " + std::to_string(s));
  }
  if (!(relative_delay_offset > 0.0))
    throw ArgumentError("lora config: relative_delay_offset must be positive");
}

std::vector<Transmission> gen_lora_assortment(const LoraGenConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<Transmission> out;
  for (int k = 0; k < cfg.n_devices; ++k) {
    Transmission t;
    t.device = k;
    t.delay_ms = static_cast<double>(rng.uniform_int(0, static_cast<std::int64_t>(std::floor(cfg.d_max))));
    t.power_dbm = static_cast<int>(rng.uniform_int(-4, 23));
    t.channel = cfg.channels[rng.index(cfg.channels.size())];
    t.sf = cfg.sfs[rng.index(cfg.sfs.size())];
    t.airtime_ms = cfg.airtime_ms.at(t.sf);
    out.push_back(t);
  }
  return out;
}

bool concurrent(const Transmission& a, const Transmission& b) {
  return a.delay_ms <= b.delay_ms + b.airtime_ms && b.delay_ms <= a.delay_ms + a.airtime_ms;
}

namespace {
void check_transmission(const Transmission& t, const LoraGenConfig& cfg) {
  if (t.channel < kMinChannel || t.channel > kMaxChannel)
    throw DataError("transmission of device " + std::to_string(t.device) + ": unknown channel " +
                    std::to_string(t.channel));
  if (t.sf < kMinSf || t.sf > kMaxSf || !cfg.airtime_ms.contains(t.sf))
    throw DataError("transmission of device " + std::to_string(t.device) +
                    ": unknown spreading factor " + std::to_string(t.sf));
  if (!(t.airtime_ms > 0) || !std::isfinite(t.delay_ms))
    throw DataError("transmission of device " + std::to_string(t.device) +
                    ": airtime must be positive and delay finite");
}
}  // namespace

LoraFeatures lora_features(std::span<const Transmission> tx, const LoraGenConfig& cfg) {
  if (tx.empty()) throw ArgumentError("lora_features: empty assortment");
  const auto n = static_cast<Eigen::Index>(tx.size());
  constexpr int n_channels = kMaxChannel - kMinChannel + 1;
  constexpr int n_sfs = kMaxSf - kMinSf + 1;
  LoraFeatures f;
  f.quality = Matrix::Zero(n, 5);
  f.similarity = Matrix::Zero(n, n_channels + n_sfs);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transmission& t = tx[i];
    check_transmission(t, cfg);
    bool ch_overlap = false, chsf_overlap = false;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || tx[j].channel != t.channel || !concurrent(t, tx[j])) continue;
      ch_overlap = true;
      if (tx[j].sf == t.sf) chsf_overlap = true;
    }
    f.quality.row(i) << 1.0, ch_overlap ? 1.0 : 0.0, chsf_overlap ? 1.0 : 0.0,
        static_cast<double>(t.power_dbm), t.delay_ms;
    f.similarity(i, t.channel - kMinChannel) = 1.0;
    f.similarity(i, n_channels + t.sf - kMinSf) =
        t.delay_ms / t.airtime_ms + cfg.relative_delay_offset;
  }
  return f;
}

double CaptureRule::lock_window_ms(int sf) const {
  if (!preamble_capture) return 0.0;
  return preamble_symbols * std::ldexp(1.0, sf) / bandwidth_khz;
}

SubsetIndex synthetic_capture_labels(std::span<const Transmission> tx, const CaptureRule& rule) {
  const std::size_t n = tx.size();
  std::vector<bool> decided(n, false), received(n, false);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (tx[a].delay_ms != tx[b].delay_ms) return tx[a].delay_ms < tx[b].delay_ms;
    if (tx[a].power_dbm != tx[b].power_dbm) return tx[a].power_dbm > tx[b].power_dbm;
    return tx[a].device < tx[b].device;
  });
  // `order` ranks arrivals; the first undecided entry of a group opens a lock window.
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t first = order[k];
    if (decided[first]) continue;
    const Transmission& f = tx[first];
    const double window_end = f.delay_ms + rule.lock_window_ms(f.sf);
    std::size_t lock = first;
    for (std::size_t m = k + 1; m < n; ++m) {
      const std::size_t j = order[m];
      const Transmission& t = tx[j];
      if (decided[j] || t.channel != f.channel || t.sf != f.sf) continue;
      if (t.delay_ms > window_end) break;
      if (t.power_dbm > tx[lock].power_dbm) lock = j;
    }
    decided[lock] = received[lock] = true;
    for (std::size_t j = 0; j < n; ++j) {
      if (decided[j] || tx[j].channel != f.channel || tx[j].sf != f.sf) continue;
      if (concurrent(tx[j], tx[lock])) decided[j] = true;
    }
  }
  std::vector<int> chosen;
  for (std::size_t i = 0; i < n; ++i)
    if (received[i]) chosen.push_back(static_cast<int>(i));
  return SubsetIndex(std::move(chosen));
}

FeatureSchema lora_schema() {
  FeatureSchema s;
  s.names = {"const", "ch_overlap", "ch_sf_overlap", "power", "delay"};
  for (int c = kMinChannel; c <= kMaxChannel; ++c) s.names.push_back("ch" + std::to_string(c));
  for (int f = kMinSf; f <= kMaxSf; ++f) s.names.push_back("rel_delay_sf" + std::to_string(f));
  s.layout.quality_features = {0, 1, 2, 3, 4};
  for (int k = 5; k < static_cast<int>(s.names.size()); ++k) {
    s.layout.similarity_features.push_back(k);
    s.layout.similarity_groups.push_back(k < 5 + (kMaxChannel - kMinChannel + 1) ? 0 : 1);
  }
  s.group_names = {"channel", "relative_delay"};
  s.standardize = {3, 4};
  return s;
}

void LoraCampaignConfig::validate() const {
  if (k_min < 1 || k_max < k_min) throw ArgumentError("lora campaign: invalid device range");
  if (d_max_choices.empty() || channel_subset_sizes.empty() || sf_subset_sizes.empty())
    throw ArgumentError("lora campaign: choice lists must be non-empty");
  for (int c : channel_subset_sizes)
    if (c < 1 || c > static_cast<int>(base.channels.size()))
      throw ArgumentError("lora campaign: channel subset size out of range");
  for (int s : sf_subset_sizes)
    if (s < 1 || s > static_cast<int>(base.sfs.size()))
      throw ArgumentError("lora campaign: sf subset size out of range");
  base.validate();
}

namespace {
std::vector<int> random_subset(std::vector<int> pool, int k, Rng& rng) {
  for (std::size_t i = 0; i + 1 < pool.size(); ++i) {
    const std::size_t j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}
}  // namespace

Dataset lora_dataset(const LoraCampaignConfig& cfg, int n_obs, const Rng& rng,
                     const std::string& id_prefix) {
  cfg.validate();
  Dataset data;
  data.schema = lora_schema();
  for (int k = 0; k < n_obs; ++k) {
    Rng r = rng.derive(static_cast<std::uint64_t>(k));
    LoraGenConfig g = cfg.base;
    g.n_devices = static_cast<int>(r.uniform_int(cfg.k_min, cfg.k_max));
    g.d_max = cfg.d_max_choices[r.index(cfg.d_max_choices.size())];
    g.channels = random_subset(cfg.base.channels,
                               cfg.channel_subset_sizes[r.index(cfg.channel_subset_sizes.size())], r);
    g.sfs = random_subset(cfg.base.sfs, cfg.sf_subset_sizes[r.index(cfg.sf_subset_sizes.size())], r);
    const auto tx = gen_lora_assortment(g, r);
    const LoraFeatures f = lora_features(tx, g);
    Observation obs;
    obs.id = id_prefix + "-" + std::to_string(k);
    obs.items.features.resize(f.quality.rows(), f.quality.cols() + f.similarity.cols());
    obs.items.features << f.quality, f.similarity;
    for (const auto& t : tx) obs.items.ids.push_back("dev" + std::to_string(t.device));
    obs.chosen = synthetic_capture_labels(tx, cfg.rule);
    data.observations.push_back(std::move(obs));
  }
  return data;
}

Dataset determinantal_dataset(const ModelParams& truth, int n_obs, int n_items, const Rng& rng) {
  truth.validate();
  int d = 0;
  for (int c : truth.layout.quality_features) d = std::max(d, c + 1);
  for (int c : truth.layout.similarity_features) d = std::max(d, c + 1);
  Dataset data;
  for (int c = 0; c < d; ++c) data.schema.names.push_back("f" + std::to_string(c));
  data.schema.layout = truth.layout;
  for (int k = 0; k < n_obs; ++k) {
    Rng r = rng.derive(static_cast<std::uint64_t>(k));
    Observation obs;
    obs.id = "det-" + std::to_string(k);
    obs.items.features.resize(n_items, d);
    for (int i = 0; i < n_items; ++i) {
      for (int c = 0; c < d; ++c) obs.items.features(i, c) = r.normal();
      obs.items.ids.push_back("i" + std::to_string(i));
    }
    obs.chosen = SpectralSampler(build_kernel(truth, obs.items).L)(r);
    data.observations.push_back(std::move(obs));
  }
  return data;
}

}  // namespace dcm
