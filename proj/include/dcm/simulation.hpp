#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dcm/dataset.hpp"
#include "dcm/rng.hpp"

namespace dcm {

// ---------------------------------------------------------------------------
// Spatial hard-core process

struct SpatialConfig {
  int n_items = 15;
  double half_width = 2.0;  // points uniform on [-h, h]^2
  double gamma0 = -5.0;
  double gamma1 = 2.5;
  double radius = 0.0;

  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Matern type III thinning. Survivors are visited in decreasing y (ties: x,
/// then index, ascending); each still-surviving point is kept and removes every
/// surviving point strictly closer than 2r. r = 0 keeps all survivors.
std::vector<bool> matern_iii_thin(std::span<const Point2> points,
                                  const std::vector<bool>& survivors, double r);

/// Columns: const, x, y, dist. Quality uses all four; similarity uses (x, y)
/// with one shared lengthscale; x, y and dist are standardized at fit time.
FeatureSchema spatial_schema();

/// Uniform points, independent distance-based label removal with probability
/// 1 - min(1, exp(gamma0 + gamma1 * d)), then Matern III thinning of the rest.
Observation gen_spatial_observation(const SpatialConfig& cfg, Rng& rng, std::string id = "obs");

/// Observation k uses stream rng.derive(k).
Dataset spatial_dataset(const SpatialConfig& cfg, int n_obs, const Rng& rng,
                        const std::string& id_prefix = "obs");

struct RadiusSplit {
  double radius = 0.0;
  Dataset train;
  Dataset eval;
};

/// Train and eval sets for each radius. Observation k of split s (0 train,
/// 1 eval) at radius index i uses stream rng.derive({i, s, k}).
std::vector<RadiusSplit> radius_sweep(const std::vector<double>& radii, int n_train, int n_eval,
                                      const SpatialConfig& cfg, const Rng& rng);

// ---------------------------------------------------------------------------
// Synthetic LoRaWAN transmissions

inline constexpr int kMinChannel = 9;
inline constexpr int kMaxChannel = 16;
inline constexpr int kMinSf = 8;
inline constexpr int kMaxSf = 11;

struct Transmission {
  int device = 0;
  int channel = kMinChannel;
  int sf = kMinSf;
  int power_dbm = 0;
  double delay_ms = 0.0;
  double airtime_ms = 1.0;
};

std::map<int, double> default_airtime_table();

struct LoraGenConfig {
  int n_devices = 9;
  double d_max = 2000.0;
  std::vector<int> channels{9, 10, 11, 12, 13, 14, 15, 16};
  std::vector<int> sfs{8, 9, 10, 11};
  std::map<int, double> airtime_ms = default_airtime_table();
  /// Added to the non-zero relative-delay coordinate, in airtimes.
  double relative_delay_offset = 100.0;

  void validate() const;
};

/// One transmission per device: integer delay uniform on [0, d_max], integer
/// power uniform on [-4, 23] dBm, channel and sf uniform over the configured sets.
std::vector<Transmission> gen_lora_assortment(const LoraGenConfig& cfg, Rng& rng);

/// True when the closed intervals [delay, delay + airtime] intersect.
bool concurrent(const Transmission& a, const Transmission& b);

struct LoraFeatures {
  /// const, ch_overlap, ch_sf_overlap, power (dBm), delay (ms). Power and
  /// delay are raw here; datasets mark them for standardization.
  Matrix quality;
  /// Channel one-hot over channels 9..16, then relative delay over sf 8..11:
  /// the item's own-sf coordinate is delay / airtime + offset, the others 0.
  Matrix similarity;
};

/// Throws DataError for channels or spreading factors outside the known ranges.
LoraFeatures lora_features(std::span<const Transmission> assortment, const LoraGenConfig& cfg);

/// Receiver model for synthetic labels.
///
/// FirstLock: within each (channel, sf) group the receiver locks onto the first
/// arrival and loses every later transmission that overlaps it in time;
/// transmissions that do not overlap a locked packet are received. Arrivals
/// within `lock window` of the earliest undecided one compete, and the
/// strongest (then earliest, then lowest device id) takes the lock. The window
/// is the preamble duration preamble_symbols * 2^sf / bandwidth, or zero with
/// `preamble_capture = false` (exact ties only).
struct CaptureRule {
  bool preamble_capture = true;
  double preamble_symbols = 12.25;
  double bandwidth_khz = 125.0;

  double lock_window_ms(int sf) const;
};

SubsetIndex synthetic_capture_labels(std::span<const Transmission> assortment,
                                     const CaptureRule& rule = {});

/// Columns of lora_features, concatenated quality then similarity.
FeatureSchema lora_schema();

/// Per-observation variation of the generator: device count, maximum delay and
/// the size of the channel / sf subsets are drawn uniformly from these lists.
struct LoraCampaignConfig {
  int k_min = 7;
  int k_max = 9;
  std::vector<double> d_max_choices{2000.0, 600.0};
  std::vector<int> channel_subset_sizes{2, 4, 8};
  std::vector<int> sf_subset_sizes{2, 4};
  LoraGenConfig base;
  CaptureRule rule;

  void validate() const;
};

/// Generator -> capture labels -> features, observation k from rng.derive(k).
Dataset lora_dataset(const LoraCampaignConfig& cfg, int n_obs, const Rng& rng,
                     const std::string& id_prefix = "lora");

// ---------------------------------------------------------------------------
// Well-specified determinantal data

/// Features iid N(0, 1) in every column the layout uses, choices drawn from
/// the DPP with kernel build_kernel(truth, .).
Dataset determinantal_dataset(const ModelParams& truth, int n_obs, int n_items, const Rng& rng);

}  // namespace dcm
