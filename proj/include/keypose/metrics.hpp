#pragma once

#include "keypose/geometry.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace keypose {

/// Scalarization rate between rotation and translation error: how many
/// degrees of rotation count as one centimeter.
struct UnitExchange {
  double degrees_per_cm = 1.0;
};

/// 1 cm = 1 degree, used for the scalar trajectory L1 error.
inline constexpr UnitExchange kL1Units{1.0};
/// 1 cm = 10 degrees, used for mAP thresholds.
inline constexpr UnitExchange kMapUnits{10.0};

/// ||t - t_hat||_1 in cm plus angle(R_hat^-1 R) in degrees divided by the rate.
double pose_l1(const Pose6D& pred, const Pose6D& gt, UnitExchange units);

/// Mean pose L1 over keyposes. Throws LengthMismatch for unequal counts.
double traj_l1(std::span<const Keypose> pred, std::span<const Keypose> gt, UnitExchange units);
double traj_l1(const Trajectory& pred, const Trajectory& gt, UnitExchange units);

inline constexpr double kSuccessThreshold = 0.75;

/// clamp(1 - |p - goal| / |init - goal|, [0, 1]) with L2 norms. Throws
/// DegenerateEpisode when init and goal coincide (distance <= 1e-9).
double reward(const Vec3& current, const Vec3& init, const Vec3& goal);
inline bool is_success(double reward_value) { return reward_value >= kSuccessThreshold; }

struct Prediction {
  Trajectory trajectory;
  double confidence = 0.0;  // beam log-probability
};

struct EpisodeRecord {
  std::string episode_id;
  Trajectory ground_truth;
  std::vector<Prediction> predictions;
};

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
  double confidence_cut = 0.0;
};

struct PRCurve {
  double threshold_cm = 0.0;
  std::vector<PRPoint> points;  // one per prediction in confidence order
};

struct APResult {
  double ap = 0.0;
  PRCurve curve;
};

/// Detection-style average precision with trajectory L1 in place of IoU.
/// Predictions from all episodes are ranked by confidence (ties by episode id,
/// then prediction index); a prediction is a true positive iff its error is
/// within the threshold and its episode was not already matched. Recall is
/// relative to the episode count. AP is the area under the all-point
/// precision envelope.
APResult compute_ap(std::span<const EpisodeRecord> episodes, double threshold_cm,
                    UnitExchange units);

inline constexpr std::array<double, 7> kMapThresholdsCm{0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};

struct MapResult {
  double map = 0.0;
  std::vector<APResult> per_threshold;
};

MapResult compute_map(std::span<const EpisodeRecord> episodes, UnitExchange units = kMapUnits,
                      std::span<const double> thresholds_cm = kMapThresholdsCm);

/// Error of the highest-confidence prediction and the lowest error among all
/// predictions ("best of k"), averaged over episodes with predictions.
struct L1Summary {
  double mean_top1 = 0.0;
  double mean_best_of_k = 0.0;
  std::size_t episodes = 0;
};

L1Summary summarize_l1(std::span<const EpisodeRecord> episodes, UnitExchange units);

/// Ranks starting at 1; tied values share the average of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rho as the Pearson correlation of average ranks. Throws
/// LengthMismatch, InvalidArgument for fewer than 2 samples, DegenerateInput
/// when either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace keypose
