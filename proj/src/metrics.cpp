#include "keypose/metrics.hpp"

#include "keypose/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace keypose {

namespace {

struct RankedPrediction {
  double confidence;
  std::size_t episode;
  std::size_t index;
  double error;
};

std::vector<RankedPrediction> rank_predictions(std::span<const EpisodeRecord> episodes,
                                               UnitExchange units) {
  std::vector<RankedPrediction> ranked;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& ep = episodes[e];
    for (std::size_t i = 0; i < ep.predictions.size(); ++i) {
      const auto& p = ep.predictions[i];
      if (!std::isfinite(p.confidence)) {
        throw Error(ErrorKind::InvalidArgument,
                    "non-finite confidence in episode " + ep.episode_id);
      }
      ranked.push_back({p.confidence, e, i, traj_l1(p.trajectory, ep.ground_truth, units)});
    }
  }
  std::sort(ranked.begin(), ranked.end(),
            [&](const RankedPrediction& a, const RankedPrediction& b) {
              if (a.confidence != b.confidence) return a.confidence > b.confidence;
              const auto& ida = episodes[a.episode].episode_id;
              const auto& idb = episodes[b.episode].episode_id;
              if (ida != idb) return ida < idb;
              if (a.episode != b.episode) return a.episode < b.episode;
              return a.index < b.index;
            });
  return ranked;
}

APResult ap_from_ranked(std::span<const RankedPrediction> ranked, std::size_t episode_count,
                        double threshold_cm) {
  APResult result;
  result.curve.threshold_cm = threshold_cm;
  std::vector<bool> matched(episode_count, false);
  std::size_t tp = 0;
  result.curve.points.reserve(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    if (r.error <= threshold_cm && !matched[r.episode]) {
      matched[r.episode] = true;
      ++tp;
    }
    result.curve.points.push_back({static_cast<double>(tp) / episode_count,
                                   static_cast<double>(tp) / (i + 1), r.confidence});
  }
  // Area under the precision envelope, swept from the highest recall down.
  double envelope = 0.0;
  double area = 0.0;
  const auto& pts = result.curve.points;
  for (std::size_t i = pts.size(); i-- > 0;) {
    envelope = std::max(envelope, pts[i].precision);
    const double prev_recall = i == 0 ? 0.0 : pts[i - 1].recall;
    area += (pts[i].recall - prev_recall) * envelope;
  }
  result.ap = area;
  return result;
}

}  // namespace

double pose_l1(const Pose6D& pred, const Pose6D& gt, UnitExchange units) {
  if (!(units.degrees_per_cm > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "unit exchange rate must be positive");
  }
  const double position_cm = (pred.position() - gt.position()).lpNorm<1>() * 100.0;
  const double rotation_deg = relative_angle_deg(gt.orientation(), pred.orientation());
  return position_cm + rotation_deg / units.degrees_per_cm;
}

double traj_l1(std::span<const Keypose> pred, std::span<const Keypose> gt, UnitExchange units) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(pred.size()) + " predicted vs " +
                                               std::to_string(gt.size()) + " ground-truth poses");
  }
  if (gt.empty()) throw Error(ErrorKind::LengthMismatch, "empty trajectories");
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) sum += pose_l1(pred[i].pose, gt[i].pose, units);
  return sum / static_cast<double>(gt.size());
}

double traj_l1(const Trajectory& pred, const Trajectory& gt, UnitExchange units) {
  return traj_l1(pred.keyposes(), gt.keyposes(), units);
}

double reward(const Vec3& current, const Vec3& init, const Vec3& goal) {
  const double initial = (init - goal).norm();
  if (!(initial > 1e-9)) {
    throw Error(ErrorKind::DegenerateEpisode, "initial position coincides with goal");
  }
  return std::clamp(1.0 - (current - goal).norm() / initial, 0.0, 1.0);
}

APResult compute_ap(std::span<const EpisodeRecord> episodes, double threshold_cm,
                    UnitExchange units) {
  if (episodes.empty()) throw Error(ErrorKind::InvalidArgument, "no episodes");
  const auto ranked = rank_predictions(episodes, units);
  return ap_from_ranked(ranked, episodes.size(), threshold_cm);
}

MapResult compute_map(std::span<const EpisodeRecord> episodes, UnitExchange units,
                      std::span<const double> thresholds_cm) {
  if (episodes.empty()) throw Error(ErrorKind::InvalidArgument, "no episodes");
  if (thresholds_cm.empty()) throw Error(ErrorKind::InvalidArgument, "no thresholds");
  const auto ranked = rank_predictions(episodes, units);
  MapResult result;
  double sum = 0.0;
  for (double t : thresholds_cm) {
    result.per_threshold.push_back(ap_from_ranked(ranked, episodes.size(), t));
    sum += result.per_threshold.back().ap;
  }
  result.map = sum / static_cast<double>(thresholds_cm.size());
  return result;
}

L1Summary summarize_l1(std::span<const EpisodeRecord> episodes, UnitExchange units) {
  L1Summary s;
  for (const auto& ep : episodes) {
    if (ep.predictions.empty()) continue;
    double best = std::numeric_limits<double>::infinity();
    const Prediction* top = &ep.predictions.front();
    for (const auto& p : ep.predictions) {
      best = std::min(best, traj_l1(p.trajectory, ep.ground_truth, units));
      if (p.confidence > top->confidence) top = &p;
    }
    s.mean_top1 += traj_l1(top->trajectory, ep.ground_truth, units);
    s.mean_best_of_k += best;
    ++s.episodes;
  }
  if (s.episodes > 0) {
    s.mean_top1 /= static_cast<double>(s.episodes);
    s.mean_best_of_k /= static_cast<double>(s.episodes);
  }
  return s;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share the mean rank of (i+1)..(j+1).
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::LengthMismatch, "spearman inputs differ in length");
  }
  if (a.size() < 2) throw Error(ErrorKind::InvalidArgument, "spearman needs >= 2 samples");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) {
      throw Error(ErrorKind::InvalidArgument, "NaN in spearman input");
    }
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(ra.size());
  // Mean rank is (n + 1) / 2 regardless of ties.
  const double mean = 0.5 * (n + 1.0);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw Error(ErrorKind::DegenerateInput, "constant input has no ranking");
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace keypose
