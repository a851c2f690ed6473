#include "keypose/error.hpp"
#include "keypose/metrics.hpp"
#include "keypose/random.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace keypose;

namespace {

Trajectory origin_traj() {
  return {Pose6D(Vec3(0.4, 0.1, 0.02), Quat::Identity()), Pose6D(Vec3(0.6, -0.1, 0.05), Quat::Identity())};
}

// Shifts both keyposes along x by `cm` centimeters.
Trajectory shifted(const Trajectory& t, double cm) {
  const Vec3 d(cm / 100.0, 0, 0);
  return {Pose6D(t.grasp().pose.position() + d, t.grasp().pose.orientation()),
          Pose6D(t.release().pose.position() + d, t.release().pose.orientation())};
}

Quat random_rotation(Rng& rng, double max_deg) {
  const Vec3 axis = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)).normalized();
  return Quat(Eigen::AngleAxisd(uniform(rng, 0, max_deg) * M_PI / 180.0, axis));
}

Pose6D jitter(Rng& rng, const Pose6D& p, double scale_m, double max_deg) {
  const Vec3 d(uniform(rng, -scale_m, scale_m), uniform(rng, -scale_m, scale_m), uniform(rng, -scale_m, scale_m));
  return {p.position() + d, random_rotation(rng, max_deg) * p.orientation()};
}

std::vector<EpisodeRecord> random_instance(Rng& rng) {
  std::vector<EpisodeRecord> eps;
  const std::size_t n = 1 + uniform_index(rng, 20);
  for (std::size_t e = 0; e < n; ++e) {
    const Trajectory gt(Pose6D(Vec3(uniform(rng, 0.2, 0.8), uniform(rng, -0.3, 0.3), 0.03), random_rotation(rng, 180)),
                        Pose6D(Vec3(uniform(rng, 0.2, 0.8), uniform(rng, -0.3, 0.3), 0.05), random_rotation(rng, 180)));
    EpisodeRecord ep{"ep" + std::to_string(uniform_index(rng, 8)), gt, {}};
    const std::size_t k = uniform_index(rng, 6);
    for (std::size_t i = 0; i < k; ++i) {
      const double scale = std::pow(10.0, uniform(rng, -3.5, -0.5));
      const Trajectory p(jitter(rng, gt.grasp().pose, scale, 200 * scale),
                         jitter(rng, gt.release().pose, scale, 200 * scale));
      // Few distinct confidences so ties are exercised.
      ep.predictions.push_back({p, -static_cast<double>(uniform_index(rng, 6))});
    }
    eps.push_back(std::move(ep));
  }
  return eps;
}

}  // namespace

TEST(TrajL1, IdentityIsZero) {
  EXPECT_EQ(traj_l1(origin_traj(), origin_traj(), kL1Units), 0.0);
}

TEST(TrajL1, OneCentimeterOneDegree) {
  const Trajectory gt = origin_traj();
  const Pose6D off(gt.grasp().pose.position() + Vec3(0.01, 0, 0),
                   Quat(Eigen::AngleAxisd(M_PI / 180.0, Vec3::UnitZ())));
  const Trajectory pred(off, gt.release().pose);
  EXPECT_NEAR(traj_l1(pred, gt, kL1Units), 1.0, 1e-12);
  // Same error at 10 deg/cm: (1 + 0.1) / 2.
  EXPECT_NEAR(traj_l1(pred, gt, kMapUnits), 0.55, 1e-12);
}

TEST(TrajL1, MatchesFormulaOracle) {
  Rng rng(51);
  for (int i = 0; i < 1000; ++i) {
    const Trajectory a(jitter(rng, Pose6D(), 0.5, 180), jitter(rng, Pose6D(), 0.5, 180));
    const Trajectory b(jitter(rng, Pose6D(), 0.5, 180), jitter(rng, Pose6D(), 0.5, 180));
    for (double rate : {1.0, 10.0}) {
      EXPECT_NEAR(traj_l1(a, b, {rate}), oracle::traj_l1(a, b, rate), 1e-9);
    }
  }
}

TEST(TrajL1, LengthMismatchAndBadRate) {
  const Trajectory t = origin_traj();
  const auto one = t.keyposes().first(1);
  EXPECT_THROW(traj_l1(one, t.keyposes(), kL1Units), Error);
  EXPECT_THROW(pose_l1(Pose6D(), Pose6D(), {0.0}), Error);
}

TEST(Reward, EndpointsAndClamp) {
  const Vec3 init(1, 0, 0), goal(0, 0, 0);
  EXPECT_EQ(reward(goal, init, goal), 1.0);
  EXPECT_EQ(reward(init, init, goal), 0.0);
  EXPECT_EQ(reward(Vec3(2, 0, 0), init, goal), 0.0);
  EXPECT_DOUBLE_EQ(reward(Vec3(0, 0.25, 0), init, goal), 0.75);
  EXPECT_THROW(reward(goal, goal, goal), Error);
}

TEST(Reward, SuccessBoundaryInclusive) {
  EXPECT_TRUE(is_success(0.75));
  EXPECT_FALSE(is_success(std::nextafter(0.75, 0.0)));
  EXPECT_TRUE(is_success(1.0));
}

TEST(Ap, SingleExactPrediction) {
  const Trajectory gt = origin_traj();
  const std::vector<EpisodeRecord> eps{{"a", gt, {{gt, -0.1}}}};
  for (double t : kMapThresholdsCm) EXPECT_EQ(compute_ap(eps, t, kMapUnits).ap, 1.0);
}

TEST(Ap, HandCaseHalf) {
  const Trajectory gt = origin_traj();
  const std::vector<EpisodeRecord> eps{{"a", gt, {{shifted(gt, 100.0), -0.1}, {gt, -0.2}}}};
  EXPECT_NEAR(traj_l1(shifted(gt, 100.0), gt, kMapUnits), 100.0, 1e-9);
  const APResult r = compute_ap(eps, 5.0, kMapUnits);
  EXPECT_EQ(r.ap, 0.5);
  EXPECT_EQ(r.ap, oracle::ap_bruteforce(eps, 5.0, 10.0));
  ASSERT_EQ(r.curve.points.size(), 2u);
  EXPECT_EQ(r.curve.points[0].recall, 0.0);
  EXPECT_EQ(r.curve.points[1].recall, 1.0);
  EXPECT_EQ(r.curve.points[1].precision, 0.5);
  EXPECT_EQ(r.curve.points[1].confidence_cut, -0.2);
}

TEST(Ap, RandomInstancesMatchOracle) {
  Rng rng(52);
  for (int i = 0; i < 300; ++i) {
    const auto eps = random_instance(rng);
    for (double t : kMapThresholdsCm) {
      const APResult r = compute_ap(eps, t, kMapUnits);
      ASSERT_NEAR(r.ap, oracle::ap_bruteforce(eps, t, 10.0), 1e-9) << "instance " << i << " threshold " << t;
      ASSERT_GE(r.ap, 0.0);
      ASSERT_LE(r.ap, 1.0);
      for (std::size_t k = 1; k < r.curve.points.size(); ++k) {
        ASSERT_GE(r.curve.points[k].recall, r.curve.points[k - 1].recall);
        ASSERT_LE(r.curve.points[k].confidence_cut, r.curve.points[k - 1].confidence_cut);
      }
    }
  }
}

TEST(Ap, EpisodesWithoutPredictionsLowerRecall) {
  const Trajectory gt = origin_traj();
  const std::vector<EpisodeRecord> eps{{"a", gt, {{gt, 0.0}}}, {"b", gt, {}}};
  EXPECT_EQ(compute_ap(eps, 1.0, kMapUnits).ap, 0.5);
}

TEST(Map, ExactAndFarOff) {
  const Trajectory gt = origin_traj();
  std::vector<EpisodeRecord> exact, far;
  for (int i = 0; i < 5; ++i) {
    exact.push_back({"e" + std::to_string(i), gt, {{gt, -1.0 * i}}});
    far.push_back({"e" + std::to_string(i), gt, {{shifted(gt, 1000.0), -1.0 * i}}});
  }
  EXPECT_EQ(compute_map(exact).map, 1.0);
  EXPECT_EQ(compute_map(far).map, 0.0);
  EXPECT_EQ(compute_map(exact).per_threshold.size(), kMapThresholdsCm.size());
}

TEST(Map, CohortMatchesOracleMean) {
  const Trajectory gt = origin_traj();
  std::vector<EpisodeRecord> eps;
  int i = 0;
  for (double err : {0.4, 1.5, 8.0, 60.0}) {
    eps.push_back({"c" + std::to_string(i++), gt, {{shifted(gt, err), -1.0}}});
  }
  double sum = 0.0;
  for (double t : kMapThresholdsCm) sum += oracle::ap_bruteforce(eps, t, 10.0);
  EXPECT_NEAR(compute_map(eps).map, sum / kMapThresholdsCm.size(), 1e-12);
}

TEST(L1Summary, TopAndBestOfK) {
  const Trajectory gt = origin_traj();
  const std::vector<EpisodeRecord> eps{{"a", gt, {{shifted(gt, 4.0), -0.5}, {shifted(gt, 1.0), -1.5}}},
                                       {"b", gt, {{shifted(gt, 2.0), -0.1}}},
                                       {"c", gt, {}}};
  const L1Summary s = summarize_l1(eps, kL1Units);
  EXPECT_EQ(s.episodes, 2u);
  EXPECT_NEAR(s.mean_top1, 3.0, 1e-9);
  EXPECT_NEAR(s.mean_best_of_k, 1.5, 1e-9);
}

TEST(Ranks, AverageTies) {
  const std::vector<double> v{10, 20, 20, 5, 20};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{2, 4, 4, 1, 4}));
}

TEST(Spearman, MonotoneExact) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6};
  const std::vector<double> inc{0.1, 0.5, 2, 8, 9, 100};
  const std::vector<double> dec{9, 8, 7, 3, 2, -1};
  EXPECT_EQ(spearman(a, inc), 1.0);
  EXPECT_EQ(spearman(a, dec), -1.0);
}

TEST(Spearman, RandomMatchesOracle) {
  Rng rng(53);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + uniform_index(rng, 60);
    std::vector<double> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = i % 2 ? uniform01(rng) : static_cast<double>(uniform_index(rng, 5));
      b[k] = static_cast<double>(uniform_index(rng, 7)) + (i % 3 ? 0.0 : uniform01(rng));
    }
    bool constant_a = std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; });
    bool constant_b = std::all_of(b.begin(), b.end(), [&](double x) { return x == b[0]; });
    if (constant_a || constant_b) {
      EXPECT_THROW(spearman(a, b), Error);
      continue;
    }
    ASSERT_NEAR(spearman(a, b), oracle::spearman(a, b), 1e-12);
  }
}

TEST(Spearman, InvariantUnderMonotoneTransform) {
  Rng rng(54);
  std::vector<double> a(50), b(50), b2(50);
  for (int k = 0; k < 50; ++k) {
    a[k] = uniform01(rng);
    b[k] = uniform(rng, 0.1, 3);
    b2[k] = std::exp(3 * b[k]);
  }
  EXPECT_NEAR(spearman(a, b), spearman(a, b2), 1e-12);
  EXPECT_NEAR(spearman(a, b), spearman(b, a), 1e-15);
}

TEST(Spearman, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, c{4, 4, 4}, one{1};
  EXPECT_THROW(spearman(a, b), Error);
  EXPECT_THROW(spearman(a, c), Error);
  EXPECT_THROW(spearman(one, one), Error);
}
