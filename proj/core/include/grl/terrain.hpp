#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace grl {

/// Step, Bumpy, Hill and Rubble are the training obstacles; Channel, Incline,
/// Dune and Square are held out as new obstacles.
enum class ObstacleKind {
  kStep,
  kBumpy,
  kHill,
  kRubble,
  kChannel,
  kIncline,
  kDune,
  kSquare,
};

inline constexpr int kObstacleCount = 8;
inline constexpr int kTrainingObstacleCount = 4;

bool is_training_obstacle(ObstacleKind kind);
std::string to_string(ObstacleKind kind);
ObstacleKind obstacle_from_string(const std::string& s);
std::vector<ObstacleKind> all_obstacles();
std::vector<ObstacleKind> training_obstacles();

/// 1-D heightfield sampled on a uniform 0.05 m grid. Height is zero outside
/// [span_start, span_end].
struct Heightfield {
  ObstacleKind kind = ObstacleKind::kStep;
  std::vector<double> samples;
  double track_length = 0.0;
  double span_start = 0.0;
  double span_end = 0.0;
  std::uint64_t seed = 0;

  static constexpr double kGridStep = 0.05;
};

/// Obstacle dimensions are drawn uniformly from per-kind ranges; `scale`
/// multiplies all heights. The span [10, 45] m of a 60 m track is filled.
Heightfield generate_heightfield(ObstacleKind kind, std::uint64_t seed,
                                 double scale = 1.0);

/// Pretraining track: one instance of each training obstacle back to back.
Heightfield generate_combined_heightfield(std::uint64_t seed, double scale = 1.0);

/// Linear interpolation for height; central difference (eps = grid step,
/// clamped at track ends) for slope.
std::pair<double, double> height_and_slope(const Heightfield& hf, double x);

void write_heightfield_csv(const Heightfield& hf, std::ostream& out);

struct EnvParams {
  double dt = 0.05;
  double drive_gain = 2.0;     // c1
  double slope_gain = 5.0;     // c2
  double friction = 0.5;       // c3
  double v_max = 2.0;
  double gamma_w = 1.0;        // velocity reward weight
  double delta_w = 0.05;       // action penalty weight
  int t_end = 500;             // episode step cap
};

struct EnvState {
  double x = 0.0;
  double v = 0.0;
  int t = 0;
};

/// 6-dim observation: velocity, local slope, and height deltas 0.5/1/2/4 m
/// ahead (lookups clamp at the track end).
Eigen::VectorXd make_observation(const Heightfield& hf, const EnvState& state);

/// Single-owner crawler on a heightfield. Dynamics are deterministic: the
/// drive term is scaled by how well the second action channel matches
/// tanh(4*slope) (grip), with slope resistance and friction opposing motion.
class TerrainEnv {
 public:
  TerrainEnv(Heightfield hf, EnvParams params);

  Eigen::VectorXd reset();

  struct StepResult {
    Eigen::VectorXd observation;
    double reward = 0.0;
    double control_cost = 0.0;  // action penalty actually subtracted this step
    bool done = false;
    bool finished = false;      // reached the end of the track (vs. step cap)
  };

  /// Actions are clamped to [-1, 1]^2. Throws on NaN actions.
  StepResult step(const Eigen::Vector2d& action);

  const EnvState& state() const { return state_; }
  const Heightfield& heightfield() const { return hf_; }
  const EnvParams& params() const { return params_; }
  int observation_dim() const { return 6; }
  int action_dim() const { return 2; }

 private:
  Heightfield hf_;
  EnvParams params_;
  EnvState state_;
};

}  // namespace grl
