#include "grl/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "grl/csv.hpp"
#include "grl/rng.hpp"

namespace grl {

bool is_training_obstacle(ObstacleKind kind) {
  switch (kind) {
    case ObstacleKind::kStep:
    case ObstacleKind::kBumpy:
    case ObstacleKind::kHill:
    case ObstacleKind::kRubble:
      return true;
    default:
      return false;
  }
}

std::string to_string(ObstacleKind kind) {
  switch (kind) {
    case ObstacleKind::kStep: return "step";
    case ObstacleKind::kBumpy: return "bumpy";
    case ObstacleKind::kHill: return "hill";
    case ObstacleKind::kRubble: return "rubble";
    case ObstacleKind::kChannel: return "channel";
    case ObstacleKind::kIncline: return "incline";
    case ObstacleKind::kDune: return "dune";
    case ObstacleKind::kSquare: return "square";
  }
  return "step";
}

ObstacleKind obstacle_from_string(const std::string& s) {
  for (ObstacleKind kind : all_obstacles()) {
    if (to_string(kind) == s) return kind;
  }
  throw std::invalid_argument("unknown obstacle kind: " + s);
}

std::vector<ObstacleKind> all_obstacles() {
  return {ObstacleKind::kStep,    ObstacleKind::kBumpy,   ObstacleKind::kHill,
          ObstacleKind::kRubble,  ObstacleKind::kChannel, ObstacleKind::kIncline,
          ObstacleKind::kDune,    ObstacleKind::kSquare};
}

std::vector<ObstacleKind> training_obstacles() {
  return {ObstacleKind::kStep, ObstacleKind::kBumpy, ObstacleKind::kHill,
          ObstacleKind::kRubble};
}

namespace {

constexpr double kTrackLength = 60.0;
constexpr double kSpanStart = 10.0;
constexpr double kSpanEnd = 45.0;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

struct Raster {
  std::vector<double>& samples;
  double step;

  // Applies f(x) over [x0, x1]; f must be 0 at both ends so the field stays
  // continuous with the surrounding flat ground.
  template <typename F>
  void apply(double x0, double x1, F&& f) {
    const auto lo = static_cast<std::size_t>(std::ceil(x0 / step - 1e-9));
    const auto hi = static_cast<std::size_t>(std::floor(x1 / step + 1e-9));
    for (std::size_t i = lo; i <= hi && i < samples.size(); ++i) {
      samples[i] = f(i * step);
    }
  }
};

void fill_step(Raster& r, Rng& rng, double scale, double lo, double hi) {
  double x = lo;
  while (true) {
    const int flights = uniform_int(rng, 3, 6);
    const double max_tread = (hi - x) / (2.0 * flights - 1.0);
    if (max_tread < 2.0) break;
    const double tread = uniform(rng, 2.0, std::min(3.0, max_tread));
    // Staircase: `flights` treads climbing, then a mirrored descent back to
    // ground level. Riser height is redrawn per step. Rasterized in one pass
    // so tread boundaries jump by exactly one riser.
    std::vector<double> levels;
    double level = 0.0;
    for (int k = 0; k < flights; ++k) {
      level += uniform(rng, 0.10, 0.13) * scale;
      levels.push_back(level);
    }
    for (int k = flights - 2; k >= 0; --k) levels.push_back(levels[k]);
    const double x0 = x;
    const double width = static_cast<double>(levels.size()) * tread;
    r.apply(x0, x0 + width - 1e-12, [&levels, x0, tread](double xi) {
      auto idx = static_cast<std::size_t>((xi - x0) / tread);
      if (idx >= levels.size()) idx = levels.size() - 1;
      return levels[idx];
    });
    x += width + uniform(rng, 1.0, 2.0);
    if (x >= hi - 1.0) break;
  }
}

void fill_bumpy(Raster& r, Rng& rng, double scale, double lo, double hi) {
  const double width = 2.0;
  const double ramp = 0.6;
  double x = lo;
  while (x + width <= hi) {
    const double h = uniform(rng, -0.20, 0.24) * scale;
    r.apply(x, x + width, [=](double xi) {
      const double u = xi - x;
      if (u < ramp) return h * (u / ramp);
      if (u > width - ramp) return h * ((width - u) / ramp);
      return h;
    });
    x += width + uniform(rng, 0.5, 1.5);
  }
}

void fill_hill(Raster& r, Rng& rng, double scale, double lo, double hi) {
  double x = lo;
  while (true) {
    const double w = uniform(rng, 4.0, std::min(10.0, hi - x));
    if (hi - x < 4.0) break;
    const double h = uniform(rng, 0.15, 0.60) * scale;
    r.apply(x, x + w, [=](double xi) {
      return h * std::sin(std::numbers::pi * (xi - x) / w);
    });
    x += w + uniform(rng, 1.0, 2.0);
    if (x >= hi - 4.0) break;
  }
}

void fill_rubble(Raster& r, Rng& rng, double scale, double lo, double hi) {
  double x = lo;
  while (x + 2.0 <= hi) {
    const double w = uniform(rng, 2.0, std::min(4.0, hi - x));
    const double h = uniform(rng, 0.25, 0.50) * scale;
    r.apply(x, x + w, [=](double xi) {
      const double u = (xi - x) / w;
      return h * (1.0 - std::abs(2.0 * u - 1.0));
    });
    x += w + uniform(rng, 0.5, 1.5);
  }
}

void fill_channel(Raster& r, Rng& rng, double scale, double lo, double hi) {
  const double wall = 0.3;
  double x = lo;
  while (x + 2.0 * wall + 1.0 <= hi) {
    const double w = uniform(rng, 1.0, 2.0) + 2.0 * wall;
    const double d = uniform(rng, 0.15, 0.30) * scale;
    r.apply(x, x + w, [=](double xi) {
      const double u = xi - x;
      if (u < wall) return -d * (u / wall);
      if (u > w - wall) return -d * ((w - u) / wall);
      return -d;
    });
    x += w + uniform(rng, 1.0, 2.0);
  }
}

void fill_incline(Raster& r, Rng& rng, double scale, double lo, double hi) {
  // One long ramp up at a constant grade and back down.
  const double m = uniform(rng, 0.05, 0.15) * scale;
  const double mid = 0.5 * (lo + hi);
  r.apply(lo, hi, [=](double xi) {
    return xi <= mid ? m * (xi - lo) : m * (hi - xi);
  });
}

void fill_dune(Raster& r, Rng& rng, double scale, double lo, double hi) {
  // Long gentle windward rise, short steep lee drop.
  double x = lo;
  while (true) {
    const double w = uniform(rng, 3.0, std::min(6.0, hi - x));
    if (hi - x < 3.0) break;
    const double h = uniform(rng, 0.20, 0.50) * scale;
    const double crest = 0.7 * w;
    r.apply(x, x + w, [=](double xi) {
      const double u = xi - x;
      if (u <= crest) return h * std::sin(0.5 * std::numbers::pi * u / crest);
      return h * std::sin(0.5 * std::numbers::pi * (w - u) / (w - crest));
    });
    x += w + uniform(rng, 1.0, 2.0);
    if (x >= hi - 3.0) break;
  }
}

void fill_square(Raster& r, Rng& rng, double scale, double lo, double hi) {
  double x = lo;
  while (x + 1.0 <= hi) {
    const double w = uniform(rng, 1.0, std::min(3.0, hi - x));
    const double h = uniform(rng, 0.15, 0.30) * scale;
    r.apply(x, x + w, [=](double) { return h; });
    x += w + uniform(rng, 1.0, 2.0);
  }
}

void fill_span(ObstacleKind kind, Raster& r, Rng& rng, double scale, double lo,
               double hi) {
  switch (kind) {
    case ObstacleKind::kStep: fill_step(r, rng, scale, lo, hi); break;
    case ObstacleKind::kBumpy: fill_bumpy(r, rng, scale, lo, hi); break;
    case ObstacleKind::kHill: fill_hill(r, rng, scale, lo, hi); break;
    case ObstacleKind::kRubble: fill_rubble(r, rng, scale, lo, hi); break;
    case ObstacleKind::kChannel: fill_channel(r, rng, scale, lo, hi); break;
    case ObstacleKind::kIncline: fill_incline(r, rng, scale, lo, hi); break;
    case ObstacleKind::kDune: fill_dune(r, rng, scale, lo, hi); break;
    case ObstacleKind::kSquare: fill_square(r, rng, scale, lo, hi); break;
  }
}

Heightfield make_flat(double length) {
  Heightfield hf;
  hf.track_length = length;
  hf.samples.assign(static_cast<std::size_t>(std::llround(length / Heightfield::kGridStep)) + 1, 0.0);
  return hf;
}

}  // namespace

Heightfield generate_heightfield(ObstacleKind kind, std::uint64_t seed, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be > 0");
  Heightfield hf = make_flat(kTrackLength);
  hf.kind = kind;
  hf.seed = seed;
  hf.span_start = kSpanStart;
  hf.span_end = kSpanEnd;
  Rng rng = make_rng(seed_stream(seed, static_cast<std::uint64_t>(kind), stream::kHeightfield));
  Raster raster{hf.samples, Heightfield::kGridStep};
  fill_span(kind, raster, rng, scale, kSpanStart, kSpanEnd);
  return hf;
}

Heightfield generate_combined_heightfield(std::uint64_t seed, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be > 0");
  const auto kinds = training_obstacles();
  const double segment = kSpanEnd - kSpanStart;  // 35 m per obstacle block
  const double gap = 5.0;
  const double length = kSpanStart + kinds.size() * segment + (kinds.size() - 1) * gap + 15.0;
  Heightfield hf = make_flat(length);
  hf.kind = kinds.front();  // nominal; combined tracks are not a kind of their own
  hf.seed = seed;
  hf.span_start = kSpanStart;
  hf.span_end = kSpanStart + kinds.size() * segment + (kinds.size() - 1) * gap;
  Raster raster{hf.samples, Heightfield::kGridStep};
  double lo = kSpanStart;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    Rng rng = make_rng(seed_stream(seed, static_cast<std::uint64_t>(kinds[i]), i, stream::kHeightfield));
    fill_span(kinds[i], raster, rng, scale, lo, lo + segment);
    lo += segment + gap;
  }
  return hf;
}

std::pair<double, double> height_and_slope(const Heightfield& hf, double x) {
  if (!(x >= 0.0 && x <= hf.track_length)) {
    throw std::out_of_range("height_and_slope: x outside track");
  }
  const double step = Heightfield::kGridStep;
  const auto at = [&](double xi) {
    const double u = xi / step;
    const double nearest = std::round(u);
    if (std::abs(u - nearest) < 1e-9) {
      const auto i = std::min(static_cast<std::size_t>(nearest), hf.samples.size() - 1);
      return hf.samples[i];
    }
    const auto i = static_cast<std::size_t>(u);
    const double t = u - static_cast<double>(i);
    return hf.samples[i] * (1.0 - t) + hf.samples[std::min(i + 1, hf.samples.size() - 1)] * t;
  };
  const double h = at(x);
  const double xl = std::max(0.0, x - step);
  const double xr = std::min(hf.track_length, x + step);
  const double s = (at(xr) - at(xl)) / (xr - xl);
  return {h, s};
}

void write_heightfield_csv(const Heightfield& hf, std::ostream& out) {
  CsvWriter csv(out);
  csv.header("x,h");
  for (std::size_t i = 0; i < hf.samples.size(); ++i) {
    csv.cell(i * Heightfield::kGridStep).cell(hf.samples[i]);
    csv.end_row();
  }
}

Eigen::VectorXd make_observation(const Heightfield& hf, const EnvState& state) {
  const auto [h0, slope] = height_and_slope(hf, state.x);
  const auto ahead = [&](double dx) {
    const double xi = std::min(state.x + dx, hf.track_length);
    return height_and_slope(hf, xi).first - h0;
  };
  Eigen::VectorXd obs(6);
  obs << state.v, slope, ahead(0.5), ahead(1.0), ahead(2.0), ahead(4.0);
  return obs;
}

TerrainEnv::TerrainEnv(Heightfield hf, EnvParams params)
    : hf_(std::move(hf)), params_(params) {}

Eigen::VectorXd TerrainEnv::reset() {
  state_ = EnvState{};
  return make_observation(hf_, state_);
}

TerrainEnv::StepResult TerrainEnv::step(const Eigen::Vector2d& action) {
  if (!action.allFinite()) throw std::invalid_argument("env step: NaN action");
  const double a1 = std::clamp(action[0], -1.0, 1.0);
  const double a2 = std::clamp(action[1], -1.0, 1.0);

  const double slope = height_and_slope(hf_, state_.x).second;
  const double grip = 1.0 - std::min(1.0, std::abs(a2 - std::tanh(4.0 * slope)));
  const double acc = params_.drive_gain * a1 * (0.5 + 0.5 * grip) -
                     params_.slope_gain * slope - params_.friction * state_.v;
  const double v = std::clamp(state_.v + params_.dt * acc, -params_.v_max, params_.v_max);
  const double x_raw = state_.x + params_.dt * v;

  state_.v = v;
  state_.x = std::clamp(x_raw, 0.0, hf_.track_length);
  state_.t += 1;

  StepResult result;
  result.finished = x_raw >= hf_.track_length;
  result.done = result.finished || state_.t >= params_.t_end;
  result.control_cost = params_.delta_w * (a1 * a1 + a2 * a2);
  result.reward = params_.gamma_w * v - result.control_cost;
  result.observation = make_observation(hf_, state_);
  return result;
}

}  // namespace grl
