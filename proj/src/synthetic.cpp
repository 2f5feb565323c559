#include "adtrack/synthetic.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace adtrack {

namespace {

constexpr int kSubsamples = 4;
constexpr double kNoiseSigma = 0.04;
constexpr double kRingInner = 0.5;  // inner radius relative to outer

enum class ShapeKind { Disk, Ring, Square };

struct Shape2D {
  ShapeKind kind;
  BoxAA box;
  std::array<double, 3> color;
};

std::array<double, 3> hsv_color(double hue_deg, double sat, double val) {
  const double h = std::fmod(hue_deg, 360.0) / 60.0;
  const double c = val * sat;
  const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  const double m = val - c;
  std::array<double, 3> rgb{};
  switch (int(h) % 6) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  for (double& v : rgb) v += m;
  return rgb;
}

bool covers(const Shape2D& s, double px, double py) {
  const Point c = s.box.center();
  if (s.kind == ShapeKind::Square)
    return px >= s.box.x && px < s.box.x + s.box.w && py >= s.box.y && py < s.box.y + s.box.h;
  const double u = (px - c.x) / (0.5 * s.box.w);
  const double v = (py - c.y) / (0.5 * s.box.h);
  const double r2 = u * u + v * v;
  if (r2 > 1.0) return false;
  return s.kind == ShapeKind::Disk || r2 >= kRingInner * kRingInner;
}

class Canvas {
 public:
  Canvas(Index w, Index h) : w_(w), h_(h), data_(std::size_t(3 * w * h), 0.0) {}

  double& at(Index x, Index y, int c) { return data_[std::size_t(3 * (y * w_ + x) + c)]; }

  void draw(const Shape2D& s) {
    const Index x0 = std::max<Index>(0, Index(std::floor(s.box.x)));
    const Index y0 = std::max<Index>(0, Index(std::floor(s.box.y)));
    const Index x1 = std::min<Index>(w_ - 1, Index(std::ceil(s.box.x + s.box.w)));
    const Index y1 = std::min<Index>(h_ - 1, Index(std::ceil(s.box.y + s.box.h)));
    for (Index y = y0; y <= y1; ++y)
      for (Index x = x0; x <= x1; ++x) {
        int hits = 0;
        for (int j = 0; j < kSubsamples; ++j)
          for (int i = 0; i < kSubsamples; ++i)
            hits += covers(s, double(x) + (i + 0.5) / kSubsamples, double(y) + (j + 0.5) / kSubsamples);
        if (hits == 0) continue;
        const double a = double(hits) / (kSubsamples * kSubsamples);
        for (int c = 0; c < 3; ++c) at(x, y, c) = (1.0 - a) * at(x, y, c) + a * s.color[c];
      }
  }

  RgbImage quantize(std::mt19937_64& rng) const {
    std::normal_distribution<double> noise(0.0, kNoiseSigma);
    RgbImage out(w_, h_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const double v = std::clamp(data_[i] + noise(rng), 0.0, 1.0);
      out.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
  }

 private:
  Index w_, h_;
  std::vector<double> data_;
};

struct Texture {
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<std::vector<Wave>, 3> waves;

  static Texture random(std::mt19937_64& rng) {
    Texture t;
    std::uniform_real_distribution<double> period(10.0, 40.0), angle(0.0, 2.0 * std::numbers::pi),
        amp(0.03, 0.06);
    for (auto& channel : t.waves)
      for (int k = 0; k < 4; ++k) {
        const double p = period(rng), a = angle(rng);
        channel.push_back({std::cos(a) / p, std::sin(a) / p, angle(rng), amp(rng)});
      }
    return t;
  }

  double value(int c, double x, double y) const {
    double v = 0.0;
    for (const Wave& w : waves[c])
      v += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
    return v;
  }
};

struct Mover {
  Point center;
  Point velocity;
};

void step_mover(Mover& m, double max_speed, double half_w, double half_h, Index width, Index height,
                std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 0.5);
  m.velocity.x += jitter(rng);
  m.velocity.y += jitter(rng);
  const double speed = std::hypot(m.velocity.x, m.velocity.y);
  if (speed > max_speed) {
    m.velocity.x *= max_speed / speed;
    m.velocity.y *= max_speed / speed;
  }
  m.center.x += m.velocity.x;
  m.center.y += m.velocity.y;
  const double lo_x = half_w + 1.0, hi_x = double(width) - half_w - 1.0;
  const double lo_y = half_h + 1.0, hi_y = double(height) - half_h - 1.0;
  if (m.center.x < lo_x || m.center.x > hi_x) {
    m.velocity.x = -m.velocity.x;
    m.center.x = std::clamp(m.center.x, lo_x, hi_x);
  }
  if (m.center.y < lo_y || m.center.y > hi_y) {
    m.velocity.y = -m.velocity.y;
    m.center.y = std::clamp(m.center.y, lo_y, hi_y);
  }
}

}  // namespace

bool boxes_overlap(const BoxAA& a, const BoxAA& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

SyntheticSequence gen_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  require(spec.length >= 1, "gen_synthetic: length must be >= 1");
  require(spec.min_size > 4.0 && spec.max_size >= spec.min_size, "gen_synthetic: bad size range");
  require(spec.width > 3 * spec.max_size && spec.height > 3 * spec.max_size,
          "gen_synthetic: frame too small for the target size");
  const bool hard = spec.difficulty == Difficulty::Hard;
  const int n_distractors = spec.distractors >= 0 ? spec.distractors : (hard ? 5 : 2);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double size = uniform(spec.min_size, spec.max_size);
  const double tw = size, th = size * uniform(0.85, 1.15);
  const double hue = uniform(0.0, 360.0);
  const auto target_color = hsv_color(hue, 0.85, 0.9);
  const Texture texture = Texture::random(rng);

  Mover target{{uniform(1.5 * tw, spec.width - 1.5 * tw), uniform(1.5 * th, spec.height - 1.5 * th)},
               {uniform(-1.0, 1.0), uniform(-1.0, 1.0)}};

  // Easy: free-roaming squares of distant hues. Hard: same-looking disks orbiting the target.
  struct Distractor {
    Mover mover;
    double radius, angle, omega;
    double w, h;
    std::array<double, 3> color;
  };
  std::vector<Distractor> distractors;
  for (int k = 0; k < n_distractors; ++k) {
    Distractor d{};
    if (hard) {
      d.w = tw;
      d.h = th;
      d.color = target_color;
      d.radius = uniform(1.3, 2.4) * size;
      d.angle = 2.0 * std::numbers::pi * (double(k) + uniform(0.0, 0.6)) / n_distractors;
      d.omega = uniform(-0.06, 0.06);
    } else {
      d.w = d.h = 0.6 * size;
      d.color = hsv_color(hue + uniform(120.0, 240.0), 0.6, 0.7);
      d.mover = {{uniform(d.w, spec.width - d.w), uniform(d.h, spec.height - d.h)},
                 {uniform(-1.0, 1.0), uniform(-1.0, 1.0)}};
    }
    distractors.push_back(d);
  }

  SyntheticSequence out;
  out.background_mean = kSyntheticBackgroundMean;
  out.sequence.name = std::string(hard ? "synth-hard-" : "synth-easy-") + std::to_string(seed % 100000);

  for (Index f = 0; f < spec.length; ++f) {
    if (f > 0) step_mover(target, spec.max_speed, 0.5 * tw, 0.5 * th, spec.width, spec.height, rng);
    const BoxAA target_box = BoxAA::centered(target.center, tw, th);

    std::vector<BoxAA> boxes;
    for (Distractor& d : distractors) {
      Point c;
      if (hard) {
        if (f > 0) {
          d.angle += d.omega;
          d.radius = std::clamp(d.radius + uniform(-0.05, 0.05) * size, 1.25 * size, 2.6 * size);
        }
        c = {target.center.x + d.radius * std::cos(d.angle), target.center.y + d.radius * std::sin(d.angle)};
        c.x = std::clamp(c.x, 0.5 * d.w + 1.0, spec.width - 0.5 * d.w - 1.0);
        c.y = std::clamp(c.y, 0.5 * d.h + 1.0, spec.height - 0.5 * d.h - 1.0);
      } else {
        if (f > 0) step_mover(d.mover, spec.max_speed, 0.5 * d.w, 0.5 * d.h, spec.width, spec.height, rng);
        // Push away from the target when they would touch, along the shortest
        // side that stays clear after clamping to the frame.
        const double min_dx = 0.5 * (tw + d.w) + 2.0, min_dy = 0.5 * (th + d.h) + 2.0;
        const double dx = d.mover.center.x - target.center.x, dy = d.mover.center.y - target.center.y;
        if (std::abs(dx) < min_dx && std::abs(dy) < min_dy) {
          const auto clamped = [&](Point p) {
            return Point{std::clamp(p.x, 0.5 * d.w + 1.0, spec.width - 0.5 * d.w - 1.0),
                         std::clamp(p.y, 0.5 * d.h + 1.0, spec.height - 0.5 * d.h - 1.0)};
          };
          std::array<std::pair<double, Point>, 4> moves{{
              {min_dx - dx, {target.center.x + min_dx, d.mover.center.y}},
              {min_dx + dx, {target.center.x - min_dx, d.mover.center.y}},
              {min_dy - dy, {d.mover.center.x, target.center.y + min_dy}},
              {min_dy + dy, {d.mover.center.x, target.center.y - min_dy}},
          }};
          std::stable_sort(moves.begin(), moves.end(),
                           [](const auto& a, const auto& b) { return a.first < b.first; });
          Point placed = clamped(moves[0].second);
          for (const auto& [cost, p] : moves) {
            const Point q = clamped(p);
            if (!boxes_overlap(BoxAA::centered(q, d.w, d.h), target_box)) {
              placed = q;
              break;
            }
          }
          d.mover.center = placed;
          d.mover.velocity = {-d.mover.velocity.x, -d.mover.velocity.y};
        }
        c = d.mover.center;
      }
      boxes.push_back(BoxAA::centered(c, d.w, d.h));
    }

    Canvas canvas(spec.width, spec.height);
    for (Index y = 0; y < spec.height; ++y)
      for (Index x = 0; x < spec.width; ++x)
        for (int c = 0; c < 3; ++c)
          canvas.at(x, y, c) = kSyntheticBackgroundMean[c] + (hard ? texture.value(c, double(x), double(y)) : 0.0);
    for (std::size_t k = 0; k < boxes.size(); ++k)
      canvas.draw({hard ? ShapeKind::Disk : ShapeKind::Square, boxes[k], distractors[k].color});
    canvas.draw({hard ? ShapeKind::Ring : ShapeKind::Disk, target_box, target_color});

    out.sequence.frames.push_back(canvas.quantize(rng));
    out.sequence.gt.push_back(target_box);
    out.distractors.push_back(std::move(boxes));
  }
  return out;
}

SynthMix parse_synth_mix(std::string_view name) {
  if (name == "easy") return SynthMix::Easy;
  if (name == "hard") return SynthMix::Hard;
  if (name == "mixed") return SynthMix::Mixed;
  throw ContractViolation("unknown synthetic dataset '" + std::string(name) + "' (easy|hard|mixed)");
}

std::vector<TrackSequence> make_synthetic_dataset(SynthMix mix, int count, Index length,
                                                  std::uint64_t seed) {
  std::vector<TrackSequence> out;
  for (int i = 0; i < count; ++i) {
    SynthSpec spec;
    spec.length = length;
    spec.difficulty = (mix == SynthMix::Hard || (mix == SynthMix::Mixed && i % 2 == 1))
                          ? Difficulty::Hard
                          : Difficulty::Easy;
    auto seq = gen_synthetic(spec, derive_seed(seed, std::uint64_t(i))).sequence;
    char name[48];
    std::snprintf(name, sizeof name, "synth-%s-%03d",
                  spec.difficulty == Difficulty::Hard ? "hard" : "easy", i);
    seq.name = name;
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace adtrack
