#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "adtrack/sequence.hpp"

namespace adtrack {

enum class Difficulty { Easy, Hard };

/// Easy: one saturated disk of a unique hue plus two small squares of
/// clearly different hues on a flat noisy grey background.
/// Hard: a ring-shaped target among `distractors` filled disks of the same
/// colour and size that hover around it, on a textured background.
struct SynthSpec {
  Difficulty difficulty = Difficulty::Easy;
  Index length = 50;
  Index width = 256;
  Index height = 192;
  double min_size = 36.0;
  double max_size = 48.0;
  double max_speed = 3.0;  // px per frame
  int distractors = -1;    // -1: 2 for easy, 5 for hard
};

struct SyntheticSequence {
  TrackSequence sequence;
  std::vector<std::vector<BoxAA>> distractors;  // per frame
  std::array<double, 3> background_mean{};
};

inline constexpr std::array<double, 3> kSyntheticBackgroundMean{0.5, 0.5, 0.5};

SyntheticSequence gen_synthetic(const SynthSpec& spec, std::uint64_t seed);

enum class SynthMix { Easy, Hard, Mixed };

SynthMix parse_synth_mix(std::string_view name);

/// `count` sequences; Mixed alternates easy and hard starting with easy.
std::vector<TrackSequence> make_synthetic_dataset(SynthMix mix, int count, Index length,
                                                  std::uint64_t seed);

bool boxes_overlap(const BoxAA& a, const BoxAA& b);

// splitmix64 step, used to derive independent child seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace adtrack
