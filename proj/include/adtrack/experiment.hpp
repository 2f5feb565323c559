#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "adtrack/sequence.hpp"
#include "adtrack/synthetic.hpp"

namespace adtrack {

/// Where a run's sequences come from: a directory, or the synthetic generator.
struct DatasetSource {
  std::optional<std::filesystem::path> dir;
  std::optional<SynthMix> synthetic;
  int count = 12;
  Index length = 50;
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<TrackSequence> sequences;
  std::array<double, 3> pad_fill{};  // dataset mean RGB
};

/// A directory holding groundtruth.txt is one sequence; otherwise every
/// subdirectory (in name order) is one. Synthetic data uses the generator's
/// background mean as fill, loaded data its measured mean RGB.
Dataset load_dataset(const DatasetSource& source);

struct Split {
  std::vector<TrackSequence> train;
  std::vector<TrackSequence> test;
};

/// Seeded hold-out of round(test_fraction * n) sequences per stratum. Synthetic
/// sequences are stratified by difficulty, everything else forms one stratum.
Split split_sequences(std::vector<TrackSequence> sequences, double test_fraction, std::uint64_t seed);

inline constexpr double kHoldOutFraction = 0.25;

}  // namespace adtrack
