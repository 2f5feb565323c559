#include "adtrack/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

namespace adtrack {

namespace {

std::string stratum(const std::string& name) {
  if (!name.starts_with("synth-")) return {};
  return name.substr(0, name.rfind('-'));
}

}  // namespace

Dataset load_dataset(const DatasetSource& source) {
  require(source.dir.has_value() != source.synthetic.has_value(),
          "load_dataset: give exactly one of a directory or a synthetic mix");
  Dataset out;
  if (source.synthetic) {
    require(source.count > 0 && source.length > 1, "load_dataset: synthetic count and length must be positive");
    out.sequences = make_synthetic_dataset(*source.synthetic, source.count, source.length, source.seed);
    out.pad_fill = kSyntheticBackgroundMean;
    return out;
  }
  const auto& dir = *source.dir;
  if (!std::filesystem::is_directory(dir)) throw IngestionError(dir.string() + ": not a directory");
  if (std::filesystem::exists(dir / "groundtruth.txt")) {
    out.sequences.push_back(load_sequence(dir));
  } else {
    std::vector<std::filesystem::path> subdirs;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_directory()) subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& sub : subdirs) out.sequences.push_back(load_sequence(sub));
  }
  if (out.sequences.empty()) throw IngestionError(dir.string() + ": no sequences found");
  out.pad_fill = dataset_mean_rgb(out.sequences);
  return out;
}

Split split_sequences(std::vector<TrackSequence> sequences, double test_fraction, std::uint64_t seed) {
  require(test_fraction >= 0.0 && test_fraction < 1.0, "split_sequences: fraction must be in [0,1)");
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < sequences.size(); ++i) strata[stratum(sequences[i].name)].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<bool> held(sequences.size(), false);
  for (auto& [key, members] : strata) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = std::size_t(std::lround(test_fraction * double(members.size())));
    for (std::size_t i = 0; i < n; ++i) held[members[i]] = true;
  }
  Split out;
  for (std::size_t i = 0; i < sequences.size(); ++i)
    (held[i] ? out.test : out.train).push_back(std::move(sequences[i]));
  return out;
}

}  // namespace adtrack
