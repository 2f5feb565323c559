#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adtrack/geometry.hpp"
#include "adtrack/image.hpp"

namespace adtrack {

struct TrackSequence {
  std::string name;
  std::vector<RgbImage> frames;
  std::vector<BoxAA> gt;
};

/// One line of groundtruth.txt: 4 values (x,y,w,h) or 8 polygon
/// coordinates, converted to the enclosing axis-aligned box.
/// Throws IngestionError naming `source` and `line_no`.
BoxAA parse_groundtruth_line(std::string_view line, const std::string& source, int line_no);

/// Reads `<dir>/%08d.ppm` frames (numbered from 1, or from 0) and
/// `<dir>/groundtruth.txt`. Boxes are clamped to the frame.
TrackSequence load_sequence(const std::filesystem::path& dir);

/// Writes the layout load_sequence reads (1-based frame numbers, x,y,w,h lines).
void save_sequence(const TrackSequence& seq, const std::filesystem::path& dir);

BoxAA clamp_to_frame(const BoxAA& box, Index width, Index height);

struct KeySearchGroup {
  Index key = 0;
  std::vector<Index> search;
};

/// Key frames at 0, stride, 2*stride, ...; each paired with up to `horizon`
/// following frames, truncated at the end of the sequence.
std::vector<KeySearchGroup> make_key_search_pairs(Index frame_count, Index key_stride = 10,
                                                  Index horizon = 100);

/// Mean RGB in [0,1] over every pixel of every frame.
std::array<double, 3> dataset_mean_rgb(std::span<const TrackSequence> sequences);

}  // namespace adtrack
