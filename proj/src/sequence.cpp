#include "adtrack/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace adtrack {

namespace {

std::filesystem::path frame_path(const std::filesystem::path& dir, Index number) {
  char name[32];
  std::snprintf(name, sizeof name, "%08ld.ppm", static_cast<long>(number));
  return dir / name;
}

}  // namespace

BoxAA parse_groundtruth_line(std::string_view line, const std::string& source, int line_no) {
  const auto fail = [&](const std::string& why) {
    return IngestionError(source + ":" + std::to_string(line_no) + ": " + why);
  };
  std::vector<double> values;
  std::string token;
  std::string text(line);
  for (char& ch : text)
    if (ch == '\t' || ch == ' ' || ch == '\r') ch = ',';
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      throw fail("malformed value '" + token + "'");
    }
    if (used != token.size() || !std::isfinite(v)) throw fail("malformed value '" + token + "'");
    values.push_back(v);
  }

  if (values.size() == 4) {
    if (values[2] <= 0.0 || values[3] <= 0.0) throw fail("box extents must be positive");
    return {values[0], values[1], values[2], values[3]};
  }
  if (values.size() == 8) {
    double x0 = values[0], x1 = values[0], y0 = values[1], y1 = values[1];
    for (int i = 0; i < 4; ++i) {
      x0 = std::min(x0, values[2 * i]);
      x1 = std::max(x1, values[2 * i]);
      y0 = std::min(y0, values[2 * i + 1]);
      y1 = std::max(y1, values[2 * i + 1]);
    }
    if (x1 <= x0 || y1 <= y0) throw fail("degenerate polygon");
    return {x0, y0, x1 - x0, y1 - y0};
  }
  throw fail("expected 4 or 8 comma-separated values, got " + std::to_string(values.size()));
}

BoxAA clamp_to_frame(const BoxAA& box, Index width, Index height) {
  const double x0 = std::clamp(box.x, 0.0, double(width - 1));
  const double y0 = std::clamp(box.y, 0.0, double(height - 1));
  const double x1 = std::clamp(box.x + box.w, x0 + 1.0, double(width));
  const double y1 = std::clamp(box.y + box.h, y0 + 1.0, double(height));
  return {x0, y0, x1 - x0, y1 - y0};
}

TrackSequence load_sequence(const std::filesystem::path& dir) {
  const auto gt_path = dir / "groundtruth.txt";
  std::ifstream in(gt_path);
  if (!in) throw IngestionError(gt_path.string() + ": cannot open annotations");

  TrackSequence seq;
  seq.name = dir.filename().string();
  if (seq.name.empty()) seq.name = dir.parent_path().filename().string();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    seq.gt.push_back(parse_groundtruth_line(line, gt_path.string(), line_no));
  }

  Index ppm_files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".ppm") ++ppm_files;
  if (ppm_files != Index(seq.gt.size()))
    throw IngestionError(dir.string() + ": " + std::to_string(ppm_files) + " frames but " +
                         std::to_string(seq.gt.size()) + " annotation lines");

  const Index first = std::filesystem::exists(frame_path(dir, 1)) ? 1 : 0;
  for (Index i = 0; i < Index(seq.gt.size()); ++i) {
    const auto path = frame_path(dir, first + i);
    if (!std::filesystem::exists(path)) throw IngestionError(path.string() + ": missing frame");
    seq.frames.push_back(read_ppm(path));
    seq.gt[std::size_t(i)] = clamp_to_frame(seq.gt[std::size_t(i)], seq.frames.back().width,
                                            seq.frames.back().height);
  }
  return seq;
}

void save_sequence(const TrackSequence& seq, const std::filesystem::path& dir) {
  require(seq.frames.size() == seq.gt.size(), "save_sequence: frame/annotation count mismatch");
  std::filesystem::create_directories(dir);
  std::ofstream gt(dir / "groundtruth.txt");
  gt.precision(17);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    write_ppm(seq.frames[i], frame_path(dir, Index(i) + 1));
    const BoxAA& b = seq.gt[i];
    gt << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
  }
}

std::vector<KeySearchGroup> make_key_search_pairs(Index frame_count, Index key_stride, Index horizon) {
  require(frame_count >= 1, "make_key_search_pairs: empty sequence");
  require(key_stride >= 1 && horizon >= 0, "make_key_search_pairs: bad stride/horizon");
  std::vector<KeySearchGroup> groups;
  for (Index key = 0; key < frame_count; key += key_stride) {
    KeySearchGroup g;
    g.key = key;
    for (Index s = key + 1; s < frame_count && s <= key + horizon; ++s) g.search.push_back(s);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::array<double, 3> dataset_mean_rgb(std::span<const TrackSequence> sequences) {
  std::array<double, 3> sum{};
  double count = 0.0;
  for (const auto& seq : sequences)
    for (const auto& frame : seq.frames) {
      for (std::size_t i = 0; i < frame.pixels.size(); ++i) sum[i % 3] += frame.pixels[i];
      count += double(frame.width * frame.height);
    }
  require(count > 0.0, "dataset_mean_rgb: no pixels");
  for (double& s : sum) s /= 255.0 * count;
  return sum;
}

}  // namespace adtrack
