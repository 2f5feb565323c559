#include "adtrack/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

namespace adtrack {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::vector<char>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char ch = bytes[pos];
    if (ch == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
    token.push_back(bytes[pos++]);
  return token;
}

}  // namespace

Tensor RgbImage::to_tensor() const {
  Tensor out({3, height, width});
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) out(c, y, x) = at(x, y, c) / 255.0;
  return out;
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path.string() + ": cannot open image");
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P6") throw IngestionError(path.string() + ": not a binary PPM (P6)");
  Index dims[3];
  for (Index& d : dims) {
    const std::string tok = next_token(bytes, pos);
    try {
      d = std::stol(tok);
    } catch (const std::exception&) {
      throw IngestionError(path.string() + ": malformed PPM header");
    }
  }
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] != 255)
    throw IngestionError(path.string() + ": unsupported PPM geometry or maxval");
  ++pos;  // single whitespace byte after maxval

  RgbImage image(dims[0], dims[1]);
  if (bytes.size() < pos + image.pixels.size())
    throw IngestionError(path.string() + ": truncated pixel data");
  std::copy_n(bytes.begin() + std::ptrdiff_t(pos), image.pixels.size(), image.pixels.begin());
  return image;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write image");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), std::streamsize(image.pixels.size()));
}

}  // namespace adtrack
