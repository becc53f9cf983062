#include "pmf/core/ppm.hpp"

#include <cmath>
#include <fstream>
#include <vector>

namespace pmf {

namespace {

unsigned char to_byte(float v) { return static_cast<unsigned char>(std::lround(v * 255.0f)); }

void skip_space_and_comments(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
      in.get();
    } else {
      return;
    }
  }
}

int read_header_int(std::istream& in, const std::string& path) {
  skip_space_and_comments(in);
  int v = -1;
  in >> v;
  if (!in || v < 0) throw FormatError(path + ": malformed PPM header");
  return v;
}

}  // namespace

void write_ppm(const std::string& path, const ImageGrid& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  std::vector<unsigned char> bytes(image.data().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(image.data()[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

ImageGrid read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("missing input file: " + path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P6") throw FormatError(path + ": not a binary PPM (P6)");
  const int width = read_header_int(in, path);
  const int height = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (maxval != 255) throw FormatError(path + ": only maxval 255 is supported");
  in.get();  // single whitespace before the raster
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw FormatError(path + ": truncated PPM raster");
  std::vector<float> data(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) data[i] = static_cast<float>(bytes[i]) / 255.0f;
  return ImageGrid(height, width, std::move(data));
}

ImageGrid quantize_8bit(const ImageGrid& image) {
  std::vector<float> data(image.data().begin(), image.data().end());
  for (auto& v : data) v = static_cast<float>(to_byte(v)) / 255.0f;
  return ImageGrid(image.height(), image.width(), std::move(data));
}

}  // namespace pmf
