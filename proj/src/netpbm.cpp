#include "coordfit/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace coordfit {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
int read_header_int(std::istream& in, const std::filesystem::path& path) {
  for (;;) {
    const int c = in.peek();
    if (c == EOF) throw std::runtime_error("truncated netpbm header: " + path.string());
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = 0;
  if (!(in >> v)) throw std::runtime_error("malformed netpbm header: " + path.string());
  return v;
}

}  // namespace

NetpbmImage read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    throw std::runtime_error("not a binary PGM/PPM file: " + path.string());
  const int channels = magic[1] == '5' ? 1 : 3;
  NetpbmImage img;
  img.cols = read_header_int(in, path);
  img.rows = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (maxval != 255) throw std::runtime_error("only maxval 255 is supported: " + path.string());
  if (img.rows <= 0 || img.cols <= 0) throw std::runtime_error("empty image: " + path.string());
  in.get();  // single whitespace before the raster

  const std::size_t n = static_cast<std::size_t>(img.rows) * img.cols * channels;
  std::vector<unsigned char> raster(n);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw std::runtime_error("truncated raster: " + path.string());

  img.values.resize(static_cast<Eigen::Index>(img.rows) * img.cols, channels);
  for (Eigen::Index p = 0; p < img.values.rows(); ++p)
    for (int c = 0; c < channels; ++c)
      img.values(p, c) = raster[static_cast<std::size_t>(p) * channels + c] / 255.0;
  return img;
}

void write_netpbm(const std::filesystem::path& path, int rows, int cols,
                  const Eigen::MatrixXd& values) {
  const auto channels = values.cols();
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("netpbm output needs 1 or 3 channels");
  if (values.rows() != static_cast<Eigen::Index>(rows) * cols)
    throw std::invalid_argument("pixel count does not match image extent");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << (channels == 1 ? "P5" : "P6") << '\n' << cols << ' ' << rows << "\n255\n";
  std::vector<unsigned char> raster(static_cast<std::size_t>(values.size()));
  for (Eigen::Index p = 0; p < values.rows(); ++p)
    for (Eigen::Index c = 0; c < channels; ++c) {
      const double v = std::clamp(values(p, c), 0.0, 1.0);
      raster[static_cast<std::size_t>(p * channels + c)] =
          static_cast<unsigned char>(std::lround(v * 255.0));
    }
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
}

}  // namespace coordfit
