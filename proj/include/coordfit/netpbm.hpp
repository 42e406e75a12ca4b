#pragma once

#include <filesystem>

#include <Eigen/Dense>

namespace coordfit {

/// 8-bit binary PGM (P5) or PPM (P6) image with values scaled to [0,1].
struct NetpbmImage {
  int rows = 0;
  int cols = 0;
  Eigen::MatrixXd values;  // rows*cols x channels, row-major pixel order
};

NetpbmImage read_netpbm(const std::filesystem::path& path);

/// Writes P5 for one channel, P6 for three. Values are clamped to [0,1] and
/// rounded to the nearest 8-bit level.
void write_netpbm(const std::filesystem::path& path, int rows, int cols,
                  const Eigen::MatrixXd& values);

}  // namespace coordfit
