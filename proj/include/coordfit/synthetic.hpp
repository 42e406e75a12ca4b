#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coordfit/signals.hpp"

namespace coordfit {

enum class ImageCategory { natural, text, noise };

std::string to_string(ImageCategory category);
ImageCategory parse_image_category(const std::string& text);

/// Seeded 1D composite: band-limited noise, a few steps and a localized
/// high-frequency burst, rescaled to [0,1].
SampledSignal synthetic_signal_1d(int length, std::uint64_t seed);

/// Seeded 2D image. natural: smooth band-limited colour field with sharp-edged
/// shapes and a textured patch (RGB). text: dark strokes on a light
/// background (grayscale). noise: i.i.d. uniform pixels (grayscale).
SampledSignal synthetic_image(int rows, int cols, ImageCategory category, std::uint64_t seed);

SampledSignal constant_signal(const std::vector<int>& grid_shape, double value, int channels = 1);

/// Mean Jacobian Frobenius norm, used to rank signals by complexity.
double signal_complexity(const SampledSignal& signal);

/// Writes `count` signals to `dir` (CSV for 1D, PGM/PPM for 2D) and returns
/// their paths.
std::vector<std::filesystem::path> write_dev_set_1d(const std::filesystem::path& dir, int count, int length,
                                                    std::uint64_t seed);
std::vector<std::filesystem::path> write_dev_set_2d(const std::filesystem::path& dir, int count, int size,
                                                    ImageCategory category, std::uint64_t seed);

}  // namespace coordfit
