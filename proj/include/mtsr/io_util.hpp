#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mtsr/datapipe.hpp"

namespace mtsr {

/// 17 significant digits: parses back to the identical double.
std::string format_double(double value);

/// Binary 16-bit PGM (P5, maxval 65535). Values map linearly from
/// [0, peak] to [0, 65535], clamped, written big-endian.
void write_pgm(const std::filesystem::path& path, const Grid& frame, double peak);

/// Frames in the canonical long form `time_index,row,col,traffic_mb`,
/// time indices starting at `first_time`.
void write_frames_csv(const std::filesystem::path& path, const std::vector<Grid>& frames, std::size_t first_time);

}  // namespace mtsr
