#pragma once

#include <string>

#include "terra/dataset.hpp"

namespace terra::cli {

/// Parse argv and dispatch to a subcommand. Exit codes: 0 success,
/// 2 input/config error, 3 no-path or degenerate result.
int run(int argc, const char* const* argv);

/// Shared labels.csv writer (t, m_z, m_omega, m_p); the three series must
/// share their timestamp grid.
void write_labels_csv(const std::string& path, const MetricTriple& metrics);

/// labels.csv reader, inverse of write_labels_csv.
MetricTriple read_labels_csv(const std::string& path);

}  // namespace terra::cli
