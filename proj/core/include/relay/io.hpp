#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "relay/dataset.hpp"
#include "relay/policy.hpp"
#include "relay/trajectory.hpp"

namespace relay {

struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Line-delimited JSON with a versioned header line; doubles serialize at
// full round-trip precision.
void write_trajectories(const std::filesystem::path& path,
                        const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);

void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

// Flat binary tensor file (<stem>.bin, little-endian doubles) plus a text
// manifest (<stem>.json) listing shapes, offsets and the standardization
// statistics. Round trips are bit exact.
void write_policy(const std::filesystem::path& stem,
                  const GaussianPolicy& policy);
GaussianPolicy read_policy(const std::filesystem::path& stem);

// Append-only metrics file: header line then one JSON record per line.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void record(const std::string& json_line);
  void flush();

 private:
  std::ofstream out_;
};

std::vector<std::string> read_metric_lines(const std::filesystem::path& path);

}  // namespace relay
