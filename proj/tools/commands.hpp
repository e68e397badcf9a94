#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "delayflow/measure.hpp"
#include "delayflow/scenario.hpp"

namespace delayflow::app {

struct OutputOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> stride;
  bool svg = false;
};

struct EmittedFile {
  std::string name;  // relative to the output directory
  std::uintmax_t bytes = 0;
  std::string sha256;
};

struct RunResult {
  std::string out_dir;
  std::vector<EmittedFile> files;
  std::optional<CompareReport> comparison;
};

std::string sha256_hex(const std::string& path);

/// Simulates a scenario and writes CSV (and optionally SVG) artifacts plus
/// manifest.json. Throws ConfigError or ModelError.
RunResult cmd_run(ScenarioConfig cfg, const OutputOptions& opt, std::ostream& log);

struct StabilityResult {
  std::string out_dir;
  std::vector<EmittedFile> files;
  StabilityMap map;
  StabilityReport operating_point;
};

StabilityResult cmd_stability(const MapSpec& spec, const OutputOptions& opt, std::ostream& log);

struct FDResult {
  std::string out_dir;
  std::vector<EmittedFile> files;
  std::optional<EnvelopeReport> overlay;
  std::vector<std::string> data_errors;
};

FDResult cmd_fd(const FDParams& params, const std::optional<std::string>& data_path, const OutputOptions& opt,
                std::ostream& log);

}  // namespace delayflow::app
