#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "csipred/channel.hpp"
#include "csipred/dataset.hpp"
#include "csipred/gan.hpp"

namespace csipred::cli {

// One experiment = one immutable JSON config; unknown keys are rejected and
// the effective (post-override) document is archived next to the outputs.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  chan::LinkConfig link;
  std::optional<data::ProfileMix> profile;

  struct DatasetSection {
    bool present = false;
    std::uint64_t n_samples = 0;
    std::array<double, 3> ratios{0.875, 0.025, 0.1};
    double speed_kmh = 50.0;
  } dataset;

  gan::TrainConfig train;
  std::string train_method = "cpcgan";

  struct BerSection {
    std::vector<double> snr_db{0.0, 5.0, 10.0, 15.0, 20.0};
    int n_frames = 200;
    std::vector<std::string> modes{"perfect", "predicted", "stale_ul", "none"};
    double clip_gain = 10.0;
  } ber;

  std::string out_dir;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Entry point used by the binary and by tests. Exit codes: 0 ok, 2 config
// error, 3 runtime error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace csipred::cli
