#pragma once

#include <string>

#include "core/io.hpp"

namespace specvoc {

inline constexpr int kReportSchemaVersion = 1;
const char* library_version();

Json default_config();

// Recursively overlays `user` on `defaults`; unknown keys are a ConfigError.
Json merge_config(const Json& defaults, const Json& user);

// Each command takes a user config (merged over the defaults), writes its
// artifacts under config["out"], and returns its report. Reports carry a
// boolean "passed" where the command checks something.
Json cmd_pipeline(const Json& config);
Json cmd_cluster(const Json& config);
Json cmd_train_router(const Json& config);
Json cmd_bench(const Json& config);
Json cmd_theory(const Json& config);
Json cmd_exactness(const Json& config);
Json cmd_plot_data(const Json& config);

Json run_command(const std::string& name, const Json& config);

}  // namespace specvoc
