#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "wayfinder/config.hpp"

namespace wayfinder {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point behind the `wayfinder` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// A path to a site.json, or a fixture name looked up as
/// $WAYFINDER_DATA_DIR/fixtures/NAME/site.json.
std::string resolve_fixture_path(const std::string& name_or_path);

struct BatchOptions {
    AgentConfig agent;
    BackendsConfig backends;
    std::string reasoner_override;
    std::size_t jobs = 1;
    std::string traces_dir;  // one trace per item when set
};

using EnvironmentFactory = std::function<std::shared_ptr<Environment>()>;

/// Runs one episode per item; output order follows the benchmark. Items
/// whose episode fails outright get an empty prediction.
std::vector<Prediction> run_batch(const std::vector<QAItem>& items, const std::string& default_root,
                                  const EnvironmentFactory& make_env, const BatchOptions& opts);

}  // namespace wayfinder
