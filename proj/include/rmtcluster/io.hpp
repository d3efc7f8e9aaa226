#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "rmtcluster/clt.hpp"
#include "rmtcluster/clustering.hpp"
#include "rmtcluster/scenario.hpp"

namespace rmtcluster {

// 17 significant digits.
std::string format_double(double x);

// Unknown keys raise ConfigError. M, samples_per_group and seed are required;
// group_centroids and users_per_group too unless fixed_users is given.
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);
nlohmann::json scenario_config_to_json(const ScenarioConfig& c);

nlohmann::json scenario_to_json(const ClusteringScenario& s);
ClusteringScenario scenario_from_json(const nlohmann::json& j);

nlohmann::json law_to_json(const AsymptoticLaw& law);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// Doubles are written in shortest round-trip form, which is lossless.
std::string dump_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace rmtcluster
