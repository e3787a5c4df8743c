#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "gramsyn/certify.hpp"
#include "gramsyn/flow.hpp"
#include "gramsyn/freeze.hpp"
#include "gramsyn/gramian.hpp"
#include "gramsyn/synthesis.hpp"

namespace gramsyn::io {

// 17 significant digits: round-trip exact decimal for doubles.
std::string format_full(double value);

std::uint64_t fnv1a64(std::string_view bytes);

// CSV with header "t,x1..xd"; one row per stamp.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

// CSV with header "t,u1..uk".
void write_control_csv(const std::string& path, const ControlGrid& u);

// Reads a control CSV and checks it against the expected grid; malformed rows
// are reported with their (1-based) line number.
ControlGrid read_control_csv(const std::string& path, double t0, double T, int nodes, int k);

nlohmann::json to_json(const Mat& m);
nlohmann::json to_json(const GramianReport& rep);
nlohmann::json to_json(const ContractionEstimate& est);
nlohmann::json to_json(const SynthesisResult& res);
nlohmann::json to_json(const AlignmentReport& rep);
nlohmann::json to_json(const Certificate& cert);
nlohmann::json to_json(const FreezeResult& res);

}  // namespace gramsyn::io
