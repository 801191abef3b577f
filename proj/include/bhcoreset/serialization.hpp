#pragma once

#include <filesystem>

#include <json.hpp>

#include "bhcoreset/coreset_solvers.hpp"
#include "bhcoreset/posterior_metrics.hpp"

namespace bhc {

using json = nlohmann::ordered_json;

/// Finite doubles as numbers; +-inf as the strings "inf" / "-inf", NaN as "nan".
json number(double v);
double number_from(const json& j);

/// {solver, seed, M, N, weights: [[index, weight], ...] over non-zeros,
/// trace, stop_reason, warnings}. Doubles round-trip exactly.
json to_json(const Coreset& c);
Coreset coreset_from_json(const json& j);

json to_json(const BoundReport& r);
json to_json(const ConcentrationReport& r);
json to_json(const EssEstimate& e);

/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

}  // namespace bhc
