#pragma once

// JSON encodings of the domain and dataset types. Doubles are written with
// round-trip precision, so to_json/from_json is bit-exact.

#include <nlohmann/json.hpp>

#include "tfr/datagen.hpp"
#include "tfr/domain.hpp"
#include "tfr/solver.hpp"

namespace tfr {

void to_json(nlohmann::json& j, const Grid& g);
void from_json(const nlohmann::json& j, Grid& g);
void to_json(nlohmann::json& j, const Point& p);
void from_json(const nlohmann::json& j, Point& p);
void to_json(nlohmann::json& j, const Rect& r);
void from_json(const nlohmann::json& j, Rect& r);
void to_json(nlohmann::json& j, const HeatSource& s);
void from_json(const nlohmann::json& j, HeatSource& s);
void to_json(nlohmann::json& j, const SideCondition& s);
void from_json(const nlohmann::json& j, SideCondition& s);
void to_json(nlohmann::json& j, const BoundarySpec& b);
void from_json(const nlohmann::json& j, BoundarySpec& b);
void to_json(nlohmann::json& j, const ConductivityModel& c);
void from_json(const nlohmann::json& j, ConductivityModel& c);
void to_json(nlohmann::json& j, const SensorLayout& l);
void from_json(const nlohmann::json& j, SensorLayout& l);
void to_json(nlohmann::json& j, const Readings& r);
void from_json(const nlohmann::json& j, Readings& r);
void to_json(nlohmann::json& j, const ScalarField& f);
void from_json(const nlohmann::json& j, ScalarField& f);
void to_json(nlohmann::json& j, const Sample& s);
void from_json(const nlohmann::json& j, Sample& s);
void to_json(nlohmann::json& j, const NormStats& s);
void from_json(const nlohmann::json& j, NormStats& s);
void to_json(nlohmann::json& j, const SolveOptions& o);
void from_json(const nlohmann::json& j, SolveOptions& o);
void to_json(nlohmann::json& j, const SourceRanges& r);
void from_json(const nlohmann::json& j, SourceRanges& r);
void to_json(nlohmann::json& j, const ScenarioSpec& s);
void from_json(const nlohmann::json& j, ScenarioSpec& s);

}  // namespace tfr
