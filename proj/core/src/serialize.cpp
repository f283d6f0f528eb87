#include "tfr/serialize.hpp"

namespace tfr {

NLOHMANN_JSON_SERIALIZE_ENUM(SourceKind, {{SourceKind::uniform, "uniform"}, {SourceKind::gaussian, "gaussian"}})
NLOHMANN_JSON_SERIALIZE_ENUM(BoundaryKind, {{BoundaryKind::dirichlet, "dirichlet"},
                                            {BoundaryKind::neumann, "neumann"},
                                            {BoundaryKind::robin, "robin"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ProfileKind, {{ProfileKind::constant, "constant"}, {ProfileKind::sine, "sine"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ConductivityKind, {{ConductivityKind::constant, "constant"},
                                                {ConductivityKind::affine, "affine"}})

using nlohmann::json;

void to_json(json& j, const Grid& g) { j = json{{"nx", g.nx}, {"ny", g.ny}, {"lx", g.lx}, {"ly", g.ly}}; }
void from_json(const json& j, Grid& g) {
  g = make_grid(j.at("nx").get<int>(), j.at("ny").get<int>(), j.at("lx").get<double>(), j.at("ly").get<double>());
}

void to_json(json& j, const Point& p) { j = json::array({p.x, p.y}); }
void from_json(const json& j, Point& p) { p = {j.at(0).get<double>(), j.at(1).get<double>()}; }

void to_json(json& j, const Rect& r) { j = json::array({r.x_lo, r.y_lo, r.x_hi, r.y_hi}); }
void from_json(const json& j, Rect& r) {
  r = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

void to_json(json& j, const HeatSource& s) {
  j = json{{"kind", s.kind}, {"region", s.region}, {"power", s.power}};
  if (s.kind == SourceKind::gaussian) {
    j["center"] = s.center;
    j["radius"] = s.radius;
    j["sigma"] = s.sigma;
  }
}
void from_json(const json& j, HeatSource& s) {
  s = HeatSource{};
  j.at("kind").get_to(s.kind);
  j.at("region").get_to(s.region);
  j.at("power").get_to(s.power);
  if (s.kind == SourceKind::gaussian) {
    j.at("center").get_to(s.center);
    j.at("radius").get_to(s.radius);
    j.at("sigma").get_to(s.sigma);
  }
}

void to_json(json& j, const SideCondition& s) {
  j = json{{"kind", s.kind}, {"profile", s.profile}, {"t0", s.t0}, {"amplitude", s.amplitude}, {"h", s.h}};
}
void from_json(const json& j, SideCondition& s) {
  j.at("kind").get_to(s.kind);
  s.profile = j.value("profile", ProfileKind::constant);
  s.t0 = j.value("t0", 298.0);
  s.amplitude = j.value("amplitude", 0.0);
  s.h = j.value("h", 50.0);
}

void to_json(json& j, const BoundarySpec& b) {
  j = json{{"left", b[Side::left]}, {"right", b[Side::right]}, {"bottom", b[Side::bottom]}, {"top", b[Side::top]}};
}
void from_json(const json& j, BoundarySpec& b) {
  j.at("left").get_to(b[Side::left]);
  j.at("right").get_to(b[Side::right]);
  j.at("bottom").get_to(b[Side::bottom]);
  j.at("top").get_to(b[Side::top]);
}

void to_json(json& j, const ConductivityModel& c) {
  j = json{{"kind", c.kind}, {"lambda0", c.lambda0}, {"slope", c.slope}};
}
void from_json(const json& j, ConductivityModel& c) {
  j.at("kind").get_to(c.kind);
  j.at("lambda0").get_to(c.lambda0);
  c.slope = j.value("slope", 0.0);
}

void to_json(json& j, const SensorLayout& l) { j = l.positions; }
void from_json(const json& j, SensorLayout& l) { j.get_to(l.positions); }

void to_json(json& j, const Readings& r) { j = json{{"layout", r.layout}, {"values", r.values}}; }
void from_json(const json& j, Readings& r) {
  j.at("layout").get_to(r.layout);
  j.at("values").get_to(r.values);
}

void to_json(json& j, const ScalarField& f) {
  j = json{{"grid", f.grid}, {"normalized", f.normalized}, {"values", f.values}};
}
void from_json(const json& j, ScalarField& f) {
  f = ScalarField(j.at("grid").get<Grid>(), j.at("values").get<std::vector<double>>(),
                  j.value("normalized", false));
}

void to_json(json& j, const Sample& s) {
  j = json{{"condition_id", s.condition_id}, {"seed", s.seed},     {"sources", s.sources},
           {"boundary", s.boundary},         {"field", s.field},   {"readings", s.readings}};
}
void from_json(const json& j, Sample& s) {
  j.at("condition_id").get_to(s.condition_id);
  j.at("seed").get_to(s.seed);
  j.at("sources").get_to(s.sources);
  j.at("boundary").get_to(s.boundary);
  j.at("field").get_to(s.field);
  j.at("readings").get_to(s.readings);
}

void to_json(json& j, const NormStats& s) { j = json{{"t_min", s.t_min}, {"t_max", s.t_max}}; }
void from_json(const json& j, NormStats& s) {
  j.at("t_min").get_to(s.t_min);
  j.at("t_max").get_to(s.t_max);
}

void to_json(json& j, const SolveOptions& o) {
  j = json{{"nonlinear_tol", o.nonlinear_tol}, {"max_picard", o.max_picard}, {"linear_tol", o.linear_tol}};
}
void from_json(const json& j, SolveOptions& o) {
  o.nonlinear_tol = j.value("nonlinear_tol", 1e-8);
  o.max_picard = j.value("max_picard", 100);
  o.linear_tol = j.value("linear_tol", 1e-9);
}

void to_json(json& j, const SourceRanges& r) {
  j = json{{"count_min", r.count_min}, {"count_max", r.count_max}, {"size_min", r.size_min},
           {"size_max", r.size_max},   {"power_min", r.power_min}, {"power_max", r.power_max},
           {"sigma", r.sigma},         {"placement_attempts", r.placement_attempts}};
}
void from_json(const json& j, SourceRanges& r) {
  const SourceRanges d;
  r.count_min = j.value("count_min", d.count_min);
  r.count_max = j.value("count_max", d.count_max);
  r.size_min = j.value("size_min", d.size_min);
  r.size_max = j.value("size_max", d.size_max);
  r.power_min = j.value("power_min", d.power_min);
  r.power_max = j.value("power_max", d.power_max);
  r.sigma = j.value("sigma", d.sigma);
  r.placement_attempts = j.value("placement_attempts", d.placement_attempts);
}

void to_json(json& j, const ScenarioSpec& s) {
  j = json{{"name", s.name},
           {"boundary", s.boundary},
           {"source_kind", s.source_kind},
           {"conductivity", s.conductivity},
           {"sensor_count", s.sensor_count},
           {"nx", s.nx},
           {"ny", s.ny},
           {"lx", s.lx},
           {"ly", s.ly},
           {"sources", s.sources},
           {"solver", s.solver}};
}
void from_json(const json& j, ScenarioSpec& s) {
  j.at("name").get_to(s.name);
  j.at("boundary").get_to(s.boundary);
  j.at("source_kind").get_to(s.source_kind);
  j.at("conductivity").get_to(s.conductivity);
  j.at("sensor_count").get_to(s.sensor_count);
  j.at("nx").get_to(s.nx);
  j.at("ny").get_to(s.ny);
  j.at("lx").get_to(s.lx);
  j.at("ly").get_to(s.ly);
  s.sources = j.value("sources", SourceRanges{});
  s.solver = j.value("solver", SolveOptions{});
}

}  // namespace tfr
