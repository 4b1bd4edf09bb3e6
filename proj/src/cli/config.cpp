#include <fstream>
#include <set>
#include <sstream>

#include "ablfield/cli.hpp"

namespace ablfield::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

/// Reads the keys of one JSON object and rejects whatever is left over.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) fail(at(key), "required field missing");
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(at(key), "must be finite");
    return d;
  }
  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    const json& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() < 0) fail(at(key), "must be non-negative");
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    fail(at(key), "expected a non-negative integer");
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    return has(key) ? unsigned_integer(key) : fallback;
  }

  std::size_t count(const std::string& key, std::size_t minimum) {
    const std::uint64_t v = unsigned_integer(key);
    if (v < minimum) fail(at(key), "must be at least " + std::to_string(minimum));
    return static_cast<std::size_t>(v);
  }
  std::size_t count(const std::string& key, std::size_t minimum, std::size_t fallback) {
    return has(key) ? count(key, minimum) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  Complex amplitude(const std::string& key) {
    const json& v = raw(key);
    return parse_amplitude(v, at(key));
  }

  static Complex parse_amplitude(const json& v, const std::string& path) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      return {v[0].get<double>(), v[1].get<double>()};
    }
    fail(path, "expected a number or [re, im]");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.contains(it.key())) fail(at(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<std::size_t> site_list(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of site indices");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer() || v[i].get<std::int64_t>() < 0) {
      fail(path + "[" + std::to_string(i) + "]", "expected a non-negative integer");
    }
    out.push_back(v[i].get<std::size_t>());
  }
  return out;
}

Kind parse_kind(const std::string& s, const std::string& path) {
  if (s == "abl-check") return Kind::abl_check;
  if (s == "nonrel-nparticle") return Kind::nonrel_nparticle;
  if (s == "nonrel-classes") return Kind::nonrel_classes;
  if (s == "toy1") return Kind::toy1;
  if (s == "toy2") return Kind::toy2;
  fail(path, "unknown kind '" + s + "' (abl-check, nonrel-nparticle, nonrel-classes, toy1, toy2)");
}

Format parse_format(const std::string& s, const std::string& path) {
  if (s == "csv") return Format::csv;
  if (s == "json") return Format::json;
  fail(path, "format must be csv or json");
}

AblCheckParams parse_abl(Fields& f) {
  AblCheckParams p;
  p.scenarios = f.count("scenarios", 1, p.scenarios);
  p.min_dim = f.count("min_dim", 2, p.min_dim);
  p.max_dim = f.count("max_dim", 2, p.max_dim);
  if (p.max_dim < p.min_dim) fail(f.at("max_dim"), "must be at least min_dim");
  if (p.max_dim > 64) fail(f.at("max_dim"), "must be at most 64");
  p.max_time = f.number("max_time", p.max_time);
  if (!(p.max_time >= 0.0)) fail(f.at("max_time"), "must be non-negative");
  p.tolerance = f.number("tolerance", p.tolerance);
  if (!(p.tolerance > 0.0)) fail(f.at("tolerance"), "must be positive");
  f.finish();
  return p;
}

rel::ToyModelConfig parse_toy(Fields& f, Fields& grid, int photons) {
  rel::ToyModelConfig c;
  c.photons = photons;
  c.x1 = f.number("x1");
  c.x2 = f.number("x2");
  c.sigma1 = f.number("sigma1");
  c.sigma2 = f.number("sigma2");
  c.amp_a = f.amplitude("amp_a");
  c.amp_b = f.amplitude("amp_b");
  c.mass = f.number("mass");
  c.t1 = f.number("t1");
  c.separation_ratio = f.number("separation_ratio", c.separation_ratio);
  f.finish();
  c.grid.t_min = grid.number("t_min");
  c.grid.t_max = grid.number("t_max");
  c.grid.t_steps = grid.count("t_steps", 1);
  c.grid.x_min = grid.number("x_min");
  c.grid.x_max = grid.number("x_max");
  c.grid.x_steps = grid.count("x_steps", 1);
  grid.finish();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    throw ValidationError(what.rfind("grid", 0) == 0 ? what : "parameters." + what);
  }
  return c;
}

nonrel::ParticleSpec parse_particle(const json& j, const std::string& path) {
  Fields f(j, path);
  nonrel::ParticleSpec p;
  p.mass = f.number("mass");
  if (!(p.mass > 0.0)) fail(f.at("mass"), "must be positive");
  const std::string stats = f.has("statistics") ? f.string("statistics") : "distinguishable";
  if (stats == "distinguishable") {
    p.statistics = nonrel::Statistics::distinguishable;
  } else if (stats == "boson") {
    p.statistics = nonrel::Statistics::boson;
  } else if (stats == "fermion") {
    p.statistics = nonrel::Statistics::fermion;
  } else {
    fail(f.at("statistics"), "must be distinguishable, boson or fermion");
  }
  p.particle_class =
      p.statistics == nonrel::Statistics::fermion ? nonrel::ParticleClass::F : nonrel::ParticleClass::B;
  if (f.has("class")) {
    const std::string cls = f.string("class");
    if (cls == "B") {
      p.particle_class = nonrel::ParticleClass::B;
    } else if (cls == "F") {
      p.particle_class = nonrel::ParticleClass::F;
    } else {
      fail(f.at("class"), "must be B or F");
    }
  }
  f.finish();
  return p;
}

LatticeParams parse_lattice(Fields& f, Fields& grid, Kind kind) {
  LatticeParams p;
  p.sites = f.count("sites", 1);
  p.spacing = f.number("spacing", p.spacing);
  if (!(p.spacing > 0.0)) fail(f.at("spacing"), "must be positive");
  p.hopping = f.number("hopping", p.hopping);
  p.periodic = f.boolean("periodic", p.periodic);
  p.t_final = f.number("t_final");
  if (!(p.t_final >= 0.0)) fail(f.at("t_final"), "must be non-negative");
  if (kind == Kind::nonrel_classes) {
    p.contact = f.number("contact", p.contact);
    const std::string cls = f.has("measured_class") ? f.string("measured_class") : "B";
    if (cls == "B") {
      p.measured_class = nonrel::ParticleClass::B;
    } else if (cls == "F") {
      p.measured_class = nonrel::ParticleClass::F;
    } else {
      fail(f.at("measured_class"), "must be B or F");
    }
  } else {
    p.engineered = f.boolean("engineered", false);
  }
  const json& parts = f.raw("particles");
  if (!parts.is_array() || parts.empty()) fail(f.at("particles"), "expected a non-empty array");
  for (std::size_t i = 0; i < parts.size(); ++i) {
    p.particles.push_back(parse_particle(parts[i], f.at("particles") + "[" + std::to_string(i) + "]"));
  }
  if (p.engineered) {
    if (f.has("initial")) fail(f.at("initial"), "not used by the engineered model");
    for (const auto& s : p.particles) {
      if (s.statistics != nonrel::Statistics::distinguishable) {
        fail(f.at("particles"), "the engineered model needs distinguishable particles");
      }
    }
  } else {
    const json& init = f.raw("initial");
    if (!init.is_array() || init.empty()) fail(f.at("initial"), "expected a non-empty array");
    for (std::size_t i = 0; i < init.size(); ++i) {
      const std::string path = f.at("initial") + "[" + std::to_string(i) + "]";
      Fields term(init[i], path);
      InitialTerm t;
      t.positions = site_list(term.raw("positions"), term.at("positions"));
      if (t.positions.size() != p.particles.size()) {
        fail(term.at("positions"), "one site per particle required");
      }
      for (std::size_t k = 0; k < t.positions.size(); ++k) {
        if (t.positions[k] >= p.sites) {
          fail(term.at("positions") + "[" + std::to_string(k) + "]", "site outside the lattice");
        }
      }
      if (term.has("amplitude")) t.amplitude = term.amplitude("amplitude");
      term.finish();
      p.initial.push_back(std::move(t));
    }
  }
  if (f.has("final_positions")) {
    p.final_positions = site_list(f.raw("final_positions"), f.at("final_positions"));
  }
  f.finish();
  p.t_steps = grid.count("t_steps", 1);
  grid.finish();
  return p;
}

}  // namespace

std::string to_string(Kind k) {
  switch (k) {
    case Kind::abl_check:
      return "abl-check";
    case Kind::nonrel_nparticle:
      return "nonrel-nparticle";
    case Kind::nonrel_classes:
      return "nonrel-classes";
    case Kind::toy1:
      return "toy1";
    case Kind::toy2:
      break;
  }
  return "toy2";
}

std::string to_string(Format f) { return f == Format::csv ? "csv" : "json"; }

ScenarioConfig parse_config(const json& j) {
  Fields top(j, "");
  ScenarioConfig cfg;
  cfg.source = j;
  const json& schema = top.raw("schema");
  if (!schema.is_number_integer() || schema.get<std::int64_t>() != 1) {
    fail("schema", "unsupported schema version (expected 1)");
  }
  cfg.kind = parse_kind(top.string("kind"), "kind");
  cfg.seed = top.unsigned_integer("seed", 0);
  if (top.has("output")) {
    Fields out(top.raw("output"), "output");
    if (out.has("prefix")) cfg.output.prefix = out.string("prefix");
    if (cfg.output.prefix.empty()) fail("output.prefix", "must not be empty");
    if (out.has("format")) cfg.output.format = parse_format(out.string("format"), "output.format");
    out.finish();
  }
  const json empty = json::object();
  Fields params(top.has("parameters") ? top.raw("parameters") : empty, "parameters");
  switch (cfg.kind) {
    case Kind::abl_check:
      if (top.has("grid")) fail("grid", "not used by abl-check");
      cfg.parameters = parse_abl(params);
      break;
    case Kind::toy1:
    case Kind::toy2: {
      Fields grid(top.raw("grid"), "grid");
      cfg.parameters = parse_toy(params, grid, cfg.kind == Kind::toy1 ? 1 : 2);
      break;
    }
    case Kind::nonrel_nparticle:
    case Kind::nonrel_classes: {
      Fields grid(top.raw("grid"), "grid");
      cfg.parameters = parse_lattice(params, grid, cfg.kind);
      break;
    }
  }
  top.finish();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace ablfield::cli
