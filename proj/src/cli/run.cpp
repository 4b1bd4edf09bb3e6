#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "ablfield/abl.hpp"
#include "ablfield/cli.hpp"

namespace ablfield::cli {

namespace {

using json = nlohmann::json;

class Checks {
 public:
  void add(const std::string& name, double residual, double tolerance, json detail = json::object()) {
    const bool pass = residual <= tolerance;
    json c = {{"name", name}, {"residual", residual}, {"tolerance", tolerance}, {"pass", pass}};
    if (!detail.empty()) c["detail"] = std::move(detail);
    list_.push_back(std::move(c));
    all_pass_ = all_pass_ && pass;
  }
  const json& list() const { return list_; }
  bool all_pass() const { return all_pass_; }

 private:
  json list_ = json::array();
  bool all_pass_ = true;
};

class Phases {
 public:
  explicit Phases(bool enabled) : enabled_(enabled) {}
  template <typename Fn>
  auto run(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(name, start);
    } else {
      auto r = fn();
      record(name, start);
      return r;
    }
  }
  bool enabled() const { return enabled_; }
  const json& timings() const { return timings_; }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point start) {
    if (!enabled_) return;
    timings_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  bool enabled_;
  json timings_ = json::object();
};

struct Context {
  const ScenarioConfig& cfg;
  std::uint64_t seed;
  std::string prefix;
  Format format;
  unsigned threads;
  Phases& phases;
  Checks checks;
  json result = json::object();
  json outputs = json::object();
  std::vector<std::string> files;

  std::string path(const std::string& stem) const {
    return prefix + "." + stem + "." + to_string(format);
  }
};

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return HUGE_VAL;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = std::abs(a[i] - b[i]);
    if (std::isnan(e)) return HUGE_VAL;
    d = std::max(d, e);
  }
  return d;
}

BeableField write_and_reread(Context& ctx, const BeableField& field) {
  const std::string file = ctx.path("field");
  ctx.phases.run("emit", [&] { emit_field(field, ctx.format, file); });
  ctx.outputs["field"] = file;
  ctx.files.push_back(file);
  BeableField back = read_field(file, ctx.format);
  ctx.checks.add("round_trip", max_abs_diff(back.values, field.values), 0.0);
  return back;
}

// ---------------------------------------------------------------------------
// abl-check

void run_abl_check(Context& ctx, const AblCheckParams& p) {
  std::mt19937_64 rng(ctx.seed);
  RandomScenarioOptions opts;
  opts.min_dim = p.min_dim;
  opts.max_dim = p.max_dim;
  opts.max_time = p.max_time;
  std::vector<std::array<double, 4>> rows;
  ctx.phases.run("compute", [&] {
    for (std::size_t k = 0; k < p.scenarios; ++k) {
      const RandomScenario rs = random_scenario(rng, opts);
      const ConditionalDistribution abl = abl_evolved(rs.scenario);
      const ConditionalDistribution oracle =
          oracle_joint_distribution(rs.scenario, rs.final_family).conditioned();
      rows.push_back({static_cast<double>(k), static_cast<double>(rs.scenario.initial.dim()),
                      static_cast<double>(abl.size()),
                      max_abs_diff(abl.probabilities, oracle.probabilities)});
    }
  });
  const std::string file = ctx.path("scenarios");
  ctx.phases.run("emit", [&] {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + file + "'");
    if (ctx.format == Format::csv) {
      out << "index,dim,outcomes,max_abs_error\n";
      for (const auto& r : rows) {
        out << format_double(r[0]) << ',' << format_double(r[1]) << ',' << format_double(r[2]) << ','
            << format_double(r[3]) << '\n';
      }
    } else {
      json j = json::array();
      for (const auto& r : rows) {
        j.push_back({{"index", r[0]}, {"dim", r[1]}, {"outcomes", r[2]}, {"max_abs_error", r[3]}});
      }
      out << json{{"scenarios", j}}.dump() << '\n';
    }
    out.close();
    if (!out) throw IoError("error while writing '" + file + "'");
  });
  ctx.outputs["scenarios"] = file;
  ctx.files.push_back(file);

  std::vector<double> errors;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read '" + file + "'");
  if (ctx.format == Format::csv) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty()) errors.push_back(std::stod(line.substr(line.rfind(',') + 1)));
    }
  } else {
    for (const auto& r : json::parse(in).at("scenarios")) errors.push_back(r.at("max_abs_error"));
  }
  double worst = errors.size() == rows.size() ? 0.0 : HUGE_VAL;
  for (double e : errors) worst = std::max(worst, e);
  ctx.checks.add("abl_vs_oracle", worst, p.tolerance, {{"scenarios", rows.size()}});
  ctx.result["scenarios"] = rows.size();
  ctx.result["max_abs_error"] = worst;
}

// ---------------------------------------------------------------------------
// toy models

void run_toy(Context& ctx, const rel::ToyModelConfig& cfg) {
  const rel::NatureChoice choice = rel::sample_nature_choice(cfg, ctx.seed);
  ctx.result["choice"] = rel::to_string(choice);
  const BeableField field =
      ctx.phases.run("compute", [&] { return rel::beable_field(cfg, choice, ctx.threads); });
  const BeableField back = write_and_reread(ctx, field);
  const std::string rays = ctx.path("rays");
  ctx.phases.run("emit_rays", [&] { emit_rays(rel::ray_paths(cfg), ctx.format, rays); });
  ctx.outputs["rays"] = rays;
  ctx.files.push_back(rays);

  const GridSpec& g = cfg.grid;
  const double m = cfg.mass;
  const double eps = 1e-6 * m;
  double dichotomy = 0.0;
  for (std::size_t ti = 0; ti < g.t_steps; ++ti) {
    for (std::size_t xi = 0; xi < g.x_steps; ++xi) {
      const double x = g.x_at(xi);
      const double d1 = rel::cloud_density(cfg, 1, x);
      const double d2 = rel::cloud_density(cfg, 2, x);
      const double inside = m * cfg.weight_a() * d1 + m * cfg.weight_b() * d2;
      const double outside = m * (choice == rel::NatureChoice::cloud1 ? d1 : d2);
      const double v = back.values[ti * g.x_steps + xi];
      const double dev = std::min(std::abs(v - inside), std::abs(v - outside));
      dichotomy = std::max(dichotomy, v == 0.0 ? dev : dev / std::abs(v));
    }
  }
  ctx.checks.add("field_dichotomy", dichotomy, 1e-12);

  const double peak = 1.0 / (std::min(cfg.sigma1, cfg.sigma2) * std::sqrt(2.0 * std::numbers::pi));
  const double upper =
      cfg.photons == 1 && choice == rel::NatureChoice::cloud2 ? (1.0 + cfg.weight_a()) * m : m;
  const double lower = std::min(cfg.weight_a(), cfg.weight_b()) * m;
  double resolved = 0.0;
  double step_excess = 0.0;
  double bounds = 0.0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::size_t n_mixed = 0;
  for (std::size_t ti = 0; ti < g.t_steps; ++ti) {
    const double t = g.t_at(ti);
    const double integral = back.slice_integral(ti);
    const rel::SliceKind kind = rel::classify_slice(cfg, ti);
    const std::size_t cuts = rel::boundary_crossings(cfg, t);
    if (kind == rel::SliceKind::mixed) {
      ++n_mixed;
      const double exact = rel::slice_mass(cfg, choice, t);
      bounds = std::max({bounds, lower - exact, exact - upper});
      const double allowance = static_cast<double>(cuts) * m * peak * g.dx();
      step_excess = std::max(step_excess, std::abs(integral - exact) - allowance);
      if (cuts == 0) resolved = std::max(resolved, std::abs(integral - exact));
    } else {
      ++(kind == rel::SliceKind::inside ? n_in : n_out);
      resolved = std::max(resolved, std::abs(integral - m));
    }
  }
  ctx.checks.add("slice_mass_resolved", resolved, eps,
                 {{"inside_slices", n_in}, {"outside_slices", n_out}});
  ctx.checks.add("slice_mass_mixed_bounds", std::max(0.0, bounds), eps,
                 {{"mixed_slices", n_mixed}, {"lower", lower}, {"upper", upper}});
  ctx.checks.add("slice_mass_step_error", std::max(0.0, step_excess), eps);
  ctx.result["slices"] = {{"inside", n_in}, {"outside", n_out}, {"mixed", n_mixed}};
  ctx.result["collapse_time_x1"] = rel::collapse_time_at(cfg, cfg.x1);
  ctx.result["collapse_time_x2"] = rel::collapse_time_at(cfg, cfg.x2);
}

// ---------------------------------------------------------------------------
// lattice models

nonrel::LatticeModel build_lattice_model(const LatticeParams& p, Kind kind) {
  const Tolerances tol = default_tolerances();
  if (p.engineered) {
    std::vector<double> masses;
    for (const auto& s : p.particles) masses.push_back(s.mass);
    return nonrel::engineered_catastrophe_model(masses, p.sites, p.hopping, p.t_final);
  }
  const std::size_t dim = nonrel::lattice_dimension(p.sites, p.particles.size(), tol);
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(dim));
  for (const InitialTerm& term : p.initial) {
    amps += term.amplitude * nonrel::product_state(p.sites, term.positions).amplitudes();
  }
  if (amps.norm() < 1e-12) throw ValidationError("parameters.initial: terms cancel to the zero vector");
  const StateVector psi =
      nonrel::symmetrize(p.sites, p.particles, StateVector(CVector(amps / amps.norm())));
  const bool dense = kind == Kind::nonrel_classes || dim <= tol.dense_operator_cap;
  if (dense) {
    const LinearOperator h = nonrel::hopping_contact_hamiltonian(
        p.sites, p.particles, p.hopping, kind == Kind::nonrel_classes ? p.contact : 0.0, p.periodic);
    return nonrel::LatticeModel(p.sites, p.spacing, p.particles, h, psi, p.t_final);
  }
  return nonrel::LatticeModel(p.sites, p.spacing, p.particles,
                              nonrel::separable_hopping(p.sites, p.particles.size(), p.hopping, p.periodic),
                              psi, p.t_final);
}

void run_lattice(Context& ctx, const LatticeParams& p) {
  const nonrel::LatticeModel model = [&] {
    try {
      return build_lattice_model(p, ctx.cfg.kind);
    } catch (const ValidationError& e) {
      const std::string what = e.what();
      if (what.rfind("parameters", 0) == 0) throw;
      throw ValidationError("parameters: " + what);
    }
  }();
  const bool classes = ctx.cfg.kind == Kind::nonrel_classes;
  const nonrel::Scope measured = classes ? nonrel::scope_of(p.measured_class) : nonrel::Scope::whole_system;
  const nonrel::Scope selected = classes ? nonrel::complement(measured) : nonrel::Scope::whole_system;
  if (model.members(measured).empty()) {
    throw ValidationError("parameters.measured_class: no particles in the measured class");
  }

  std::vector<std::size_t> final_positions;
  if (p.final_positions) {
    final_positions = *p.final_positions;
    if (final_positions.size() != model.members(selected).size()) {
      throw ValidationError("parameters.final_positions: expected " +
                            std::to_string(model.members(selected).size()) + " sites");
    }
    for (std::size_t s : final_positions) {
      if (s >= model.sites()) throw ValidationError("parameters.final_positions: site outside the lattice");
    }
  } else {
    final_positions = nonrel::sample_final_configuration(model, selected, ctx.seed);
  }
  ctx.result["final_configuration"] = final_positions;
  ctx.result["final_condition"] = p.engineered ? "occupation" : "positions";
  const nonrel::FinalCondition fc = p.engineered
                                        ? nonrel::FinalCondition::occupation(model, final_positions)
                                        : nonrel::FinalCondition::for_scope(model, selected, final_positions);

  BeableField field;
  std::optional<nonrel::CatastropheResult> catastrophe;
  ctx.phases.run("compute", [&] {
    if (p.engineered) {
      catastrophe = nonrel::catastrophe_demo(model, fc, p.t_steps, ctx.threads);
      field.grid = catastrophe->grid;
      for (const ConditionalDistribution& d : catastrophe->distributions) {
        field.values.push_back(abl_expectation(d));
      }
    } else {
      field = nonrel::abl_mass_field(model, measured, fc, p.t_steps, ctx.threads);
    }
  });
  const BeableField back = write_and_reread(ctx, field);

  const double total = model.scope_mass(measured);
  double bound = 0.0;
  for (double v : back.values) bound = std::max({bound, -v, v - total});
  ctx.checks.add("field_bounds", std::max(0.0, bound), 1e-12 * total);

  if (catastrophe) {
    const std::vector<double> spectrum = nonrel::mass_spectrum(model, nonrel::Scope::whole_system);
    const double n = static_cast<double>(model.particle_count());
    double mean = 0.0;
    for (const auto& s : model.particles()) mean += s.mass / n;
    double flat_field = 0.0;
    for (double v : back.values) flat_field = std::max(flat_field, std::abs(v - mean));
    double flat_dist = 0.0;
    json expected = json::object();
    for (double m : spectrum) {
      double count = 0.0;
      for (const auto& s : model.particles()) count += std::abs(s.mass - m) <= 1e-12 * m ? 1.0 : 0.0;
      expected[format_double(m)] = count / n;
      for (const ConditionalDistribution& d : catastrophe->distributions) {
        flat_dist = std::max(flat_dist, std::abs(d.probability_of(m) - count / n));
      }
    }
    ctx.checks.add("counting_distribution", flat_dist, 1e-10, {{"expected", expected}});
    ctx.checks.add("flat_field", flat_field, 1e-10 * total, {{"expected", mean}});
    ctx.checks.add("particle_weight_spread", catastrophe->max_weight_spread, 1e-9);
  } else {
    const BeableField born = nonrel::born_mass_field(model, measured, p.t_steps, ctx.threads);
    ctx.result["max_deviation_from_born"] = max_abs_diff(back.values, born.values);
    if (model.hamiltonian() && model.dim() <= 64) {
      const LinearOperator pc = fc.projector();
      const ProjectorFamily final_family({pc, LinearOperator::identity(model.dim()) - pc}, {1.0, 0.0});
      double worst = 0.0;
      ctx.phases.run("oracle", [&] {
        for (std::size_t ti = 0; ti < back.grid.t_steps; ++ti) {
          for (std::size_t x = 0; x < model.sites(); ++x) {
            PrePostScenario s{model.initial(), nonrel::intermediate_family(model, measured, x), pc,
                              *model.hamiltonian(), field.grid.t_at(ti), model.t_final()};
            const double expect =
                abl_expectation(oracle_joint_distribution(s, final_family).conditioned());
            worst = std::max(worst, std::abs(expect - back.values[ti * model.sites() + x]));
          }
        }
      });
      ctx.checks.add("per_point_oracle", worst, 1e-10);
    }
  }
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
    case ErrorKind::capacity:
    case ErrorKind::contract:
      return 2;
    case ErrorKind::impossible_post_selection:
      return 3;
    case ErrorKind::zero_probability_branch:
    case ErrorKind::invariant:
      return 4;
    case ErrorKind::io:
      return 5;
  }
  return 4;
}

RunResult run_scenario(ScenarioConfig cfg, const RunOptions& options) {
  Phases phases(options.timings);
  std::optional<unsigned> threads = options.threads;
  if (!threads) threads = threads_from_environment();
  Context ctx{cfg,
              options.seed.value_or(cfg.seed),
              options.out.value_or(cfg.output.prefix),
              options.format.value_or(cfg.output.format),
              threads.value_or(0u),
              phases,
              {},
              json::object(),
              json::object(),
              {}};
  if (ctx.prefix.empty()) throw ValidationError("output.prefix: must not be empty");

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, AblCheckParams>) {
          run_abl_check(ctx, p);
        } else if constexpr (std::is_same_v<T, rel::ToyModelConfig>) {
          run_toy(ctx, p);
        } else {
          run_lattice(ctx, p);
        }
      },
      cfg.parameters);

  RunResult r;
  r.exit_code = ctx.checks.all_pass() ? 0 : exit_code_for(ErrorKind::invariant);
  r.report = {{"schema", 1},
              {"kind", to_string(cfg.kind)},
              {"seed", ctx.seed},
              {"format", to_string(ctx.format)},
              {"config", cfg.source},
              {"status", ctx.checks.all_pass() ? "ok" : "checks_failed"},
              {"exit_code", r.exit_code},
              {"result", ctx.result},
              {"checks", ctx.checks.list()},
              {"outputs", ctx.outputs}};
  if (phases.enabled()) r.report["timings"] = phases.timings();
  const std::string report_path = ctx.prefix + ".report.json";
  std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + report_path + "'");
  out << r.report.dump(2) << '\n';
  out.close();
  if (!out) throw IoError("error while writing '" + report_path + "'");
  r.files = ctx.files;
  r.files.push_back(report_path);
  return r;
}

int run(const std::string& config_path, const RunOptions& options, std::ostream& err) {
  auto render = [&](const std::string& kind, const std::string& message, int code) {
    err << json{{"status", "error"}, {"error", kind}, {"message", message}, {"exit_code", code}}.dump()
        << '\n';
    return code;
  };
  try {
    const RunResult r = run_scenario(load_config(config_path), options);
    if (r.exit_code != 0) {
      return render("invariant", "one or more checks failed; see the report", r.exit_code);
    }
    return 0;
  } catch (const Error& e) {
    return render(to_string(e.kind()), e.what(), exit_code_for(e.kind()));
  } catch (const std::exception& e) {
    return render("invariant", e.what(), 4);
  }
}

}  // namespace ablfield::cli
