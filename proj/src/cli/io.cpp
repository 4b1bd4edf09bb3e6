#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ablfield/cli.hpp"

namespace ablfield::cli {

namespace {

std::ofstream open_for_writing(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void close_checked(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw IoError("error while writing '" + path + "'");
}

double parse_double(const std::string& s, const std::string& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError("malformed number '" + s + "' in " + path);
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit_field(const BeableField& field, Format format, const std::string& path) {
  std::ofstream out = open_for_writing(path);
  const GridSpec& g = field.grid;
  if (format == Format::csv) {
    out << "t,x,rho\n";
    for (std::size_t ti = 0; ti < g.t_steps; ++ti) {
      const std::string t = format_double(g.t_at(ti));
      for (std::size_t xi = 0; xi < g.x_steps; ++xi) {
        out << t << ',' << format_double(g.x_at(xi)) << ',' << format_double(field.at(ti, xi))
            << '\n';
      }
    }
  } else {
    nlohmann::json j;
    j["grid"] = {{"t_min", g.t_min}, {"t_max", g.t_max}, {"t_steps", g.t_steps},
                 {"x_min", g.x_min}, {"x_max", g.x_max}, {"x_steps", g.x_steps}};
    j["values"] = field.values;
    out << j.dump() << '\n';
  }
  close_checked(out, path);
}

BeableField read_field(const std::string& path, Format format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  BeableField field;
  if (format == Format::json) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      const auto& g = j.at("grid");
      field.grid = GridSpec{g.at("t_min").get<double>(), g.at("t_max").get<double>(),
                            g.at("t_steps").get<std::size_t>(), g.at("x_min").get<double>(),
                            g.at("x_max").get<double>(), g.at("x_steps").get<std::size_t>()};
      field.values = j.at("values").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed field file '" + path + "': " + e.what());
    }
    return field;
  }
  std::string line;
  std::getline(in, line);
  if (line != "t,x,rho") throw IoError("unexpected header in '" + path + "'");
  std::vector<double> ts;
  std::vector<double> xs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string t;
    std::string x;
    std::string rho;
    if (!std::getline(row, t, ',') || !std::getline(row, x, ',') || !std::getline(row, rho)) {
      throw IoError("malformed row in '" + path + "'");
    }
    ts.push_back(parse_double(t, path));
    xs.push_back(parse_double(x, path));
    field.values.push_back(parse_double(rho, path));
  }
  if (ts.empty()) throw IoError("empty field file '" + path + "'");
  std::size_t x_steps = 1;
  while (x_steps < ts.size() && ts[x_steps] == ts[0]) ++x_steps;
  field.grid = GridSpec{ts.front(), ts.back(), ts.size() / x_steps, xs.front(), xs[x_steps - 1], x_steps};
  if (field.grid.size() != field.values.size()) throw IoError("ragged grid in '" + path + "'");
  return field;
}

void emit_rays(const std::vector<rel::RayPath>& rays, Format format, const std::string& path) {
  std::ofstream out = open_for_writing(path);
  if (format == Format::csv) {
    out << "photon,branch,t,x\n";
    for (const rel::RayPath& r : rays) {
      for (const rel::SpacetimePoint& p : r.points) {
        out << r.photon << ',' << r.branch << ',' << format_double(p.t) << ',' << format_double(p.x)
            << '\n';
      }
    }
  } else {
    nlohmann::json j = nlohmann::json::array();
    for (const rel::RayPath& r : rays) {
      nlohmann::json pts = nlohmann::json::array();
      for (const rel::SpacetimePoint& p : r.points) pts.push_back({p.t, p.x});
      j.push_back({{"photon", r.photon}, {"branch", r.branch}, {"points", pts}});
    }
    out << nlohmann::json{{"rays", j}}.dump() << '\n';
  }
  close_checked(out, path);
}

std::optional<unsigned> threads_from_environment() {
  const char* v = std::getenv("ABLFIELD_THREADS");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0 || n > 4096) {
    throw ValidationError(std::string("ABLFIELD_THREADS: expected a thread count, got '") + v + "'");
  }
  return static_cast<unsigned>(n);
}

}  // namespace ablfield::cli
