#include "pded/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pded {

namespace {

nlohmann::json field_meta(const SampledField& f) {
  return {{"equation", f.equation},
          {"params", f.params},
          {"noise_level", f.noise_level},
          {"noise_seed", f.noise_seed},
          {"grid_nx", f.grid_nx},
          {"grid_nt", f.grid_nt}};
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".meta.json";
  return p;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_field_csv(const SampledField& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "x,t,u,u_clean\n";
  const bool has_clean = field.u_clean.size() == field.u.size();
  for (int i = 0; i < field.size(); ++i) {
    out << format_double(field.x(i)) << ',' << format_double(field.t(i)) << ','
        << format_double(field.u(i)) << ','
        << format_double(has_clean ? field.u_clean(i) : field.u(i)) << '\n';
  }
  std::ofstream meta(sidecar(path));
  meta << field_meta(field).dump(2) << '\n';
}

SampledField read_field_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (line != "x,t,u,u_clean")
    throw std::runtime_error("unexpected field CSV header in " + path.string());
  std::vector<double> x, t, u, uc;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    double vals[4];
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(row, cell, c == 3 ? '\n' : ','))
        throw std::runtime_error("short row in " + path.string());
      vals[c] = std::strtod(cell.c_str(), nullptr);
    }
    x.push_back(vals[0]);
    t.push_back(vals[1]);
    u.push_back(vals[2]);
    uc.push_back(vals[3]);
  }
  SampledField f;
  const int n = static_cast<int>(x.size());
  f.x = Eigen::Map<Eigen::VectorXd>(x.data(), n);
  f.t = Eigen::Map<Eigen::VectorXd>(t.data(), n);
  f.u = Eigen::Map<Eigen::VectorXd>(u.data(), n);
  f.u_clean = Eigen::Map<Eigen::VectorXd>(uc.data(), n);

  std::ifstream meta(sidecar(path));
  if (meta) {
    nlohmann::json j;
    meta >> j;
    f.equation = j.value("equation", "");
    f.params = j.value("params", nlohmann::json::object());
    f.noise_level = j.value("noise_level", 0.0);
    f.noise_seed = j.value("noise_seed", std::uint64_t{0});
    f.grid_nx = j.value("grid_nx", 0);
    f.grid_nt = j.value("grid_nt", 0);
  }
  return f;
}

void write_particles_csv(const ParticleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "walker,step,x,t\n";
  for (int w = 0; w < set.walkers(); ++w)
    for (int s = 0; s <= set.steps(); ++s)
      out << w << ',' << s << ',' << format_double(set.positions(w, s)) << ','
          << format_double(set.times(s)) << '\n';
  nlohmann::json meta{{"diffusivity", set.diffusivity},
                      {"drift", set.drift},
                      {"dt", set.dt},
                      {"seed", set.seed},
                      {"walkers", set.walkers()},
                      {"steps", set.steps()},
                      {"params", set.params}};
  std::ofstream ms(sidecar(path));
  ms << meta.dump(2) << '\n';
}

ParticleSet read_particles_csv(const std::filesystem::path& path) {
  std::ifstream meta = open_in(sidecar(path));
  nlohmann::json j;
  meta >> j;
  ParticleSet set;
  set.diffusivity = j.at("diffusivity").get<double>();
  set.drift = j.at("drift").get<double>();
  set.dt = j.at("dt").get<double>();
  set.seed = j.at("seed").get<std::uint64_t>();
  set.params = j.value("params", nlohmann::json::object());
  const int walkers = j.at("walkers").get<int>();
  const int steps = j.at("steps").get<int>();
  set.positions.resize(walkers, steps + 1);
  set.times.resize(steps + 1);

  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (line != "walker,step,x,t")
    throw std::runtime_error("unexpected particle CSV header in " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    const int w = std::stoi(cell);
    std::getline(row, cell, ',');
    const int s = std::stoi(cell);
    std::getline(row, cell, ',');
    set.positions(w, s) = std::strtod(cell.c_str(), nullptr);
    std::getline(row, cell);
    set.times(s) = std::strtod(cell.c_str(), nullptr);
  }
  return set;
}

}  // namespace pded
