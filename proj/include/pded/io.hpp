#pragma once

#include <filesystem>
#include <string>

#include "pded/data.hpp"

namespace pded {

// Columnar CSV (x, t, u, u_clean) with a JSON provenance sidecar
// (<path>.meta.json). Doubles are printed with %.17g so the round-trip is
// bit-exact.
void write_field_csv(const SampledField& field, const std::filesystem::path& path);
SampledField read_field_csv(const std::filesystem::path& path);

// Particle CSV (walker, step, x, t) plus sidecar.
void write_particles_csv(const ParticleSet& set, const std::filesystem::path& path);
ParticleSet read_particles_csv(const std::filesystem::path& path);

std::string format_double(double v);  // %.17g

}  // namespace pded
