#pragma once

#include "hdsa/benchmarks.hpp"
#include "hdsa/random.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdsa {

/// Missing, unknown, or malformed configuration entries.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string benchmark;
  DiffusionReactionParams diffusion_reaction;
  MassSpringParams mass_spring;
  AdvectionDiffusionParams advection_diffusion;

  double alpha_u = 0.0;
  double beta_u = 0.0;
  double alpha_z = 0.0;
  double beta_z = 0.0;  ///< unused by parametric controls
  double alpha_d = 0.0;
  Index q = -1;
  Index gsvd_oversample = 10;
  Seed gsvd_seed = 20240601;

  Index training_count = 2;
  double secondary_scale = 0.2;
  Seed data_seed = 11;

  std::vector<Index> ranks;
  Index rank_oversample = 10;
  Seed rank_seed = 7;
  Index samples = 100;
  Seed seed = 1;
  bool evaluate_samples = true;
  bool hifi_optimum = true;
  std::vector<Index> sweep_ranks;
  Index preview_samples = 10;

  double gtol_rel = 1e-8;
  int max_iter = 200;

  std::filesystem::path output_dir = "out";

  bool parametric() const { return benchmark == "advection_diffusion"; }
  Index max_rank() const;
};

/// Sections: [benchmark] [prior] [data] [update] [sweep] [preview] [optimizer] [output].
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::filesystem::path& path);

/// "1, 2, 5-8" -> {1, 2, 5, 6, 7, 8}; sorted, duplicates removed.
std::vector<Index> parse_rank_list(const std::string& text);

}  // namespace hdsa
