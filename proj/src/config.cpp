#include "hdsa/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>

namespace hdsa {

namespace {

namespace ptree = boost::property_tree;

class Reader {
 public:
  explicit Reader(const ptree::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& key) {
    known_.insert(key);
    auto v = tree_.get_optional<std::string>(ptree::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    std::string s = *v;
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty value for key '" + key + "'");
    return s.substr(b, e - b + 1);
  }

  std::string text(const std::string& key) {
    auto v = raw(key);
    if (!v) throw ConfigError("missing required key '" + key + "'");
    return *v;
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    auto v = raw(key);
    if (!v) {
      if (fallback) return *fallback;
      throw ConfigError("missing required key '" + key + "'");
    }
    try {
      std::size_t used = 0;
      const double out = std::stod(*v, &used);
      if (used != v->size() || !std::isfinite(out)) throw std::invalid_argument(*v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': '" + *v + "' is not a number");
    }
  }

  Index integer(const std::string& key, Index fallback) {
    const double v = number(key, static_cast<double>(fallback));
    if (v != std::floor(v)) throw ConfigError("key '" + key + "' must be an integer");
    return static_cast<Index>(v);
  }

  Seed seed(const std::string& key, Seed fallback) {
    auto v = raw(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const unsigned long long out = std::stoull(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return static_cast<Seed>(out);
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': '" + *v + "' is not an unsigned integer");
    }
  }

  bool boolean(const std::string& key, bool fallback) {
    auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("key '" + key + "': '" + *v + "' is not a boolean");
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty()) throw ConfigError("key '" + section + "' must appear inside a section");
      for (const auto& [key, value] : body) {
        const std::string full = section + "." + key;
        if (!known_.count(full)) throw ConfigError("unknown key '" + full + "'");
      }
    }
  }

 private:
  const ptree::ptree& tree_;
  std::set<std::string> known_;
};

void positive(double v, const char* key) {
  if (!(v > 0.0)) throw ConfigError(std::string("key '") + key + "' must be positive");
}

void non_negative(double v, const char* key) {
  if (!(v >= 0.0)) throw ConfigError(std::string("key '") + key + "' must be non-negative");
}

}  // namespace

Index RunConfig::max_rank() const {
  Index r = 0;
  for (Index v : ranks) r = std::max(r, v);
  for (Index v : sweep_ranks) r = std::max(r, v);
  return r;
}

std::vector<Index> parse_rank_list(const std::string& text) {
  std::vector<Index> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string item = text.substr(pos, comma - pos);
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (!item.empty()) {
      try {
        const std::size_t dash = item.find('-', 1);
        if (dash == std::string::npos) {
          out.push_back(std::stol(item));
        } else {
          const Index a = std::stol(item.substr(0, dash));
          const Index b = std::stol(item.substr(dash + 1));
          if (b < a) throw ConfigError("rank range '" + item + "' is decreasing");
          for (Index r = a; r <= b; ++r) out.push_back(r);
        }
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError("invalid rank list entry '" + item + "'");
      }
    }
    pos = comma + 1;
  }
  for (Index r : out)
    if (r < 0) throw ConfigError("ranks must be non-negative");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

RunConfig parse_config(std::istream& is) {
  ptree::ptree tree;
  try {
    ptree::read_ini(is, tree);
  } catch (const ptree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  Reader rd(tree);
  RunConfig c;
  c.benchmark = rd.text("benchmark.name");
  if (c.benchmark == "diffusion_reaction") {
    auto& p = c.diffusion_reaction;
    p.elements = rd.integer("benchmark.elements", p.elements);
    p.kappa = rd.number("benchmark.kappa", p.kappa);
    p.gamma = rd.number("benchmark.gamma", p.gamma);
    p.amplitude = rd.number("benchmark.amplitude", p.amplitude);
    p.z0 = rd.number("benchmark.z0", p.z0);
    if (p.elements < 1) throw ConfigError("key 'benchmark.elements' must be at least 1");
    positive(p.kappa, "benchmark.kappa");
    non_negative(p.gamma, "benchmark.gamma");
  } else if (c.benchmark == "mass_spring") {
    auto& p = c.mass_spring;
    p.steps = rd.integer("benchmark.steps", p.steps);
    p.horizon = rd.number("benchmark.horizon", p.horizon);
    p.m1 = rd.number("benchmark.m1", p.m1);
    p.m2 = rd.number("benchmark.m2", p.m2);
    p.k1 = rd.number("benchmark.k1", p.k1);
    p.k2 = rd.number("benchmark.k2", p.k2);
    p.k3 = rd.number("benchmark.k3", p.k3);
    p.gamma = rd.number("benchmark.gamma", p.gamma);
    if (p.steps < 1) throw ConfigError("key 'benchmark.steps' must be at least 1");
    positive(p.horizon, "benchmark.horizon");
    positive(p.m1, "benchmark.m1");
    positive(p.m2, "benchmark.m2");
    non_negative(p.gamma, "benchmark.gamma");
  } else if (c.benchmark == "advection_diffusion") {
    auto& p = c.advection_diffusion;
    p.cells = rd.integer("benchmark.cells", p.cells);
    p.kappa = rd.number("benchmark.kappa", p.kappa);
    p.gamma = rd.number("benchmark.gamma", p.gamma);
    p.target = rd.number("benchmark.target", p.target);
    p.nonlinear_velocity = rd.boolean("benchmark.nonlinear_velocity", p.nonlinear_velocity);
    if (p.cells < 2) throw ConfigError("key 'benchmark.cells' must be at least 2");
    positive(p.kappa, "benchmark.kappa");
    non_negative(p.gamma, "benchmark.gamma");
  } else {
    throw ConfigError("unknown benchmark '" + c.benchmark +
                      "' (expected diffusion_reaction, mass_spring, or advection_diffusion)");
  }

  c.alpha_u = rd.number("prior.alpha_u");
  c.beta_u = rd.number("prior.beta_u");
  c.alpha_z = rd.number("prior.alpha_z");
  c.alpha_d = rd.number("prior.alpha_d");
  if (c.parametric()) {
    if (rd.raw("prior.beta_z"))
      throw ConfigError("key 'prior.beta_z' does not apply to a parametric control; remove it");
  } else {
    c.beta_z = rd.number("prior.beta_z");
    non_negative(c.beta_z, "prior.beta_z");
  }
  positive(c.alpha_u, "prior.alpha_u");
  non_negative(c.beta_u, "prior.beta_u");
  positive(c.alpha_z, "prior.alpha_z");
  positive(c.alpha_d, "prior.alpha_d");
  c.q = rd.integer("prior.q", c.q);
  c.gsvd_oversample = rd.integer("prior.oversample", c.gsvd_oversample);
  c.gsvd_seed = rd.seed("prior.seed", c.gsvd_seed);
  if (c.q == 0 || c.q < -1) throw ConfigError("key 'prior.q' must be positive, or -1 for automatic");
  if (c.gsvd_oversample < 0) throw ConfigError("key 'prior.oversample' must be non-negative");

  c.training_count = rd.integer("data.count", c.training_count);
  c.secondary_scale = rd.number("data.secondary_scale", c.secondary_scale);
  c.data_seed = rd.seed("data.seed", c.data_seed);
  if (c.training_count < 1) throw ConfigError("key 'data.count' must be at least 1");
  positive(c.secondary_scale, "data.secondary_scale");

  c.ranks = parse_rank_list(rd.text("update.ranks"));
  if (c.ranks.empty()) throw ConfigError("key 'update.ranks' lists no ranks");
  if (c.ranks.front() < 1) throw ConfigError("key 'update.ranks' must list positive ranks");
  c.rank_oversample = rd.integer("update.oversample", c.rank_oversample);
  c.rank_seed = rd.seed("update.projector_seed", c.rank_seed);
  c.samples = rd.integer("update.samples", c.samples);
  c.seed = rd.seed("update.seed", c.seed);
  c.evaluate_samples = rd.boolean("update.evaluate_samples", c.evaluate_samples);
  c.hifi_optimum = rd.boolean("update.hifi_optimum", c.hifi_optimum);
  if (c.samples < 0) throw ConfigError("key 'update.samples' must be non-negative");
  if (c.rank_oversample < 0) throw ConfigError("key 'update.oversample' must be non-negative");
  if (auto v = rd.raw("sweep.ranks")) c.sweep_ranks = parse_rank_list(*v);
  c.preview_samples = rd.integer("preview.samples", c.preview_samples);
  if (c.preview_samples < 1) throw ConfigError("key 'preview.samples' must be at least 1");

  c.gtol_rel = rd.number("optimizer.gtol_rel", c.gtol_rel);
  c.max_iter = static_cast<int>(rd.integer("optimizer.max_iter", c.max_iter));
  positive(c.gtol_rel, "optimizer.gtol_rel");
  if (c.max_iter < 1) throw ConfigError("key 'optimizer.max_iter' must be at least 1");

  if (auto v = rd.raw("output.dir")) c.output_dir = *v;
  rd.reject_unknown();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open configuration file " + path.string());
  return parse_config(is);
}

}  // namespace hdsa
