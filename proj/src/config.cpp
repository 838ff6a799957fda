#include "signflow/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace signflow {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last)
    throw ConfigError(key + ": malformed number '" + value + "'");
  return out;
}

SurfaceVariant parse_variant(const std::string& tok) {
  if (tok == "gamma_s") return SurfaceVariant::gamma_s;
  if (tok == "gamma_s_prime") return SurfaceVariant::gamma_s_prime;
  if (tok == "gamma_s_doubleprime") return SurfaceVariant::gamma_s_doubleprime;
  throw ConfigError("variants: unknown variant '" + tok + "'");
}

}  // namespace

void RunConfig::validate() const {
  if (dimension != 1 && dimension != 2)
    throw ConfigError("dimension: must be 1 or 2");
  if (n < 3) throw ConfigError("n: must be >= 3");
  if (kind != NonlinearityKind::odd_power)
    throw ConfigError("kind: must be odd_power");
  if (!(p > 2.0)) throw ConfigError("p: must be > 2");
  if (!(eps > 0.0)) throw ConfigError("eps: must be > 0");
  if (!(residual_tol > 0.0)) throw ConfigError("residual_tol: must be > 0");
  if (mesh_level < 3 || mesh_level > 7)
    throw ConfigError("mesh_level: must be in [3, 7]");
  if (variants.empty()) throw ConfigError("variants: must not be empty");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError(key + ": duplicate key");

    if (key == "dimension") {
      cfg.dimension = parse_number<int>(key, value);
    } else if (key == "n") {
      cfg.n = parse_number<int>(key, value);
    } else if (key == "kind") {
      if (value != "odd_power")
        throw ConfigError("kind: unknown nonlinearity kind '" + value + "'");
      cfg.kind = NonlinearityKind::odd_power;
    } else if (key == "p") {
      cfg.p = parse_number<double>(key, value);
    } else if (key == "eps") {
      cfg.eps = parse_number<double>(key, value);
    } else if (key == "residual_tol") {
      cfg.residual_tol = parse_number<double>(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "mesh_level") {
      cfg.mesh_level = parse_number<int>(key, value);
    } else if (key == "variants") {
      cfg.variants.clear();
      std::string rest = value;
      while (!rest.empty()) {
        std::size_t comma = rest.find(',');
        std::string tok = trim(rest.substr(0, comma));
        if (tok.empty()) throw ConfigError("variants: empty variant name");
        cfg.variants.push_back(parse_variant(tok));
        if (comma == std::string::npos) break;
        rest = rest.substr(comma + 1);
      }
    } else if (key == "output_dir") {
      if (value.empty()) throw ConfigError("output_dir: must not be empty");
      cfg.output_dir = value;
    } else {
      throw ConfigError(key + ": unknown key");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace signflow
