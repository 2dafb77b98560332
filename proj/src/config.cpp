#include "consensuslab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace consensuslab {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_reals(const std::string& s, int line, const std::string& key) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    // allow comma separators
    std::replace(tok.begin(), tok.end(), ',', ' ');
    std::istringstream ts(tok);
    double v;
    while (ts >> v) out.push_back(v);
    if (!ts.eof())
      throw ConfigError(line, key + ": cannot parse '" + tok + "' as a number");
  }
  if (out.empty()) throw ConfigError(line, key + ": expected at least one number");
  return out;
}

double parse_real(const std::string& s, int line, const std::string& key) {
  const auto v = parse_reals(s, line, key);
  if (v.size() != 1) throw ConfigError(line, key + ": expected a single number");
  return v[0];
}

long long parse_int(const std::string& s, int line, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(trim(s), &pos);
    if (pos != trim(s).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(line, key + ": cannot parse '" + s + "' as an integer");
  }
}

bool parse_bool(const std::string& s, int line, const std::string& key) {
  const std::string t = trim(s);
  if (t == "true" || t == "on" || t == "1") return true;
  if (t == "false" || t == "off" || t == "0") return false;
  throw ConfigError(line, key + ": expected true/false, got '" + s + "'");
}

CheckMode parse_check_mode(const std::string& s, int line, const std::string& key) {
  const std::string t = trim(s);
  if (t == "auto") return CheckMode::automatic;
  if (t == "on" || t == "true") return CheckMode::on;
  if (t == "off" || t == "false") return CheckMode::off;
  throw ConfigError(line, key + ": expected auto/on/off, got '" + s + "'");
}

Matrix parse_matrix(const std::string& s, int line, const std::string& key) {
  std::vector<std::vector<double>> rows;
  std::string part;
  std::istringstream is(s);
  while (std::getline(is, part, ';')) {
    const std::string t = trim(part);
    if (t.empty()) continue;
    rows.push_back(parse_reals(t, line, key));
  }
  if (rows.empty()) throw ConfigError(line, key + ": empty matrix");
  for (const auto& r : rows)
    if (r.size() != rows[0].size())
      throw ConfigError(line, key + ": ragged matrix rows");
  return Matrix::from_rows(rows);
}

struct RawEntry {
  std::string value;
  int line;
};

// key suffix "<j>_<i>" for per-channel values
ChannelKey parse_channel_suffix(const std::string& key, int line) {
  const auto us = key.find('_');
  const auto us2 = key.find('_', us + 1);
  if (us == std::string::npos || us2 == std::string::npos)
    throw ConfigError(line, "expected key of the form sigma_<j>_<i>: " + key);
  try {
    const int j = std::stoi(key.substr(us + 1, us2 - us - 1));
    const int i = std::stoi(key.substr(us2 + 1));
    return ChannelKey{j, i};
  } catch (const std::exception&) {
    throw ConfigError(line, "cannot parse channel indices in '" + key + "'");
  }
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

SimConfig ExperimentConfig::sim_config() const {
  SimConfig s;
  s.graph = graph;
  s.noise = noise;
  s.gain = gain;
  s.x0 = x0;
  s.dt = dt;
  s.horizon = horizon;
  s.sample_stride = stride;
  s.seed = seed;
  s.trials = trials;
  return s;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir) {
  std::map<std::string, std::map<std::string, RawEntry>> sections;
  {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(lineno, "malformed section header: " + t);
        section = trim(t.substr(1, t.size() - 2));
        static const char* known[] = {"graph", "noise", "gain", "sim", "output", "verify"};
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
              return section == k;
            }) == std::end(known))
          throw ConfigError(lineno, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(lineno, "expected 'key = value', got: " + t);
      if (section.empty()) throw ConfigError(lineno, "key outside of any section");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) throw ConfigError(lineno, "empty key");
      auto [it, inserted] = sections[section].try_emplace(key, RawEntry{value, lineno});
      if (!inserted)
        throw ConfigError(lineno, "duplicate key '" + key + "' in [" + section + "]");
    }
  }

  auto take = [&](const std::string& sec, const std::string& key) -> std::optional<RawEntry> {
    auto sit = sections.find(sec);
    if (sit == sections.end()) return std::nullopt;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return std::nullopt;
    RawEntry e = kit->second;
    sit->second.erase(kit);
    return e;
  };
  auto require = [&](const std::string& sec, const std::string& key) -> RawEntry {
    auto e = take(sec, key);
    if (!e) throw ConfigError(0, "missing required key '" + key + "' in [" + sec + "]");
    return *e;
  };

  ExperimentConfig cfg;

  // [graph]
  {
    const auto file = take("graph", "file");
    const auto agents = take("graph", "agents");
    const auto edges = take("graph", "edges");
    if (file && (agents || edges))
      throw ConfigError(file->line, "[graph] file and inline agents/edges are exclusive");
    if (file) {
      const std::filesystem::path p =
          std::filesystem::path(base_dir) / std::filesystem::path(file->value);
      std::ifstream in(p);
      if (!in) throw ConfigError(file->line, "cannot open graph file " + p.string());
      cfg.graph = parse_graph_file(in);
      cfg.graph_file = file->value;
    } else {
      if (!agents) throw ConfigError(0, "missing required key 'agents' in [graph]");
      const int n = static_cast<int>(parse_int(agents->value, agents->line, "agents"));
      std::vector<std::pair<int, int>> edge_list;
      if (edges) {
        std::istringstream es(edges->value);
        std::string tok;
        while (es >> tok) {
          const auto dash = tok.find('-');
          if (dash == std::string::npos)
            throw ConfigError(edges->line, "edges: expected i-j, got '" + tok + "'");
          try {
            edge_list.emplace_back(std::stoi(tok.substr(0, dash)),
                                   std::stoi(tok.substr(dash + 1)));
          } catch (const std::exception&) {
            throw ConfigError(edges->line, "edges: cannot parse '" + tok + "'");
          }
        }
      }
      try {
        cfg.graph = build_graph(n, edge_list);
      } catch (const std::exception& ex) {
        throw ConfigError(edges ? edges->line : agents->line, ex.what());
      }
      cfg.edges = edge_list;
    }
  }

  // [gain] first: state dimension feeds the noise model
  int state_dim = 1;
  {
    const auto dim = take("gain", "state_dim");
    const bool explicit_dim = dim.has_value();
    if (dim) state_dim = static_cast<int>(parse_int(dim->value, dim->line, "state_dim"));
    if (state_dim < 1) throw ConfigError(dim ? dim->line : 0, "state_dim must be >= 1");
    const auto k = take("gain", "k");
    const auto kmat = take("gain", "K");
    if (k && kmat) throw ConfigError(kmat->line, "[gain] give either k or K, not both");
    if (!k && !kmat) throw ConfigError(0, "missing 'k' (or 'K') in [gain]");
    if (k) {
      cfg.gain = GainMatrix::scalar(state_dim, parse_real(k->value, k->line, "k"));
    } else {
      const Matrix m = parse_matrix(kmat->value, kmat->line, "K");
      if (m.rows() != m.cols()) throw ConfigError(kmat->line, "K must be square");
      if (explicit_dim && m.rows() != state_dim)
        throw ConfigError(kmat->line, "K dimension disagrees with state_dim");
      state_dim = m.rows();
      cfg.gain = GainMatrix::full(m);
    }
  }

  // [noise]
  {
    const auto kind = require("noise", "kind");
    const auto symmetric = take("noise", "symmetric");
    const bool sym = symmetric ? parse_bool(symmetric->value, symmetric->line, "symmetric")
                               : false;
    if (kind.value == "homogeneous") {
      const auto sigma = require("noise", "sigma");
      cfg.noise = NoiseModel::homogeneous(parse_real(sigma.value, sigma.line, "sigma"), sym,
                                          state_dim);
    } else if (kind.value == "linear_scalar") {
      std::map<ChannelKey, double> values;
      auto& sec = sections["noise"];
      for (auto it = sec.begin(); it != sec.end();) {
        if (it->first.rfind("sigma_", 0) == 0) {
          const ChannelKey key = parse_channel_suffix(it->first, it->second.line);
          values[key] = parse_real(it->second.value, it->second.line, it->first);
          it = sec.erase(it);
        } else {
          ++it;
        }
      }
      if (values.empty())
        throw ConfigError(kind.line, "linear_scalar noise needs sigma_<j>_<i> entries");
      try {
        cfg.noise = NoiseModel::linear_scalar(std::move(values), sym, state_dim);
      } catch (const std::exception& ex) {
        throw ConfigError(kind.line, ex.what());
      }
    } else if (kind.value == "linear_matrix") {
      std::map<ChannelKey, Matrix> values;
      auto& sec = sections["noise"];
      for (auto it = sec.begin(); it != sec.end();) {
        if (it->first.rfind("Sigma_", 0) == 0) {
          const ChannelKey key = parse_channel_suffix(it->first, it->second.line);
          values[key] = parse_matrix(it->second.value, it->second.line, it->first);
          it = sec.erase(it);
        } else {
          ++it;
        }
      }
      if (values.empty())
        throw ConfigError(kind.line, "linear_matrix noise needs Sigma_<j>_<i> entries");
      try {
        cfg.noise = NoiseModel::linear_matrix(std::move(values), sym);
      } catch (const std::exception& ex) {
        throw ConfigError(kind.line, ex.what());
      }
      if (cfg.noise.state_dim != state_dim)
        throw ConfigError(kind.line, "Sigma dimension disagrees with gain dimension");
    } else {
      throw ConfigError(kind.line, "unknown noise kind '" + kind.value +
                                       "' (general intensities are API-only)");
    }
  }

  // [sim]
  {
    if (const auto v = take("sim", "dt")) cfg.dt = parse_real(v->value, v->line, "dt");
    if (const auto v = take("sim", "horizon"))
      cfg.horizon = parse_real(v->value, v->line, "horizon");
    if (const auto v = take("sim", "trials"))
      cfg.trials = static_cast<int>(parse_int(v->value, v->line, "trials"));
    if (const auto v = take("sim", "seed"))
      cfg.seed = static_cast<std::uint64_t>(parse_int(v->value, v->line, "seed"));
    if (const auto v = take("sim", "stride"))
      cfg.stride = static_cast<int>(parse_int(v->value, v->line, "stride"));
    const auto x0 = require("sim", "x0");
    cfg.x0 = parse_reals(x0.value, x0.line, "x0");
    if (static_cast<int>(cfg.x0.size()) != cfg.graph.n_agents * state_dim)
      throw ConfigError(x0.line, "x0 needs " +
                                     std::to_string(cfg.graph.n_agents * state_dim) +
                                     " entries (N*state_dim), got " +
                                     std::to_string(cfg.x0.size()));
    if (cfg.dt <= 0) throw ConfigError(0, "dt must be > 0");
    if (cfg.horizon < cfg.dt) throw ConfigError(0, "horizon must be >= dt");
    if (cfg.trials < 1) throw ConfigError(0, "trials must be >= 1");
  }

  // [output]
  {
    if (const auto v = take("output", "dir")) cfg.out_dir = v->value;
    if (const auto v = take("output", "per_trial"))
      cfg.per_trial_csv = parse_bool(v->value, v->line, "per_trial");
  }

  // [verify]
  {
    if (const auto v = take("verify", "sandwich"))
      cfg.verify.sandwich = parse_check_mode(v->value, v->line, "sandwich");
    if (const auto v = take("verify", "ss_error"))
      cfg.verify.ss_error = parse_check_mode(v->value, v->line, "ss_error");
    if (const auto v = take("verify", "growth_bound"))
      cfg.verify.growth_bound = parse_check_mode(v->value, v->line, "growth_bound");
    if (const auto v = take("verify", "slopes"))
      cfg.verify.slopes = parse_check_mode(v->value, v->line, "slopes");
    if (const auto v = take("verify", "divergence"))
      cfg.verify.divergence = parse_check_mode(v->value, v->line, "divergence");
    if (const auto v = take("verify", "unbiasedness"))
      cfg.verify.unbiasedness = parse_check_mode(v->value, v->line, "unbiasedness");
    if (const auto v = take("verify", "lil"))
      cfg.verify.lil = parse_check_mode(v->value, v->line, "lil");
  }

  for (const auto& [sec, keys] : sections)
    for (const auto& [key, entry] : keys)
      throw ConfigError(entry.line, "unknown key '" + key + "' in [" + sec + "]");

  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(),
                           std::filesystem::path(path).parent_path().string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[graph]\n";
  if (cfg.graph_file) {
    os << "file = " << *cfg.graph_file << "\n";
  } else {
    os << "agents = " << cfg.graph.n_agents << "\n";
    os << "edges =";
    bool any = false;
    for (int i = 1; i <= cfg.graph.n_agents; ++i)
      for (int j = i + 1; j <= cfg.graph.n_agents; ++j)
        if (cfg.graph.has_edge(i, j)) {
          os << ' ' << i << '-' << j;
          any = true;
        }
    if (!any) os << " ";
    os << "\n";
  }

  os << "\n[noise]\n";
  switch (cfg.noise.kind) {
    case NoiseKind::homogeneous:
      os << "kind = homogeneous\n";
      os << "sigma = " << format_real(cfg.noise.sigma) << "\n";
      break;
    case NoiseKind::linear_scalar:
      os << "kind = linear_scalar\n";
      for (const auto& [key, v] : cfg.noise.sigma_scalar)
        os << "sigma_" << key.source << '_' << key.observer << " = " << format_real(v)
           << "\n";
      break;
    case NoiseKind::linear_matrix:
      os << "kind = linear_matrix\n";
      for (const auto& [key, m] : cfg.noise.sigma_matrix) {
        os << "Sigma_" << key.source << '_' << key.observer << " =";
        for (int i = 0; i < m.rows(); ++i) {
          for (int j = 0; j < m.cols(); ++j) os << ' ' << format_real(m(i, j));
          if (i + 1 < m.rows()) os << " ;";
        }
        os << "\n";
      }
      break;
    case NoiseKind::general:
      throw std::invalid_argument("serialize_config: general noise is API-only");
  }
  os << "symmetric = " << (cfg.noise.symmetric_channels ? "true" : "false") << "\n";

  os << "\n[gain]\n";
  os << "state_dim = " << cfg.gain.n << "\n";
  if (cfg.gain.scalar_k) {
    os << "k = " << format_real(*cfg.gain.scalar_k) << "\n";
  } else {
    os << "K =";
    for (int i = 0; i < cfg.gain.K.rows(); ++i) {
      for (int j = 0; j < cfg.gain.K.cols(); ++j)
        os << ' ' << format_real(cfg.gain.K(i, j));
      if (i + 1 < cfg.gain.K.rows()) os << " ;";
    }
    os << "\n";
  }

  os << "\n[sim]\n";
  os << "dt = " << format_real(cfg.dt) << "\n";
  os << "horizon = " << format_real(cfg.horizon) << "\n";
  os << "trials = " << cfg.trials << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "stride = " << cfg.stride << "\n";
  os << "x0 =";
  for (double v : cfg.x0) os << ' ' << format_real(v);
  os << "\n";

  os << "\n[output]\n";
  os << "dir = " << cfg.out_dir << "\n";
  os << "per_trial = " << (cfg.per_trial_csv ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace consensuslab
