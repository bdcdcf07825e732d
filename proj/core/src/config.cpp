#include "tapret/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tapret {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Shortest decimal that parses back to the same double.
std::string format_double(double x) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == x) return buf;
  }
  return buf;
}

}  // namespace

KvFile KvFile::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return from_text(os.str(), path);
}

KvFile KvFile::from_text(const std::string& text, const std::string& origin) {
  KvFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ": line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(origin + ": line " + std::to_string(lineno) + ": empty key");
    }
    if (kv.values_.count(key)) {
      throw std::runtime_error(origin + ": line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    kv.values_[key] = value;
    kv.used_[key] = false;
  }
  return kv;
}

bool KvFile::get_string(const std::string& key, std::string& out) {
  auto it = values_.find(key);
  if (it == values_.end()) return false;
  used_[key] = true;
  out = it->second;
  return true;
}

bool KvFile::get_int(const std::string& key, int& out) {
  std::string s;
  if (!get_string(key, s)) return false;
  try {
    std::size_t pos = 0;
    out = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ": key '" + key + "': expected integer, got '" + s + "'");
  }
  return true;
}

bool KvFile::get_u64(const std::string& key, std::uint64_t& out) {
  std::string s;
  if (!get_string(key, s)) return false;
  try {
    std::size_t pos = 0;
    out = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ": key '" + key + "': expected unsigned integer, got '" + s + "'");
  }
  return true;
}

bool KvFile::get_double(const std::string& key, double& out) {
  std::string s;
  if (!get_string(key, s)) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ": key '" + key + "': expected real number, got '" + s + "'");
  }
  return true;
}

bool KvFile::get_bool(const std::string& key, bool& out) {
  std::string s;
  if (!get_string(key, s)) return false;
  if (s == "true" || s == "1") {
    out = true;
  } else if (s == "false" || s == "0") {
    out = false;
  } else {
    throw std::runtime_error(origin_ + ": key '" + key + "': expected true|false, got '" + s + "'");
  }
  return true;
}

bool KvFile::get_int_list(const std::string& key, std::vector<int>& out) {
  std::string s;
  if (!get_string(key, s)) return false;
  std::vector<int> vals;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      vals.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw std::runtime_error(origin_ + ": key '" + key + "': expected comma-separated integers, got '" + s + "'");
    }
  }
  if (vals.empty()) {
    throw std::runtime_error(origin_ + ": key '" + key + "': expected comma-separated integers, got '" + s + "'");
  }
  out = std::move(vals);
  return true;
}

bool KvFile::get_double_pair(const std::string& key, double& a, double& b) {
  std::string s;
  if (!get_string(key, s)) return false;
  std::size_t comma = s.find(',');
  if (comma == std::string::npos) {
    throw std::runtime_error(origin_ + ": key '" + key + "': expected 'x, y' pair, got '" + s + "'");
  }
  try {
    a = std::stod(trim(s.substr(0, comma)));
    b = std::stod(trim(s.substr(comma + 1)));
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ": key '" + key + "': expected 'x, y' pair, got '" + s + "'");
  }
  return true;
}

void KvFile::finish() const {
  for (const auto& [key, used] : used_) {
    if (!used) throw std::runtime_error(origin_ + ": unknown key '" + key + "'");
  }
}

LossKind parse_loss(const std::string& s) {
  if (s == "ntxent") return LossKind::NtXent;
  if (s == "pmr") return LossKind::Pmr;
  throw std::invalid_argument("unknown loss '" + s + "' (expected ntxent|pmr)");
}

std::string to_string(LossKind k) {
  return k == LossKind::NtXent ? "ntxent" : "pmr";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd|adam)");
}

std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::Sgd ? "sgd" : "adam";
}

Precision parse_precision(const std::string& s) {
  if (s == "double") return Precision::Double;
  if (s == "single") return Precision::Single;
  throw std::invalid_argument("unknown precision '" + s + "' (expected double|single)");
}

std::string to_string(Precision p) {
  return p == Precision::Double ? "double" : "single";
}

void TrainConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("config: tau must be > 0");
  if (!(omega >= 0.0)) throw std::invalid_argument("config: omega must be >= 0");
  if (D < 1 || D_p < 1 || hidden < 1) throw std::invalid_argument("config: D, D_p, hidden must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2 for contrastive training");
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (!(lr >= 0.0)) throw std::invalid_argument("config: lr must be >= 0");
  if (eval_ks.empty()) throw std::invalid_argument("config: eval_ks must be nonempty");
  for (int k : eval_ks) {
    if (k < 1) throw std::invalid_argument("config: eval_ks entries must be >= 1");
  }
  if (eval_tile < 1) throw std::invalid_argument("config: eval_tile must be >= 1");
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return from_text(os.str(), path);
}

TrainConfig TrainConfig::from_text(const std::string& text, const std::string& origin) {
  KvFile kv = KvFile::from_text(text, origin);
  TrainConfig cfg;
  std::string s;
  if (kv.get_string("pooling", s)) cfg.pooling = parse_pooling(s);
  if (kv.get_string("loss", s)) cfg.loss = parse_loss(s);
  kv.get_double("tau", cfg.tau);
  kv.get_double("omega", cfg.omega);
  kv.get_bool("stop_gradient_prior", cfg.stop_gradient_prior);
  kv.get_int("D", cfg.D);
  kv.get_int("D_p", cfg.D_p);
  kv.get_int("hidden", cfg.hidden);
  kv.get_int("batch_size", cfg.batch_size);
  kv.get_int("epochs", cfg.epochs);
  if (kv.get_string("optimizer", s)) cfg.optimizer = parse_optimizer(s);
  kv.get_double("lr", cfg.lr);
  kv.get_double_pair("betas", cfg.beta1, cfg.beta2);
  kv.get_double("eps", cfg.eps);
  kv.get_double("weight_decay", cfg.weight_decay);
  kv.get_u64("seed", cfg.seed);
  if (kv.get_string("precision", s)) cfg.precision = parse_precision(s);
  kv.get_string("checkpoint_path", cfg.checkpoint_path);
  kv.get_int_list("eval_ks", cfg.eval_ks);
  kv.get_int("eval_tile", cfg.eval_tile);
  kv.finish();
  cfg.validate();
  return cfg;
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "pooling = " << to_string(pooling) << '\n';
  os << "loss = " << to_string(loss) << '\n';
  os << "tau = " << format_double(tau) << '\n';
  os << "omega = " << format_double(omega) << '\n';
  os << "stop_gradient_prior = " << (stop_gradient_prior ? "true" : "false") << '\n';
  os << "D = " << D << '\n';
  os << "D_p = " << D_p << '\n';
  os << "hidden = " << hidden << '\n';
  os << "batch_size = " << batch_size << '\n';
  os << "epochs = " << epochs << '\n';
  os << "optimizer = " << to_string(optimizer) << '\n';
  os << "lr = " << format_double(lr) << '\n';
  os << "betas = " << format_double(beta1) << ", " << format_double(beta2) << '\n';
  os << "eps = " << format_double(eps) << '\n';
  os << "weight_decay = " << format_double(weight_decay) << '\n';
  os << "seed = " << seed << '\n';
  os << "precision = " << to_string(precision) << '\n';
  if (!checkpoint_path.empty()) os << "checkpoint_path = " << checkpoint_path << '\n';
  os << "eval_ks = ";
  for (std::size_t i = 0; i < eval_ks.size(); ++i) {
    if (i) os << ", ";
    os << eval_ks[i];
  }
  os << '\n';
  os << "eval_tile = " << eval_tile << '\n';
  return os.str();
}

}  // namespace tapret
