#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tapret/graph.hpp"
#include "tapret/model.hpp"
#include "tapret/objective.hpp"

namespace tapret {

// Flat "key = value" text. Every key must be consumed by the config that
// parses it; leftovers are errors.
class KvFile {
 public:
  static KvFile from_file(const std::string& path);
  static KvFile from_text(const std::string& text, const std::string& origin = "<text>");

  bool get_string(const std::string& key, std::string& out);
  bool get_int(const std::string& key, int& out);
  bool get_u64(const std::string& key, std::uint64_t& out);
  bool get_double(const std::string& key, double& out);
  bool get_bool(const std::string& key, bool& out);
  bool get_int_list(const std::string& key, std::vector<int>& out);
  bool get_double_pair(const std::string& key, double& a, double& b);

  // Throws if any key was never consumed.
  void finish() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> used_;
  std::string origin_;
};

enum class LossKind { NtXent, Pmr };
LossKind parse_loss(const std::string& s);
std::string to_string(LossKind k);

enum class OptimizerKind { Sgd, Adam };
OptimizerKind parse_optimizer(const std::string& s);
std::string to_string(OptimizerKind k);

Precision parse_precision(const std::string& s);
std::string to_string(Precision p);

struct TrainConfig {
  Pooling pooling = Pooling::Tap;
  LossKind loss = LossKind::NtXent;
  double tau = 0.07;
  double omega = 1.0;
  bool stop_gradient_prior = false;
  int D = 64;
  int D_p = 64;
  int hidden = 64;
  int batch_size = 16;
  int epochs = 30;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 42;
  Precision precision = Precision::Double;
  std::string checkpoint_path;
  std::vector<int> eval_ks = {1, 5, 10};
  int eval_tile = 16384;  // max (text, audio) pairs scored per tile

  LossConfig loss_config() const { return {tau, omega, stop_gradient_prior}; }
  void validate() const;
  static TrainConfig from_file(const std::string& path);
  static TrainConfig from_text(const std::string& text, const std::string& origin = "<text>");
  // Canonical snapshot; parsing it back reproduces the config exactly.
  std::string to_text() const;
};

}  // namespace tapret
